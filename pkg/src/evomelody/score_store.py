"""Persistent archive of generated melodies and their human scores.

Melodies are content-addressed: the id is a hash of the canonical ABC body
text, so re-putting the same token sequence is a no-op.  Scores live in an
append-only list per melody; the mean is always recomputed, never stored.

On disk the store is a JSON-lines file, one record per melody:

    {"id": "<hash>", "abc": "<body text>", "scores": [..]}

Records are written sorted by id, so equal stores produce identical files.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from .abc import tokenize, render_body
from .ga import Melody


class UnknownMelody(KeyError):
    """No melody with that id is in the store."""


class ScoreOutOfRange(ValueError):
    """Scores must lie in [0, 100]."""


class StorageError(RuntimeError):
    """The store file is missing, unreadable, or inconsistent."""


def melody_id(melody: Melody) -> str:
    """Stable content hash of a token sequence."""
    return hashlib.sha256(render_body(melody).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class ScoredMelody:
    melody_id: str
    melody: Melody
    scores: tuple[float, ...]

    @property
    def mean_score(self) -> float:
        """Arithmetic mean of the scores; recomputed on every access."""
        if not self.scores:
            raise ValueError("melody has no scores yet")
        return sum(self.scores) / len(self.scores)

    @property
    def score_count(self) -> int:
        return len(self.scores)


class ScoreStore:
    """In-memory store with explicit save/load; writes are serialized through
    a single lock so concurrent submitters never interleave."""

    def __init__(self):
        self._records: dict[str, ScoredMelody] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, melody_id: str) -> bool:
        return melody_id in self._records

    def ids(self) -> list[str]:
        return sorted(self._records)

    def get(self, mid: str) -> ScoredMelody:
        try:
            return self._records[mid]
        except KeyError:
            raise UnknownMelody(mid) from None

    def put_melody(self, melody: Melody) -> str:
        """Store a melody, returning its id.  Idempotent."""
        mid = melody_id(melody)
        with self._lock:
            if mid not in self._records:
                self._records[mid] = ScoredMelody(mid, tuple(melody), ())
        return mid

    def add_score(self, mid: str, score: float) -> ScoredMelody:
        """Append one score in [0, 100] and return the updated record."""
        if not isinstance(score, (int, float)) or isinstance(score, bool):
            raise ScoreOutOfRange(f"score must be a number, got {score!r}")
        score = float(score)
        if not 0.0 <= score <= 100.0:
            raise ScoreOutOfRange(f"score {score} outside [0, 100]")
        with self._lock:
            record = self._records.get(mid)
            if record is None:
                raise UnknownMelody(mid)
            updated = ScoredMelody(mid, record.melody, record.scores + (score,))
            self._records[mid] = updated
        return updated

    def training_set(self, min_scores: int = 1) -> list[tuple[Melody, float]]:
        """(melody, mean score) pairs for every melody with at least
        ``min_scores`` scores, ordered by melody id."""
        return [(rec.melody, rec.mean_score)
                for mid in self.ids()
                for rec in (self._records[mid],)
                if rec.score_count >= min_scores]

    def unscored_ids(self) -> list[str]:
        return [mid for mid in self.ids() if self._records[mid].score_count == 0]

    def pending(self, limit: int) -> list[ScoredMelody]:
        """Up to ``limit`` melodies with the fewest scores (id tie-break)."""
        order = sorted(self._records.values(),
                       key=lambda rec: (rec.score_count, rec.melody_id))
        return order[:limit]

    # -- persistence ----------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Atomically write the whole store as JSON lines.  The write itself
        runs under the single-writer lock, so concurrent savers serialize."""
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with self._lock:
            lines = [json.dumps({"id": mid,
                                 "abc": render_body(self._records[mid].melody),
                                 "scores": list(self._records[mid].scores)})
                     for mid in sorted(self._records)]
            tmp.write_text("\n".join(lines) + ("\n" if lines else ""),
                           encoding="utf-8")
            os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "ScoreStore":
        """Read a store file; ids are verified against the melody content."""
        path = Path(path)
        store = cls()
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot read store file {path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                melody = tuple(tokenize(raw["abc"]))
                scores = tuple(float(s) for s in raw["scores"])
            except (KeyError, ValueError, TypeError) as exc:
                raise StorageError(f"{path}:{lineno}: bad record: {exc}") from exc
            mid = melody_id(melody)
            if mid != raw["id"]:
                raise StorageError(f"{path}:{lineno}: id {raw['id']} does not "
                                   f"match melody content (expected {mid})")
            if any(not 0.0 <= s <= 100.0 for s in scores):
                raise StorageError(f"{path}:{lineno}: score outside [0, 100]")
            store._records[mid] = ScoredMelody(mid, melody, scores)
        return store

    def merge_file(self, path: str | Path) -> int:
        """Import records from another store file; melodies are unioned and
        score lists concatenated.  Returns the number of records read."""
        other = ScoreStore.load(path)
        with self._lock:
            for mid, rec in other._records.items():
                mine = self._records.get(mid)
                if mine is None:
                    self._records[mid] = rec
                else:
                    self._records[mid] = ScoredMelody(mid, mine.melody,
                                                      mine.scores + rec.scores)
        return len(other._records)
