"""Tokenizer and renderer for a restricted melodic subset of ABC notation.

The supported grammar covers single-voice note events and rests:

    token     := accidental? pitch octave-mark* duration?
    accidental: '^' (sharp) | '_' (flat)
    pitch     : 'A'..'G' | 'a'..'g' | 'z' (rest)
    octave-mark: "'" (up, lowercase pitches only) | ',' (down, uppercase only),
                 at most two marks per token
    duration  : '1'..'4' (multiples of the unit note length; absent means 1)

Bar lines (`|`, `||`, `|]`, `|:`, `:|`, `::` and combinations) and whitespace
are skipped.  Everything else (chords, ties, grace notes, inline fields,
ornaments) raises :class:`UnsupportedConstruct` so that nothing is silently
dropped inside a tune.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

REST = "z"
PITCHES = "CDEFGAB" + "cdefgab"
ACCIDENTALS = ("", "^", "_")

#: Header fields emitted by default when rendering a tune without headers.
DEFAULT_HEADERS = (
    ("X", "1"),
    ("T", "generated"),
    ("M", "4/4"),
    ("L", "1/8"),
    ("K", "C"),
)

#: Tokens per bar when rendering melody bodies.
BAR_EVERY = 8


class UnsupportedConstruct(ValueError):
    """Input uses an ABC feature outside the supported subset."""

    def __init__(self, position: int, snippet: str, reason: str = ""):
        self.position = position
        self.snippet = snippet
        self.reason = reason
        detail = f" ({reason})" if reason else ""
        super().__init__(f"unsupported ABC at position {position}: {snippet!r}{detail}")


class EmptyCorpus(ValueError):
    """A corpus source yielded no parseable tunes."""


@dataclass(frozen=True, slots=True)
class Token:
    """One atomic melody symbol: a note event or a rest.

    ``octave_shift`` counts octave marks, positive for ``'`` and negative for
    ``,``.  ``duration`` is in multiples of the tune's unit note length.
    """

    pitch: str
    accidental: str = ""
    octave_shift: int = 0
    duration: int = 1

    def __post_init__(self):
        if self.pitch != REST and self.pitch not in PITCHES:
            raise ValueError(f"invalid pitch {self.pitch!r}")
        if self.accidental not in ACCIDENTALS:
            raise ValueError(f"invalid accidental {self.accidental!r}")
        if not 1 <= self.duration <= 4:
            raise ValueError(f"duration {self.duration} outside [1, 4]")
        if self.pitch == REST:
            if self.accidental or self.octave_shift:
                raise ValueError("rests carry no accidental or octave marks")
        elif self.pitch.isupper():
            if not -2 <= self.octave_shift <= 0:
                raise ValueError("uppercase pitches only take ',' marks (at most 2)")
        else:
            if not 0 <= self.octave_shift <= 2:
                raise ValueError("lowercase pitches only take \"'\" marks (at most 2)")

    @property
    def is_rest(self) -> bool:
        return self.pitch == REST

    @property
    def text(self) -> str:
        """Canonical ABC spelling of this token."""
        marks = "'" * self.octave_shift if self.octave_shift > 0 else "," * -self.octave_shift
        dur = str(self.duration) if self.duration != 1 else ""
        return f"{self.accidental}{self.pitch}{marks}{dur}"

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True, slots=True)
class Tune:
    """A corpus record: a tokenized tune body plus its verbatim headers."""

    id: str
    body: tuple[Token, ...]
    source_headers: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.body:
            raise ValueError("tune body must be non-empty")

    def header(self, key: str) -> str | None:
        for k, v in self.source_headers:
            if k == key:
                return v
        return None


@dataclass(frozen=True, slots=True)
class SkipReport:
    """Why a tune was dropped during best-effort corpus ingestion."""

    source: str
    tune_id: str
    reason: str


_TOKEN_RE = re.compile(r"([_^]?)([A-Ga-gz])([',]*)(\d?)")
_BARISH = frozenset("|:]")


def tokenize(abc_body: str) -> list[Token]:
    """Tokenize the body of an ABC tune (headers already stripped).

    Bar lines, repeat marks and whitespace are skipped.  Raises
    :class:`UnsupportedConstruct` on anything outside the grammar.
    """
    tokens: list[Token] = []
    i, n = 0, len(abc_body)
    while i < n:
        ch = abc_body[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _BARISH:
            j = i
            while j < n and abc_body[j] in _BARISH:
                j += 1
            run = abc_body[i:j]
            # A bar construct must anchor on '|'; '::' alone is the double repeat.
            if "|" not in run and not (len(run) >= 2 and set(run) == {":"}):
                raise UnsupportedConstruct(i, _snippet(abc_body, i), "stray bar punctuation")
            i = j
            continue
        m = _TOKEN_RE.match(abc_body, i)
        if m is None:
            raise UnsupportedConstruct(i, _snippet(abc_body, i))
        acc, pitch, marks, dur = m.groups()
        if pitch == REST and (acc or marks):
            raise UnsupportedConstruct(i, _snippet(abc_body, i), "decorated rest")
        if len(marks) > 2:
            raise UnsupportedConstruct(i, _snippet(abc_body, i), "more than two octave marks")
        if marks:
            kind = marks[0]
            if any(c != kind for c in marks):
                raise UnsupportedConstruct(i, _snippet(abc_body, i), "mixed octave marks")
            if kind == "'" and not pitch.islower():
                raise UnsupportedConstruct(i, _snippet(abc_body, i), "\"'\" on uppercase pitch")
            if kind == "," and not pitch.isupper():
                raise UnsupportedConstruct(i, _snippet(abc_body, i), "',' on lowercase pitch")
        if dur and dur not in "1234":
            raise UnsupportedConstruct(i, _snippet(abc_body, i), f"duration {dur} outside 1..4")
        shift = len(marks) if marks.startswith("'") else -len(marks)
        tokens.append(Token(pitch=pitch, accidental=acc, octave_shift=shift,
                            duration=int(dur) if dur else 1))
        i = m.end()
    return tokens


def _snippet(text: str, position: int, width: int = 12) -> str:
    return text[position:position + width]


def render_body(tokens: list[Token] | tuple[Token, ...]) -> str:
    """Melody body text: tokens separated by spaces, a bar line every
    :data:`BAR_EVERY` tokens."""
    parts: list[str] = []
    for i, tok in enumerate(tokens):
        if i and i % BAR_EVERY == 0:
            parts.append("|")
        parts.append(tok.text)
    return " ".join(parts)


def render(tokens: list[Token] | tuple[Token, ...],
           headers: dict[str, str] | None = None) -> str:
    """Emit a complete ABC tune for ``tokens``.

    ``headers`` maps field letters to values; missing required fields fall
    back to :data:`DEFAULT_HEADERS`.  The key field (``K:``) is always emitted
    last, since it terminates the header section.
    """
    if not tokens:
        raise ValueError("cannot render an empty token sequence")
    merged = dict(DEFAULT_HEADERS)
    if headers:
        merged.update(headers)
    key_value = merged.pop("K")
    lines = [f"{k}:{v}" for k, v in merged.items()]
    lines.append(f"K:{key_value}")
    lines.append(render_body(tokens))
    return "\n".join(lines) + "\n"


_HEADER_RE = re.compile(r"^([A-Za-z]):(.*)$")


def _parse_tune_block(lines: list[str], source: str, seen_ids: set[str]) -> Tune:
    headers: list[tuple[str, str]] = []
    body_lines: list[str] = []
    in_body = False
    for line in lines:
        if line.startswith("%"):
            continue
        m = None if in_body else _HEADER_RE.match(line)
        if m:
            headers.append((m.group(1), m.group(2).strip()))
            if m.group(1) == "K":
                in_body = True
        else:
            in_body = True
            body_lines.append(line)
    ref = next((v for k, v in headers if k == "X"), "?")
    tune_id = f"{source}:{ref}"
    bump = 2
    while tune_id in seen_ids:
        tune_id = f"{source}:{ref}#{bump}"
        bump += 1
    body = tokenize("\n".join(body_lines))
    if not body:
        raise UnsupportedConstruct(0, "", "tune has no note events")
    return Tune(id=tune_id, body=tuple(body), source_headers=tuple(headers))


def _tune_blocks(text: str) -> list[list[str]]:
    """Split file text into tune blocks: each starts at an ``X:`` line and
    ends at a blank line."""
    blocks: list[list[str]] = []
    current: list[str] | None = None
    for raw in text.splitlines():
        line = raw.rstrip()
        if not line.strip():
            current = None
            continue
        if line.startswith("X:"):
            current = [line]
            blocks.append(current)
        elif current is not None:
            current.append(line)
        # Text before the first X: header is ignored (free-text preamble).
    return blocks


def scan_corpus(path: str | Path) -> tuple[list[Tune], list[SkipReport]]:
    """Parse every tune under ``path`` (a file or a directory of ``.abc``
    files), returning the parseable tunes and a report per skipped tune.

    Ingestion is best-effort across tunes but strict within a tune: any
    unsupported construct drops that tune with a report.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.abc"))
    else:
        files = [path]
    tunes: list[Tune] = []
    skips: list[SkipReport] = []
    seen_ids: set[str] = set()
    for file in files:
        text = file.read_text(encoding="utf-8")
        for block in _tune_blocks(text):
            ref = block[0][2:].strip() or "?"
            try:
                tune = _parse_tune_block(block, file.stem, seen_ids)
            except UnsupportedConstruct as exc:
                skips.append(SkipReport(source=file.name, tune_id=f"{file.stem}:{ref}",
                                        reason=str(exc)))
                continue
            seen_ids.add(tune.id)
            tunes.append(tune)
    return tunes, skips


def load_corpus(path: str | Path) -> list[Tune]:
    """Load all parseable tunes under ``path``; log one warning per skipped
    tune.  Raises :class:`EmptyCorpus` if nothing parses."""
    tunes, skips = scan_corpus(path)
    for skip in skips:
        logger.warning("skipping tune %s: %s", skip.tune_id, skip.reason)
    if not tunes:
        raise EmptyCorpus(f"no parseable tunes under {path}")
    return tunes
