"""Three-phase orchestration: corpus-similarity GA, score-model training,
and model-guided GA, plus the evaluation-cost benchmark.

Phase 1 evolves melodies against the reference corpus and archives every
chromosome into the score store.  Phase 2 trains the Bi-LSTM on the store's
(melody, mean score) pairs; with the synthetic scorer enabled it first
scores every unscored melody deterministically, which makes the whole loop
runnable unattended.  Phase 3 re-runs the GA with the trained network as the
objective and emits the top-rated distinct melodies as ABC files.

All artifacts (store, archives, model, traces, benchmark data) are plain
files; see the README for the formats.
"""

from __future__ import annotations

import csv
import json
import logging
import random
import time
from dataclasses import dataclass, field, replace, asdict
from pathlib import Path

import numpy as np

from .abc import Tune, load_corpus, render
from .corpus_index import (CorpusIndex, build_index, fitness_similarity,
                           fitness_similarity_naive, fitness_upper_bound)
from .ga import GaConfig, GaRun, Melody, random_melody, run_ga, save_archive
from .score_store import ScoreStore, melody_id
from .surrogate import (SurrogateModel, TrainConfig, as_fitness, evaluate_mse,
                        initialize_model, load_model, save_model, train)

logger = logging.getLogger(__name__)


class InsufficientScores(RuntimeError):
    """The store has no melody with enough scores to train on."""


@dataclass
class PipelineConfig:
    corpus_path: str = "corpora/demo.abc"
    store_path: str = "out/scores.jsonl"
    model_path: str = "out/model.npz"
    out_dir: str = "out"
    phase1: GaConfig = field(default_factory=lambda: GaConfig(
        max_iterations=2000, population_size=20, crossover_rate=0.5,
        mutation_rate=0.1, melody_length=30, rng_seed=0))
    phase3: GaConfig = field(default_factory=lambda: GaConfig(
        max_iterations=500, population_size=20, crossover_rate=0.5,
        mutation_rate=0.1, melody_length=30, rng_seed=1))
    train: TrainConfig = field(default_factory=TrainConfig)
    hidden_size: int = 50
    min_scores: int = 1
    output_count: int = 6
    fitness_mode: str = "indexed"       # or "naive": rescan the corpus per call
    scorer: str = "store"               # or "synthetic"
    holdout_fraction: float = 0.0
    dtype: str = "float64"              # "float32" halves training cost

    def __post_init__(self):
        if self.fitness_mode not in ("indexed", "naive"):
            raise ValueError("fitness_mode must be 'indexed' or 'naive'")
        if self.scorer not in ("store", "synthetic"):
            raise ValueError("scorer must be 'store' or 'synthetic'")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in [0, 1)")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be 'float64' or 'float32'")

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        kwargs = dict(raw)
        for name, sub in (("phase1", GaConfig), ("phase3", GaConfig),
                          ("train", TrainConfig)):
            if name in kwargs and isinstance(kwargs[name], dict):
                kwargs[name] = sub(**kwargs[name])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Derive all phase seeds from one base seed."""
        return replace(self,
                       phase1=replace(self.phase1, rng_seed=seed),
                       phase3=replace(self.phase3, rng_seed=seed + 1),
                       train=replace(self.train, seed=seed + 2))


def synthetic_scorer(index: CorpusIndex, melody_length: int):
    """Deterministic stand-in for a human rater: corpus similarity as a
    fraction of the best value any melody of that length could reach,
    scaled to [0, 100]."""
    bound = fitness_upper_bound(melody_length)

    def score(melody: Melody) -> float:
        return 100.0 * min(1.0, fitness_similarity(melody, index) / bound)

    return score


def _ensure_out_dir(config: PipelineConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_indexed_corpus(config: PipelineConfig) -> tuple[list[Tune], CorpusIndex]:
    corpus = load_corpus(config.corpus_path)
    return corpus, build_index(corpus)


def phase1(config: PipelineConfig) -> GaRun:
    """Similarity-driven GA; every archived melody is persisted to the store."""
    corpus, index = load_indexed_corpus(config)
    if config.fitness_mode == "naive":
        fitness = lambda m: fitness_similarity_naive(m, corpus)  # noqa: E731
    else:
        fitness = lambda m: fitness_similarity(m, index)  # noqa: E731
    run = run_ga(config.phase1, fitness, index.prob_table)

    out = _ensure_out_dir(config)
    store_path = Path(config.store_path)
    store = ScoreStore.load(store_path) if store_path.exists() else ScoreStore()
    for entry in run.archive:
        store.put_melody(entry.melody)
    store_path.parent.mkdir(parents=True, exist_ok=True)
    store.save(store_path)
    save_archive(run, out / "phase1_archive.tsv")
    logger.info("phase1: best fitness %s, archived %d melodies (%d distinct)",
                run.best_fitness, len(run.archive), len(store))
    return run


def phase2(config: PipelineConfig) -> tuple[SurrogateModel, list[float]]:
    """Train the score model on the store; returns (model, mse trace)."""
    store = ScoreStore.load(config.store_path)
    corpus, index = load_indexed_corpus(config)
    if config.scorer == "synthetic":
        scorer = synthetic_scorer(index, config.phase1.melody_length)
        for mid in store.unscored_ids():
            store.add_score(mid, scorer(store.get(mid).melody))
        store.save(config.store_path)

    data = store.training_set(config.min_scores)
    if not data:
        raise InsufficientScores(
            f"no melody in {config.store_path} has >= {config.min_scores} scores")

    alphabet = set(index.token_alphabet)
    for melody, _ in data:
        alphabet.update(melody)
    model = initialize_model(sorted(alphabet, key=lambda t: t.text),
                             hidden_size=config.hidden_size,
                             seed=config.train.seed,
                             dtype=np.dtype(config.dtype))

    holdout: list = []
    if config.holdout_fraction > 0.0:
        k = max(1, int(len(data) * config.holdout_fraction))
        picker = random.Random(config.train.seed)
        order = list(range(len(data)))
        picker.shuffle(order)
        holdout = [data[i] for i in order[:k]]
        data = [data[i] for i in order[k:]]
        if not data:
            raise InsufficientScores("holdout fraction left no training data")

    model, trace = train(model, data, config.train)
    if holdout:
        logger.info("phase2: holdout mse %.3f over %d melodies",
                    evaluate_mse(model, holdout), len(holdout))

    out = _ensure_out_dir(config)
    Path(config.model_path).parent.mkdir(parents=True, exist_ok=True)
    save_model(model, config.model_path)
    with open(out / "loss_trace.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mse"])
        writer.writerows((i, mse) for i, mse in enumerate(trace))
    logger.info("phase2: trained on %d melodies, final mse %.3f",
                len(data), trace[-1])
    return model, trace


def phase3(config: PipelineConfig,
           model: SurrogateModel | None = None) -> list[tuple[Melody, float]]:
    """Model-guided GA; writes the top distinct melodies as ABC files and
    returns them with their predicted scores, best first."""
    if model is None:
        model = load_model(config.model_path)
    _, index = load_indexed_corpus(config)
    run = run_ga(config.phase3, as_fitness(model), index.prob_table)

    ranked = sorted(run.archive, key=lambda e: (-e.fitness, melody_id(e.melody)))
    picked: list[tuple[Melody, float]] = []
    seen: set[str] = set()
    for entry in ranked:
        mid = melody_id(entry.melody)
        if mid in seen:
            continue
        seen.add(mid)
        picked.append((entry.melody, entry.fitness))
        if len(picked) == config.output_count:
            break

    out = _ensure_out_dir(config)
    save_archive(run, out / "phase3_archive.tsv")
    with open(out / "phase3_summary.tsv", "w", encoding="utf-8") as fh:
        for rank, (melody, score) in enumerate(picked, start=1):
            name = f"melody_{rank:02d}.abc"
            (out / name).write_text(
                render(melody, {"X": str(rank), "T": f"generated-{rank:02d}"}),
                encoding="utf-8")
            fh.write(f"{rank}\t{melody_id(melody)}\t{score!r}\t{name}\n")
    logger.info("phase3: emitted %d melodies, best predicted score %.2f",
                len(picked), picked[0][1] if picked else float("nan"))
    return picked


# -- corpus statistics ---------------------------------------------------

def corpus_stats(index: CorpusIndex) -> list[tuple[str, int, float]]:
    """(token text, count, probability) rows, most probable first."""
    rows = [(tok.text, round(index.prob_table[tok] * index.total_tokens),
             index.prob_table[tok]) for tok in index.token_alphabet]
    rows.sort(key=lambda r: (-r[2], r[0]))
    return rows


# -- evaluation-cost benchmark --------------------------------------------

@dataclass(frozen=True)
class BenchRow:
    fitness: str            # "naive" or "surrogate"
    corpus_tokens: int
    melody_length: int
    mean_us: float
    evals: int


def _double_corpus(corpus: list[Tune]) -> list[Tune]:
    """Same content twice under fresh ids: token count doubles while the
    token alphabet (and thus the surrogate input size) stays fixed."""
    extra = [Tune(id=f"{t.id}+dup", body=t.body, source_headers=t.source_headers)
             for t in corpus]
    return corpus + extra


def _mean_eval_us(fn, melodies, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for melody in melodies:
            fn(melody)
        elapsed = time.perf_counter() - start
        best = min(best, elapsed / len(melodies))
    return best * 1e6


def bench_timing(config: PipelineConfig,
                 melody_lengths: tuple[int, ...] = (15, 30, 60),
                 evals_per_cell: int = 20,
                 seed: int = 0) -> list[BenchRow]:
    """Per-evaluation cost of the corpus-scan fitness and the trained-model
    fitness, against corpus size (x1 and x2) and melody length.

    The same seeded melodies are used for every cell of a given length, and
    each cell reports the best of three repeat passes.  Results go to
    ``bench.csv`` in the output directory.
    """
    base = load_corpus(config.corpus_path)
    corpora = [base, _double_corpus(base)]
    index = build_index(base)
    model = initialize_model(index.token_alphabet,
                             hidden_size=config.hidden_size, seed=seed)
    surrogate_fn = as_fitness(model)
    rng = random.Random(seed)
    melodies_by_len = {
        length: [random_melody(index.prob_table, length, rng)
                 for _ in range(evals_per_cell)]
        for length in melody_lengths
    }

    rows: list[BenchRow] = []
    for corpus in corpora:
        tokens = sum(len(t.body) for t in corpus)
        for length in melody_lengths:
            melodies = melodies_by_len[length]
            rows.append(BenchRow("naive", tokens, length,
                                 _mean_eval_us(
                                     lambda m: fitness_similarity_naive(m, corpus),
                                     melodies), len(melodies)))
            rows.append(BenchRow("surrogate", tokens, length,
                                 _mean_eval_us(surrogate_fn, melodies),
                                 len(melodies)))

    out = _ensure_out_dir(config)
    with open(out / "bench.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fitness", "corpus_tokens", "melody_length",
                         "mean_us", "evals"])
        writer.writerows((r.fitness, r.corpus_tokens, r.melody_length,
                          f"{r.mean_us:.3f}", r.evals) for r in rows)
    return rows
