"""Genetic algorithm over fixed-length token melodies.

One generation: pick the two fittest members as parents, breed
``population_size - 1`` children by gene-wise uniform crossover followed by
per-gene mutation, and carry the single best member over unchanged
(elitism).  Every chromosome ever evaluated, including the initial random
population, lands in the run archive so it can be scored later.

All randomness flows through one ``random.Random`` seeded from the config;
identical (config, fitness, seed) inputs reproduce the run exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .abc import Token, tokenize, render_body

Melody = tuple[Token, ...]


class LengthMismatch(ValueError):
    """Crossover parents must share the same length."""


class FitnessError(RuntimeError):
    """A fitness function failed; carries the generation it failed in."""

    def __init__(self, iteration: int, cause: BaseException):
        self.iteration = iteration
        super().__init__(f"fitness evaluation failed at iteration {iteration}: {cause}")


@dataclass(frozen=True)
class GaConfig:
    max_iterations: int = 2000
    population_size: int = 20
    crossover_rate: float = 0.5
    mutation_rate: float = 0.1
    melody_length: int = 30
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.melody_length < 1:
            raise ValueError("melody_length must be positive")


@dataclass(frozen=True)
class ArchiveEntry:
    melody: Melody
    fitness: float
    iteration: int


@dataclass
class GaRun:
    best_melody: Melody
    best_fitness: float
    archive: list[ArchiveEntry] = field(default_factory=list)
    fitness_trace: list[float] = field(default_factory=list)


def random_melody(prob_table: dict[Token, float], length: int,
                  rng: random.Random) -> Melody:
    """Draw ``length`` tokens i.i.d. from the probability table."""
    alphabet = list(prob_table)
    weights = list(prob_table.values())
    return tuple(rng.choices(alphabet, weights=weights, k=length))


def select_parents(population: list[tuple[Melody, float]]) -> tuple[Melody, Melody]:
    """The two fittest members; ties go to the lower population index."""
    if len(population) < 2:
        raise ValueError("population must have at least two members")
    order = sorted(range(len(population)), key=lambda i: (-population[i][1], i))
    return population[order[0]][0], population[order[1]][0]


def crossover(best1: Melody, best2: Melody, rate: float,
              rng: random.Random) -> Melody:
    """Gene-wise uniform crossover: gene i comes from ``best1`` with
    probability ``rate``, otherwise from ``best2``."""
    if len(best1) != len(best2):
        raise LengthMismatch(f"parent lengths differ: {len(best1)} vs {len(best2)}")
    return tuple(a if rng.random() >= 1.0 - rate else b
                 for a, b in zip(best1, best2))


def mutate(child: Melody, rate: float, prob_table: dict[Token, float],
           rng: random.Random) -> Melody:
    """Independently replace each gene, with probability ``rate``, by a fresh
    draw from the probability table."""
    alphabet = list(prob_table)
    weights = list(prob_table.values())
    return tuple(rng.choices(alphabet, weights=weights, k=1)[0]
                 if rng.random() < rate else gene
                 for gene in child)


def run_ga(config: GaConfig, fitness, prob_table: dict[Token, float],
           rng: random.Random | None = None) -> GaRun:
    """Run the GA for ``config.max_iterations`` generations.

    ``fitness`` maps a melody to a real score (higher is better).  The
    returned run holds the best melody, the complete evaluation archive
    (``population_size + max_iterations * (population_size - 1)`` entries)
    and the per-iteration best-fitness trace (non-decreasing, thanks to
    elitism; entry 0 is the initial population's best).
    """
    if rng is None:
        rng = random.Random(config.rng_seed)

    def evaluate(melody: Melody, iteration: int) -> float:
        try:
            return fitness(melody)
        except Exception as exc:
            raise FitnessError(iteration, exc) from exc

    archive: list[ArchiveEntry] = []
    population: list[tuple[Melody, float]] = []
    for _ in range(config.population_size):
        melody = random_melody(prob_table, config.melody_length, rng)
        score = evaluate(melody, 0)
        population.append((melody, score))
        archive.append(ArchiveEntry(melody, score, 0))

    trace = [max(score for _, score in population)]
    for iteration in range(1, config.max_iterations + 1):
        best1, best2 = select_parents(population)
        elite = max(range(len(population)), key=lambda i: (population[i][1], -i))
        next_population = [population[elite]]
        for _ in range(config.population_size - 1):
            child = crossover(best1, best2, config.crossover_rate, rng)
            child = mutate(child, config.mutation_rate, prob_table, rng)
            score = evaluate(child, iteration)
            next_population.append((child, score))
            archive.append(ArchiveEntry(child, score, iteration))
        population = next_population
        trace.append(max(score for _, score in population))

    best_melody, best_fitness = max(
        population, key=lambda pair: pair[1])
    return GaRun(best_melody=best_melody, best_fitness=best_fitness,
                 archive=archive, fitness_trace=trace)


def save_archive(run: GaRun, path) -> None:
    """Write the archive as one tab-separated record per line:
    ``iteration<TAB>fitness<TAB>abc body``."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in run.archive:
            fh.write(f"{entry.iteration}\t{entry.fitness!r}\t{render_body(entry.melody)}\n")


def load_archive(path) -> list[ArchiveEntry]:
    """Read an archive file written by :func:`save_archive`."""
    entries: list[ArchiveEntry] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            iteration, fitness, body = line.split("\t", 2)
            entries.append(ArchiveEntry(tuple(tokenize(body)), float(fitness),
                                        int(iteration)))
    return entries
