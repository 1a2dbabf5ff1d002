"""Corpus n-gram membership sets, token probabilities, and similarity fitness.

The fitness of a candidate melody is a weighted count of its sliding-window
n-grams (n = 2, 3, 4) that occur anywhere in the reference corpus:

    fitness = N2 + 10 * N3 + 100 * N4

Melody-side windows count with multiplicity; corpus-side membership is a set
(tunes never contribute windows across tune boundaries).  Two implementations
are provided: an indexed one backed by precomputed gram sets, and a naive one
that rescans the whole corpus note by note on every call.  They always agree
on the value; they differ only in cost profile.
"""

from __future__ import annotations

from dataclasses import dataclass

from .abc import EmptyCorpus, Token, Tune

#: Eq-form weights for 2-, 3-, and 4-gram matches.
DEFAULT_WEIGHTS = (1, 10, 100)
GRAM_SIZES = (2, 3, 4)

Gram = tuple[Token, ...]


@dataclass(frozen=True)
class CorpusIndex:
    """Immutable n-gram membership sets plus the token probability table."""

    grams2: frozenset[Gram]
    grams3: frozenset[Gram]
    grams4: frozenset[Gram]
    prob_table: dict[Token, float]
    token_alphabet: tuple[Token, ...]
    total_tokens: int

    def gram_set(self, n: int) -> frozenset[Gram]:
        return {2: self.grams2, 3: self.grams3, 4: self.grams4}[n]


def build_index(corpus: list[Tune] | tuple[Tune, ...]) -> CorpusIndex:
    """Build gram sets and the probability table from ``corpus``.

    Gram windows slide within each tune body and never cross tune
    boundaries.  Probabilities are occurrence counts over the total token
    count of the corpus.
    """
    if not corpus:
        raise EmptyCorpus("cannot index an empty corpus")
    grams: dict[int, set[Gram]] = {n: set() for n in GRAM_SIZES}
    counts: dict[Token, int] = {}
    total = 0
    for tune in corpus:
        body = tune.body
        for tok in body:
            counts[tok] = counts.get(tok, 0) + 1
        total += len(body)
        for n in GRAM_SIZES:
            target = grams[n]
            for i in range(len(body) - n + 1):
                target.add(tuple(body[i:i + n]))
    alphabet = tuple(sorted(counts, key=lambda t: t.text))
    prob_table = {tok: counts[tok] / total for tok in alphabet}
    return CorpusIndex(
        grams2=frozenset(grams[2]),
        grams3=frozenset(grams[3]),
        grams4=frozenset(grams[4]),
        prob_table=prob_table,
        token_alphabet=alphabet,
        total_tokens=total,
    )


def fitness_similarity(melody, index: CorpusIndex,
                       weights: tuple[int, int, int] = DEFAULT_WEIGHTS) -> int:
    """Weighted count of melody n-grams that are members of the corpus sets.

    Melodies shorter than ``n + 1`` simply contribute no n-term; a melody
    with no corpus overlap scores 0.
    """
    melody = tuple(melody)
    score = 0
    for n, w in zip(GRAM_SIZES, weights):
        gram_set = index.gram_set(n)
        hits = 0
        for i in range(len(melody) - n + 1):
            if melody[i:i + n] in gram_set:
                hits += 1
        score += w * hits
    return score


def fitness_similarity_naive(melody, corpus: list[Tune] | tuple[Tune, ...],
                             weights: tuple[int, int, int] = DEFAULT_WEIGHTS) -> int:
    """Same value as :func:`fitness_similarity`, computed by scanning every
    tune note by note, once per gram size, with no precomputed sets.

    Cost is linear in the corpus token count on every call; this is the
    reference-corpus comparison in its original, expensive form.  Tokens are
    mapped to small integers per call so the scan itself stays cheap (the
    mapping pass is itself part of the linear scan).
    """
    melody = tuple(melody)
    ids: dict[Token, int] = {}

    def encode(tok: Token) -> int:
        got = ids.get(tok)
        if got is None:
            got = len(ids)
            ids[tok] = got
        return got

    mel = [encode(t) for t in melody]
    bodies = [[encode(t) for t in tune.body] for tune in corpus]

    score = 0
    for n, w in zip(GRAM_SIZES, weights):
        windows = [tuple(mel[i:i + n]) for i in range(len(mel) - n + 1)]
        matched = [False] * len(windows)
        positions: dict[tuple[int, ...], list[int]] = {}
        for idx, win in enumerate(windows):
            positions.setdefault(win, []).append(idx)
        for body in bodies:
            for j in range(len(body) - n + 1):
                hit = positions.get(tuple(body[j:j + n]))
                if hit:
                    for idx in hit:
                        matched[idx] = True
        score += w * sum(matched)
    return score


def fitness_upper_bound(length: int,
                        weights: tuple[int, int, int] = DEFAULT_WEIGHTS) -> int:
    """Largest possible similarity fitness for a melody of ``length`` tokens
    (every window a member): (L-1) + 10(L-2) + 100(L-3) at default weights."""
    return sum(w * max(0, length - n + 1) for n, w in zip(GRAM_SIZES, weights))
