"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

Criteria 1-9 exercise the Python package only, through its public API and
the CLI, with the built-in synthetic scorer standing in for human raters.
The browser UI has its own end-to-end suite under frontend/.
"""

import json
import random
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from evomelody.abc import Token, Tune, load_corpus, render_body, tokenize
from evomelody.cli import main as cli_main
from evomelody.corpus_index import (build_index, fitness_similarity,
                                    fitness_similarity_naive,
                                    fitness_upper_bound)
from evomelody.ga import GaConfig, crossover, mutate, random_melody, run_ga
from evomelody.pipeline import (PipelineConfig, bench_timing, phase1, phase2,
                                phase3, synthetic_scorer)
from evomelody.score_store import ScoreStore, melody_id
from evomelody.surrogate import (TrainConfig, forward, initialize_model,
                                 train)

from test_surrogate import max_relative_gradient_error

REPO = Path(__file__).parent.parent
DEMO = REPO / "corpora" / "demo.abc"
LOOP = REPO / "corpora" / "closed_loop.abc"


def report(criterion: str, passed: bool, detail: str) -> None:
    print(f"\n[{criterion}] {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, f"{criterion}: {detail}"


def uniform_tokens(texts: str):
    return [Token(pitch=p) for p in texts]


class TestAcceptance:
    def test_criterion_01_probability_anchor(self, tmp_path, capsys):
        # 100 G tokens among 5000: the stats table must report exactly 0.02
        # and the probability column must sum to 1 within 1e-9.
        start = time.perf_counter()
        g_line = render_body([Token(pitch="G")] * 100)
        filler = render_body([Token(pitch="C")] * 49)
        tunes = [f"X:{i}\nK:C\n{filler}\n" for i in range(100)]
        tunes.append(f"X:777\nK:C\n{g_line}\n")
        corpus_file = tmp_path / "anchor.abc"
        corpus_file.write_text("\n".join(tunes))

        assert cli_main(["corpus", "stats", "--corpus", str(corpus_file)]) == 0
        out = capsys.readouterr().out
        rows = [line.split() for line in out.splitlines()[2:] if line.strip()]
        table = {tok: (int(count), float(prob)) for tok, count, prob in rows}
        elapsed = time.perf_counter() - start

        total = sum(p for _, p in table.values())
        passed = (table["G"] == (100, 0.02)
                  and abs(total - 1.0) <= 1e-9
                  and sum(c for c, _ in table.values()) == 5000
                  and elapsed < 1.0)
        report("criterion 1", passed,
               f"P(G)={table['G'][1]} sum={total!r} in {elapsed:.2f}s")

    def test_criterion_02_fitness_oracle_equivalence(self):
        start = time.perf_counter()
        rng = random.Random(202)
        corpora = []
        for spec_tokens, n_tunes, length in (("CDEFG", 3, 20),
                                             ("CDEFGABcde", 5, 30),
                                             ("DEGABd", 4, 25)):
            alphabet = uniform_tokens(spec_tokens)
            corpora.append([Tune(id=f"t{i}",
                                 body=tuple(rng.choices(alphabet, k=length)))
                            for i in range(n_tunes)])

        checked = 0
        for corpus in corpora:
            index = build_index(corpus)
            alphabet = list(index.token_alphabet)
            for _ in range(1000):
                melody = tuple(rng.choices(alphabet, k=rng.randint(4, 30)))
                if fitness_similarity(melody, index) != \
                        fitness_similarity_naive(melody, corpus):
                    report("criterion 2", False, f"disagreement on {melody}")
                checked += 1

        # Hand-derived anchor: a verbatim copy of a 5-token corpus.
        anchor = [Tune(id="a", body=tuple(uniform_tokens("CDEFG")))]
        value = fitness_similarity(anchor[0].body, build_index(anchor))
        naive = fitness_similarity_naive(anchor[0].body, anchor)
        elapsed = time.perf_counter() - start
        passed = checked == 3000 and value == naive == 234 and elapsed < 10.0
        report("criterion 2", passed,
               f"{checked} random melodies agree, anchor={value}, {elapsed:.1f}s")

    def test_criterion_03_operator_statistics(self):
        start = time.perf_counter()
        rng = random.Random(303)
        best1 = tuple(uniform_tokens("C") * 10)
        best2 = tuple(uniform_tokens("D") * 10)
        trials = 12_000
        from_best1 = sum(gene == best1[0]
                         for _ in range(trials)
                         for gene in crossover(best1, best2, 0.5, rng))
        cross_freq = from_best1 / (trials * 10)

        table = {Token(pitch="a"): 0.5, Token(pitch="b"): 0.5}
        child = tuple(uniform_tokens("C") * 25)
        runs = 120_000 // len(child)
        changed = sum(gene != child[0]
                      for _ in range(runs)
                      for gene in mutate(child, 0.1, table, rng))
        mut_freq = changed / (runs * len(child))
        elapsed = time.perf_counter() - start
        passed = (abs(cross_freq - 0.5) <= 0.02
                  and abs(mut_freq - 0.1) <= 0.005
                  and elapsed < 10.0)
        report("criterion 3", passed,
               f"crossover {cross_freq:.4f} (target 0.5 +/- 0.02), "
               f"mutation {mut_freq:.4f} (target 0.1 +/- 0.005), {elapsed:.1f}s")

    def test_criterion_04_determinism_and_elitism(self):
        start = time.perf_counter()
        corpus = load_corpus(DEMO)
        index = build_index(corpus)
        fitness = lambda m: fitness_similarity(m, index)  # noqa: E731

        config = GaConfig(max_iterations=50, population_size=20,
                          melody_length=30, rng_seed=4040)
        twice = [run_ga(config, fitness, index.prob_table) for _ in range(2)]
        identical = twice[0] == twice[1]

        monotone = 0
        for seed in range(100):
            run = run_ga(GaConfig(max_iterations=50, population_size=20,
                                  melody_length=30, rng_seed=seed),
                         fitness, index.prob_table)
            monotone += all(a <= b for a, b in
                            zip(run.fitness_trace, run.fitness_trace[1:]))
        elapsed = time.perf_counter() - start
        passed = identical and monotone == 100 and elapsed < 60.0
        report("criterion 4", passed,
               f"bit-identical={identical}, non-decreasing traces "
               f"{monotone}/100, {elapsed:.1f}s")

    def test_criterion_05_gradient_check(self):
        start = time.perf_counter()
        model = initialize_model(uniform_tokens("CDEF"), hidden_size=3, seed=5)
        batch = [(tuple(uniform_tokens("CDEFC")), 30.0),
                 (tuple(uniform_tokens("FEDCF")), 70.0)]
        worst = max_relative_gradient_error(model, batch, step=1e-5)
        elapsed = time.perf_counter() - start
        passed = worst < 1e-4 and elapsed < 10.0
        report("criterion 5", passed,
               f"max relative gradient error {worst:.2e} (H=3, V=4), {elapsed:.1f}s")

    def test_criterion_06_surrogate_capacity(self):
        start = time.perf_counter()
        rng = np.random.default_rng(6)
        alphabet = uniform_tokens("CDEFGAB")
        melodies = [tuple(alphabet[i] for i in rng.integers(0, 7, size=30))
                    for _ in range(10)]
        targets = [7.0, 93.0, 42.0, 58.0, 13.0, 77.0, 25.0, 88.0, 50.0, 66.0]
        model = initialize_model(alphabet, hidden_size=50, seed=6)
        trained, trace = train(model, list(zip(melodies, targets)),
                               TrainConfig(epochs=1500))
        zero = initialize_model(alphabet, hidden_size=50, seed=6)
        for arr in zero.parameters().values():
            arr[:] = 0.0
        zero_ok = all(forward(zero, m) == pytest.approx(50.0) for m in melodies)
        elapsed = time.perf_counter() - start
        passed = trace[-1] < 1.0 and zero_ok and elapsed < 120.0
        report("criterion 6", passed,
               f"overfit mse {trace[-1]:.3f} (< 1.0), zero-weight model "
               f"predicts 50: {zero_ok}, {elapsed:.0f}s")

    def test_criterion_07_closed_loop(self, tmp_path):
        # Substitute for the subjective listening study: phase1 archives
        # melodies, the deterministic similarity scorer replaces the raters,
        # phase2 trains the network on those scores, and phase3's emitted
        # melodies must genuinely out-score random ones by >= 20 points in
        # at least 4 of 5 seeded runs. Each seed is driven through the CLI.
        start = time.perf_counter()
        with ProcessPoolExecutor(max_workers=2) as pool:
            results = list(pool.map(_closed_loop_seed,
                                    ery := [(seed, str(tmp_path / f"seed{seed}"))
                                            for seed in range(5)]))
        wins = sum(gap >= 20.0 for gap, _, _ in results)
        elapsed = time.perf_counter() - start
        detail = ", ".join(f"seed {seed}: gap {gap:.1f} (emitted {emitted:.1f} "
                           f"vs random {rand:.1f})"
                           for (gap, emitted, rand), (seed, _) in zip(results, ery))
        passed = wins >= 4 and elapsed < 600.0
        report("criterion 7", passed,
               f"{wins}/5 seeds with gap >= 20; {detail}; {elapsed:.0f}s")

    def test_criterion_08_timing_profile(self, tmp_path):
        start = time.perf_counter()
        config = PipelineConfig(corpus_path=str(DEMO),
                                out_dir=str(tmp_path / "bench"),
                                hidden_size=50)
        rows = bench_timing(config, melody_lengths=(30,), evals_per_cell=30,
                            seed=8)
        by_kind = {(r.fitness, r.corpus_tokens): r.mean_us for r in rows}
        sizes = sorted({r.corpus_tokens for r in rows})
        naive_ratio = by_kind[("naive", sizes[1])] / by_kind[("naive", sizes[0])]
        surr_ratio = (by_kind[("surrogate", sizes[1])]
                      / by_kind[("surrogate", sizes[0])])
        elapsed = time.perf_counter() - start
        passed = (naive_ratio >= 1.5
                  and 0.8 <= surr_ratio <= 1.2
                  and elapsed < 120.0)
        report("criterion 8", passed,
               f"naive x{naive_ratio:.2f} on corpus doubling (>= 1.5), "
               f"surrogate x{surr_ratio:.2f} (within +/- 20%), {elapsed:.0f}s")

    def test_criterion_09_roundtrip_and_phase3_outputs(self, tmp_path):
        start = time.perf_counter()
        rng = random.Random(909)
        failures = 0
        # Random token sequences built directly (fast, seeded); the unit
        # suite runs the same property through hypothesis.
        pitches = "CDEFGAB" + "cdefgab"
        seqs = []
        for _ in range(10_000):
            length = rng.randint(1, 40)
            toks = []
            for _ in range(length):
                p = rng.choice(pitches + "z")
                if p == "z":
                    toks.append(Token(pitch="z", duration=rng.randint(1, 4)))
                else:
                    shift = rng.randint(-2, 0) if p.isupper() else rng.randint(0, 2)
                    toks.append(Token(pitch=p, accidental=rng.choice(["", "^", "_"]),
                                      octave_shift=shift,
                                      duration=rng.randint(1, 4)))
            seqs.append(toks)
        for toks in seqs:
            if tokenize(render_body(toks)) != toks:
                failures += 1

        # A miniature phase 3 run: every emitted file must parse and
        # re-render to the same body.
        config = PipelineConfig(
            corpus_path=str(DEMO),
            store_path=str(tmp_path / "s.jsonl"),
            model_path=str(tmp_path / "m.npz"),
            out_dir=str(tmp_path / "out"),
            phase1=GaConfig(max_iterations=5, population_size=4,
                            melody_length=12, rng_seed=9),
            phase3=GaConfig(max_iterations=8, population_size=6,
                            melody_length=12, rng_seed=10),
            train=TrainConfig(epochs=15, seed=11),
            hidden_size=6, output_count=6, scorer="synthetic")
        phase1(config)
        phase2(config)
        phase3(config)
        emitted = sorted((tmp_path / "out").glob("melody_*.abc"))
        parse_ok = 0
        for path in emitted:
            body = path.read_text().splitlines()[-1]
            toks = tokenize(body)
            parse_ok += render_body(toks) == body
        elapsed = time.perf_counter() - start
        passed = (failures == 0 and len(emitted) == 6 and parse_ok == 6
                  and elapsed < 10.0)
        report("criterion 9", passed,
               f"10000 round-trips clean, {parse_ok}/6 phase3 outputs "
               f"parse and re-render, {elapsed:.1f}s")
