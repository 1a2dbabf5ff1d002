"""Scratch experiment driver for tuning the closed-loop acceptance recipe.

Writes incremental results to /tmp/loop_<tag>_<seed>.txt so that long runs
can be watched from outside.  Not part of the package.
"""
import random
import sys
import time

import numpy as np

from evomelody.abc import Tune, tokenize
from evomelody.corpus_index import build_index, fitness_similarity
from evomelody.ga import GaConfig, random_melody, run_ga
from evomelody.pipeline import synthetic_scorer
from evomelody.score_store import ScoreStore
from evomelody.surrogate import (TrainConfig, as_fitness, forward_batch,
                                 initialize_model, train)

CORPORA = {
    "motif": [
        "C E G E C E G E | C E G E C E G E | C E G E C E G E | C E G E C E G E",
        "D F A F D F A F | D F A F D F A F | D F A F D F A F | D F A F D F A F",
        "C D E F G F E D | C D E F G F E D | C D E F G F E D | C D E F G F E D",
    ],
    "folk": [
        "C D E F G A B c | c B A G F E D C | C E G c G E C E",
        "G A B c B A G F | E F G A G F E D | C D E F E D C D",
        "c B A G A B c d | e d c B c d e f | g f e d c B A G",
    ],
}


def main(tag: str, seed: int, pop1: int, pop3: int, lr: float, hidden: int) -> None:
    out = open(f"/tmp/loop_{tag}_{seed}.txt", "w", buffering=1)
    log = lambda *a: print(*a, file=out, flush=True)
    t0 = time.time()
    corpus = [Tune(id=f"t{i}", body=tuple(tokenize(b)))
              for i, b in enumerate(CORPORA[tag])]
    index = build_index(corpus)
    D = 30
    scorer = synthetic_scorer(index, D)
    fit = lambda m: fitness_similarity(m, index)

    run1 = run_ga(GaConfig(max_iterations=200, population_size=pop1,
                           melody_length=D, rng_seed=seed), fit, index.prob_table)
    store = ScoreStore()
    for e in run1.archive:
        store.put_melody(e.melody)
    for mid in store.unscored_ids():
        store.add_score(mid, scorer(store.get(mid).melody))
    data = store.training_set()
    targets = np.array([t for _, t in data])
    log(f"phase1 best {run1.best_fitness} n {len(data)} "
        f"targets p50/p90/max {np.percentile(targets, [50, 90, 100]).round(1)} "
        f"t={time.time()-t0:.0f}s")

    alphabet = sorted(set(index.token_alphabet) | {t for m, _ in data for t in m},
                      key=lambda t: t.text)
    model = initialize_model(alphabet, hidden, seed=seed + 2)
    model, trace = train(model, data, TrainConfig(epochs=1000, learning_rate=lr,
                                                  seed=seed + 2))
    pred_train = forward_batch(model, [m for m, _ in data])
    corr = float(np.corrcoef(pred_train, targets)[0, 1])
    log(f"mse {trace[-1]:.2f} corr {corr:.3f} t={time.time()-t0:.0f}s")

    run3 = run_ga(GaConfig(max_iterations=100, population_size=pop3,
                           melody_length=D, rng_seed=seed + 1),
                  as_fitness(model), index.prob_table)
    ranked = sorted(run3.archive, key=lambda e: -e.fitness)
    seen, picked = set(), []
    for e in ranked:
        if e.melody in seen:
            continue
        seen.add(e.melody)
        picked.append(e)
        if len(picked) == 6:
            break
    rng = random.Random(4242)
    rand_mean = sum(scorer(random_melody(index.prob_table, D, rng))
                    for _ in range(1000)) / 1000
    true_s = [scorer(e.melody) for e in picked]
    gap = sum(true_s) / 6 - rand_mean
    log(f"rand {rand_mean:.2f} pred {[round(e.fitness, 1) for e in picked]}")
    log(f"true {[round(s, 1) for s in true_s]} gap {gap:.2f} "
        f"total {(time.time()-t0)/60:.1f} min")
    log("best: " + " ".join(t.text for t in picked[0].melody))


if __name__ == "__main__":
    tag, seed, pop1, pop3 = sys.argv[1], int(sys.argv[2]), int(sys.argv[3]), int(sys.argv[4])
    lr = float(sys.argv[5]) if len(sys.argv) > 5 else 1.0
    hidden = int(sys.argv[6]) if len(sys.argv) > 6 else 50
    main(tag, seed, pop1, pop3, lr, hidden)
