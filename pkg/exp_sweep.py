"""Scratch lr sweep with exploitation probes; writes /tmp/lr_sweep.txt."""
import random
import time

import numpy as np

from evomelody.abc import Tune, tokenize
from evomelody.corpus_index import build_index, fitness_similarity
from evomelody.ga import GaConfig, random_melody, run_ga
from evomelody.pipeline import synthetic_scorer
from evomelody.score_store import ScoreStore
from evomelody.surrogate import TrainConfig, forward_batch, initialize_model, train

BODIES = [
    "C E G E C E G E | C E G E C E G E | C E G E C E G E | C E G E C E G E",
    "D F A F D F A F | D F A F D F A F | D F A F D F A F | D F A F D F A F",
    "C D E F G F E D | C D E F G F E D | C D E F G F E D | C D E F G F E D",
]

out = open("/tmp/lr_sweep.txt", "w", buffering=1)
log = lambda *a: print(*a, file=out, flush=True)

corpus = [Tune(id=f"t{i}", body=tuple(tokenize(b))) for i, b in enumerate(BODIES)]
index = build_index(corpus)
D = 30
scorer = synthetic_scorer(index, D)
fit = lambda m: fitness_similarity(m, index)
run1 = run_ga(GaConfig(max_iterations=200, population_size=4, melody_length=D,
                       rng_seed=0), fit, index.prob_table)
store = ScoreStore()
for e in run1.archive:
    store.put_melody(e.melody)
for mid in store.unscored_ids():
    store.add_score(mid, scorer(store.get(mid).melody))
data = store.training_set()
targets = np.array([t for _, t in data])
alphabet = sorted(set(index.token_alphabet) | {t for m, _ in data for t in m},
                  key=lambda t: t.text)
rep = [tuple([tok] * D) for tok in index.token_alphabet]
rng = random.Random(7)

for lr in (3.0, 10.0, 30.0):
    t0 = time.time()
    model = initialize_model(alphabet, 50, seed=2)
    try:
        model, trace = train(model, data,
                             TrainConfig(epochs=1000, learning_rate=lr, seed=2))
    except Exception as exc:
        log(f"lr={lr}: {type(exc).__name__}: {exc}")
        continue
    pred = forward_batch(model, [m for m, _ in data])
    corr = float(np.corrcoef(pred, targets)[0, 1])
    pred_rep = forward_batch(model, rep)
    cur = random_melody(index.prob_table, D, rng)
    cur_pred = forward_batch(model, [cur])[0]
    for _ in range(600):
        i = rng.randrange(D)
        tok = rng.choice(index.token_alphabet)
        cand = cur[:i] + (tok,) + cur[i + 1:]
        p = forward_batch(model, [cand])[0]
        if p > cur_pred:
            cur, cur_pred = cand, p
    log(f"lr={lr}: mse {trace[-1]:.2f} corr {corr:.3f} rep-max {pred_rep.max():.1f} "
        f"exploit pred {cur_pred:.1f} true {scorer(cur):.1f} "
        f"({(time.time()-t0)/60:.1f} min)")
    log("  exploit melody: " + " ".join(t.text for t in cur))
log("done")
