"""Evolutionary melody generation over ABC notation.

A genetic algorithm first evolves fixed-length melodies toward n-gram
similarity with a reference tune corpus, archiving everything it ever
evaluates.  Humans (or a deterministic stand-in) score the archive from 0 to
100, a bidirectional LSTM learns to predict those scores, and the same GA is
then re-run with the trained network as its fitness function.
"""

from .abc import (EmptyCorpus, SkipReport, Token, Tune, UnsupportedConstruct,
                  load_corpus, render, render_body, scan_corpus, tokenize)
from .corpus_index import (CorpusIndex, build_index, fitness_similarity,
                           fitness_similarity_naive, fitness_upper_bound)
from .ga import (ArchiveEntry, GaConfig, GaRun, Melody, crossover, mutate,
                 random_melody, run_ga, select_parents)
from .score_store import (ScoredMelody, ScoreOutOfRange, ScoreStore,
                          StorageError, UnknownMelody, melody_id)
from .surrogate import (DivergenceDetected, SurrogateModel, TrainConfig,
                        UnknownToken, as_fitness, forward, initialize_model,
                        load_model, loss_and_gradients, save_model, train)
from .pipeline import (InsufficientScores, PipelineConfig, bench_timing,
                       corpus_stats, phase1, phase2, phase3, synthetic_scorer)

__version__ = "0.1.0"
