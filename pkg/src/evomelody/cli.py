"""Command-line interface.

    evomelody corpus stats --corpus corpora/demo.abc
    evomelody phase1 --config run.json --seed 7
    evomelody phase2 --scorer synthetic
    evomelody phase3 --out out/
    evomelody bench
    evomelody score export --store out/scores.jsonl --file backup.jsonl
    evomelody score import --store out/scores.jsonl --file more.jsonl
    evomelody serve --port 8000

``--config`` points at a JSON file with the pipeline configuration (any
subset of fields; the rest take defaults).  Individual flags override the
file.  ``--seed`` reseeds every phase deterministically.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import pipeline
from .abc import load_corpus
from .corpus_index import build_index
from .score_store import ScoreStore


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON pipeline configuration file")
    parser.add_argument("--seed", type=int, help="base RNG seed for all phases")
    parser.add_argument("--corpus", help="ABC corpus file or directory")
    parser.add_argument("--store", help="score store file")
    parser.add_argument("--model", help="score model file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--scorer", choices=["store", "synthetic"],
                        help="where phase2 scores come from")
    parser.add_argument("--fitness", choices=["naive", "indexed"],
                        help="phase1 similarity implementation")


def _config_from(args: argparse.Namespace) -> pipeline.PipelineConfig:
    if getattr(args, "config", None):
        config = pipeline.PipelineConfig.from_file(args.config)
    else:
        config = pipeline.PipelineConfig()
    overrides = {}
    if getattr(args, "corpus", None):
        overrides["corpus_path"] = args.corpus
    if getattr(args, "store", None):
        overrides["store_path"] = args.store
    if getattr(args, "model", None):
        overrides["model_path"] = args.model
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    if getattr(args, "scorer", None):
        overrides["scorer"] = args.scorer
    if getattr(args, "fitness", None):
        overrides["fitness_mode"] = args.fitness
    if overrides:
        config = replace(config, **overrides)
    if getattr(args, "seed", None) is not None:
        config = config.with_seed(args.seed)
    return config


def cmd_corpus_stats(args: argparse.Namespace) -> int:
    config = _config_from(args)
    index = build_index(load_corpus(config.corpus_path))
    print(f"tokens: {index.total_tokens}  alphabet: {len(index.token_alphabet)}  "
          f"2-grams: {len(index.grams2)}  3-grams: {len(index.grams3)}  "
          f"4-grams: {len(index.grams4)}")
    print(f"{'token':<8}{'count':>8}{'probability':>18}")
    for text, count, prob in pipeline.corpus_stats(index):
        print(f"{text:<8}{count:>8}{prob:>18.12g}")
    return 0


def cmd_phase1(args: argparse.Namespace) -> int:
    config = _config_from(args)
    run = pipeline.phase1(config)
    print(f"phase1 done: best fitness {run.best_fitness}, "
          f"{len(run.archive)} melodies archived to {config.store_path}")
    return 0


def cmd_phase2(args: argparse.Namespace) -> int:
    config = _config_from(args)
    _, trace = pipeline.phase2(config)
    print(f"phase2 done: final training mse {trace[-1]:.3f} "
          f"after {len(trace)} epochs, model saved to {config.model_path}")
    return 0


def cmd_phase3(args: argparse.Namespace) -> int:
    config = _config_from(args)
    picked = pipeline.phase3(config)
    print(f"phase3 done: {len(picked)} melodies in {config.out_dir}")
    for rank, (_, score) in enumerate(picked, start=1):
        print(f"  melody_{rank:02d}.abc  predicted score {score:.2f}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    config = _config_from(args)
    rows = pipeline.bench_timing(config)
    print(f"{'fitness':<12}{'corpus_tokens':>14}{'melody_len':>12}{'mean_us':>12}")
    for row in rows:
        print(f"{row.fitness:<12}{row.corpus_tokens:>14}{row.melody_length:>12}"
              f"{row.mean_us:>12.1f}")
    print(f"data written to {config.out_dir}/bench.csv")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    config = _config_from(args)
    store = ScoreStore.load(config.store_path)
    if args.action == "export":
        store.save(args.file)
        print(f"exported {len(store)} records to {args.file}")
    else:
        added = store.merge_file(args.file)
        store.save(config.store_path)
        print(f"imported {added} records into {config.store_path}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = _config_from(args)
    app = create_app(config, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evomelody",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    corpus = sub.add_parser("corpus", help="corpus inspection")
    corpus_sub = corpus.add_subparsers(dest="corpus_command", required=True)
    stats = corpus_sub.add_parser("stats", help="token probability table")
    _add_common(stats)
    stats.set_defaults(func=cmd_corpus_stats)

    for name, func, help_text in (
            ("phase1", cmd_phase1, "similarity-driven GA, archives melodies"),
            ("phase2", cmd_phase2, "train the score model on the store"),
            ("phase3", cmd_phase3, "model-guided GA, emits ABC files"),
            ("bench", cmd_bench, "per-evaluation timing benchmark")):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(func=func)

    score = sub.add_parser("score", help="store import/export")
    score.add_argument("action", choices=["import", "export"])
    score.add_argument("--file", required=True, help="store-format file")
    _add_common(score)
    score.set_defaults(func=cmd_score)

    serve = sub.add_parser("serve", help="run the scoring HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--ui", default="frontend/dist",
                       help="directory with the built scoring UI")
    _add_common(serve)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
