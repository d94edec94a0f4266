"""Command-line interface: ingest, select, train, eval, sweep.

Exit codes: 0 success, 2 input/config error, 3 knowledge underflow,
4 numerical failure. Standard output carries ``key=value`` lines.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass

from . import lda
from .config import build, option, parse_counts, parse_optional, parse_ratio, read_flat, to_flat
from .corpus import cv_folds, ingest, load_stopwords, read_corpus, write_corpus
from .errors import GEFLError, InputError
from .experiments import ExperimentSpec, accuracy, run, write_results
from .knowledge import (draw_labeled, info_gain_pool, neutral_features, read_labeled_features,
                        write_labeled_features, write_pool)
from .model import read_model, write_model
from .objective import RegularizationConfig, canonical_method
from .optimizer import OptimizerConfig
from .training import train

log = logging.getLogger("robust_gefl")


@dataclass
class RunConfig:
    """Every tunable of the single-run commands; resolved values are echoed for provenance."""

    method: str = option("ge_fl", canonical_method)
    sigma: float = option(1.0, float)
    beta: float = option(5.0, float)
    reference: tuple | None = option(None, parse_ratio, help="class ratio in class order, or 'train'")
    neutral: int = option(10, int, help="number of frequent words used as neutral features")
    pool: int = option(20, int)
    per_class: tuple = option((10, 10), lambda s: parse_counts(s.replace(",", ":")))
    seed: int = option(0, int)
    min_count: int = option(2, int)
    topics: int | None = option(None, parse_optional(int))
    lda_iterations: int = option(500, int)
    lda_alpha: float | None = option(None, parse_optional(float))
    lda_eta: float = option(0.01, float)
    max_iterations: int = option(300, int)
    memory: int = option(10, int)
    gradient_tolerance: float = option(1e-5, float)
    missing: str = option("warn", str)
    folds: int | None = option(None, parse_optional(int), help="with fold: train/eval on one CV split")
    fold: int | None = option(None, parse_optional(int))


_CONFIG_FLAGS = {
    "method": "--method", "sigma": "--sigma", "beta": "--beta", "reference": "--reference",
    "neutral": "--neutral", "pool": "--pool", "per_class": "--per-class", "seed": "--seed",
    "min_count": "--min-count", "topics": "--topics", "lda_iterations": "--lda-iterations",
    "lda_alpha": "--lda-alpha", "lda_eta": "--lda-eta", "max_iterations": "--max-iterations",
    "memory": "--memory", "gradient_tolerance": "--gradient-tolerance", "missing": "--missing",
    "folds": "--folds", "fold": "--fold",
}


def _add_config_flags(parser: argparse.ArgumentParser, names: list[str]) -> None:
    parser.add_argument("--config", help="flat 'key = value' file; flags override it")
    for name in names:
        parser.add_argument(_CONFIG_FLAGS[name], dest=name, default=None)


def _resolve(args, names: list[str]) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(read_flat(args.config))
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    return build(RunConfig, values)


def _emit(**pairs) -> None:
    print(" ".join(f"{k}={v}" for k, v in pairs.items()))


def _echo(config: RunConfig, names: list[str]) -> dict:
    flat = to_flat(config)
    return {k: flat[k] for k in names}


def _split(corpus, config: RunConfig, part: str):
    if config.fold is None:
        return corpus
    folds = config.folds or 10
    if not 0 <= config.fold < folds:
        raise InputError(f"fold must lie in [0, {folds})")
    train_part, test_part = cv_folds(corpus, folds, config.seed)[config.fold]
    return train_part if part == "train" else test_part


INGEST = ["min_count"]
SELECT = ["pool", "per_class", "neutral", "seed", "topics", "lda_iterations", "lda_alpha", "lda_eta",
          "folds", "fold"]
TRAIN = ["method", "sigma", "beta", "reference", "neutral", "seed", "max_iterations", "memory",
         "gradient_tolerance", "missing", "folds", "fold"]
EVAL = ["seed", "folds", "fold"]


def cmd_ingest(args) -> int:
    config = _resolve(args, INGEST)
    stopwords = load_stopwords(args.stopwords)
    corpus = ingest(args.input, stopwords, config.min_count)
    prov = {"command": "ingest", "input": args.input, "stopwords": args.stopwords or "bundled",
            **_echo(config, INGEST)}
    write_corpus(corpus, args.out, prov)
    _emit(docs=len(corpus), vocab=corpus.n_features, classes=corpus.n_classes, min_count=config.min_count,
          out=args.out)
    return 0


def cmd_select(args) -> int:
    config = _resolve(args, SELECT)
    corpus = _split(read_corpus(args.corpus), config, "train")
    if args.method == "info-gain":
        pool = info_gain_pool(corpus, config.pool)
    else:
        topics = config.topics or corpus.n_classes
        model = lda.fit(corpus, topics, config.lda_iterations, config.lda_alpha, config.lda_eta, config.seed)
        pool = lda.lda_feature_pool(model, corpus, config.pool)
        if args.topics_out:
            lda.write_topics(model, corpus, args.topics_out, config.pool,
                             {"command": "select", "corpus": args.corpus, **_echo(config, SELECT)})
    per_class = config.per_class
    if len(per_class) == 1:
        per_class = per_class * corpus.n_classes
    labeled = draw_labeled(pool, per_class, config.seed)
    prov = {"command": "select", "corpus": args.corpus, "selection": args.method, **_echo(config, SELECT)}
    if args.method == "lda":
        prov["topic_labeling"] = "simulated from document labels"
    write_labeled_features(labeled, corpus, args.out, prov)
    if args.pool_out:
        write_pool(pool, corpus, args.pool_out, prov)
    n_neutral = 0
    if args.neutral_out:
        neutral = neutral_features(corpus, min(config.neutral, corpus.n_features))
        write_labeled_features(neutral, corpus, args.neutral_out, prov)
        n_neutral = len(neutral)
    _emit(labeled=len(labeled), neutral=n_neutral, method=args.method, out=args.out)
    return 0


def cmd_train(args) -> int:
    config = _resolve(args, TRAIN)
    full = read_corpus(args.corpus)
    corpus = _split(full, config, "train")
    labeled = read_labeled_features(args.features, full, config.missing)
    neutral = None
    if config.method == "neutral":
        if args.neutral_features:
            neutral = read_labeled_features(args.neutral_features, full, config.missing)
        else:
            neutral = neutral_features(corpus, min(config.neutral, corpus.n_features))
    reference = None
    ref_source = "none"
    if config.method == "kl_divergence":
        if config.reference is None:
            # simulates a rough class-distribution estimate supplied by a person
            reference = tuple(corpus.label_distribution())
            ref_source = "train"
        else:
            reference = config.reference
            ref_source = "given"
    reg = RegularizationConfig(config.method, config.beta, reference, neutral)
    optimizer = OptimizerConfig(memory=config.memory, max_iterations=config.max_iterations,
                                gradient_tolerance=config.gradient_tolerance)
    result = train(corpus, labeled, reg, config.sigma, optimizer, config.missing)
    prov = {"command": "train", "corpus": args.corpus, "features": args.features, **_echo(config, TRAIN),
            "reference_used": "none" if reference is None else ":".join(repr(p) for p in reference),
            "reference_source": ref_source, "iterations": result.trace.iterations,
            "termination": result.trace.reason, "objective": repr(result.trace.final_value)}
    write_model(result.params, full.classes, args.out, prov)
    _emit(method=config.method, beta=config.beta, lam=repr(result.objective.lam),
          labeled=len(result.objective.labeled), iterations=result.trace.iterations,
          termination=result.trace.reason, objective=repr(result.trace.final_value),
          gradient_norm=repr(result.trace.gradient_norm), out=args.out)
    return 0


def cmd_eval(args) -> int:
    config = _resolve(args, EVAL)
    params, classes = read_model(args.model)
    corpus = _split(read_corpus(args.corpus), config, "test")
    if classes != corpus.classes or params.n_features != corpus.n_features:
        raise InputError("model and corpus disagree on classes or vocabulary size")
    _emit(accuracy=repr(accuracy(params, corpus)))
    return 0


def cmd_sweep(args) -> int:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise InputError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip().replace("-", "_")] = value.strip()
    if args.gnuplot:
        overrides["gnuplot"] = "true"
    spec = ExperimentSpec.from_file(args.spec, **overrides)
    table = run(spec)
    paths = write_results(table, spec, args.out_dir)
    for path in paths:
        _emit(wrote=path)
    _emit(experiment=spec.name, rows=len(table.rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-gefl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="tokenize a raw corpus into the serialized format")
    p.add_argument("--input", required=True, help="TSV file or class-per-directory root")
    p.add_argument("--stopwords", help="stopword file (default: bundled English list)")
    p.add_argument("--out", required=True)
    _add_config_flags(p, INGEST)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("select", help="build a feature pool and draw labeled features")
    p.add_argument("--corpus", required=True)
    p.add_argument("--method", choices=("info-gain", "lda"), default="info-gain")
    p.add_argument("--out", required=True, help="labeled-feature file")
    p.add_argument("--pool-out")
    p.add_argument("--neutral-out", help="also write the top frequent words as neutral features")
    p.add_argument("--topics-out", help="LDA only: top words per topic")
    _add_config_flags(p, SELECT)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train from labeled features")
    p.add_argument("--corpus", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--neutral-features", help="neutral-feature file (default: top --neutral frequent words)")
    p.add_argument("--out", required=True)
    _add_config_flags(p, TRAIN)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="print accuracy of a model on a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    _add_config_flags(p, EVAL)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run an experiment spec and write CSV results")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", default="results")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a spec key")
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except GEFLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
