"""Cross-validated experiment harness, synthetic corpora and result files.

An :class:`ExperimentSpec` describes a grid of settings (class-removal
fraction x labeled-feature counts x beta x reference class distribution)
and a list of methods. Every (repetition, setting, fold) cell builds its
prior knowledge from the training fold only, trains without reading
instance labels and scores accuracy on the held-out fold.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import lda
from .config import (build, format_value, option, parse_bool, parse_counts, parse_list, parse_optional,
                     parse_ratio, read_flat, to_flat)
from .corpus import CORPUS_MAGIC, Corpus, cv_folds, from_tokens, ingest, load_stopwords, read_corpus, unbalance
from .errors import InputError, NumericalError
from .knowledge import (FeaturePool, draw_labeled, info_gain_pool, neutral_features,
                        read_labeled_features)
from .model import ModelParameters, classify_corpus
from .objective import METHODS, RegularizationConfig, canonical_method, kl
from .optimizer import OptimizerConfig
from .training import train

log = logging.getLogger(__name__)

METHOD_LABELS = {"none": "ge_fl", "neutral": "neutral", "max_entropy": "max_entropy",
                 "kl_divergence": "kl_divergence"}


def derive_seed(*parts: int) -> int:
    """Deterministic 32-bit seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def accuracy(params: ModelParameters, test: Corpus) -> float:
    if len(test) == 0:
        raise InputError("empty test corpus")
    return float(np.mean(classify_corpus(params, test) == test.labels))


def _alpha_name(n: int, width: int) -> str:
    letters = []
    for _ in range(width):
        n, r = divmod(n, 26)
        letters.append(chr(ord("a") + r))
    return "".join(reversed(letters))


def synthesize_corpus(n_docs: int | Sequence[int] = 1000, vocab_size: int = 1000, indicators: int = 20,
                      doc_length: int = 40, noise: float = 0.3, seed: int = 0, n_classes: int = 2,
                      indicator_mass: float = 0.1, zipf: float = 1.0) -> Corpus:
    """Documents from class-conditional unigram distributions.

    Each token is an indicator word with probability ``indicator_mass`` and a
    shared background word otherwise. An indicator token comes from the
    document's own class with probability ``1 - noise`` and from a random
    other class otherwise. Background words and each class's indicators
    follow Zipf weights with exponent ``zipf``. Indicator words of class
    ``c`` are named ``<class>`` + letters, background words ``bg`` + letters.
    Document lengths are ``1 + Poisson(doc_length - 1)``.
    """
    if isinstance(n_docs, int):
        n_docs = [n_docs] * n_classes
    if len(n_docs) != n_classes or min(n_docs) < 1:
        raise InputError("need a positive document count per class")
    if not 0.0 <= noise <= 1.0 or not 0.0 <= indicator_mass <= 1.0:
        raise InputError("noise and indicator_mass must lie in [0, 1]")
    if vocab_size < 1 or indicators < 1 or doc_length < 1:
        raise InputError("vocab_size, indicators and doc_length must be positive")
    if n_classes == 2:
        classes = ["negative", "positive"]
    else:
        classes = ["class" + _alpha_name(c, 2) for c in range(n_classes)]
    prefixes = ["neg", "pos"] if n_classes == 2 else [f"c{_alpha_name(c, 2)}" for c in range(n_classes)]
    background = [f"bg{_alpha_name(j, 3)}" for j in range(vocab_size)]
    planted = [[f"{prefixes[c]}{_alpha_name(j, 3)}" for j in range(indicators)] for c in range(n_classes)]

    def zipf_weights(n):
        w = 1.0 / np.arange(1, n + 1) ** zipf
        return w / w.sum()

    bg_w, ind_w = zipf_weights(vocab_size), zipf_weights(indicators)
    rng = np.random.default_rng(seed)
    token_lists, labels, sources = [], [], []
    for c in range(n_classes):
        for i in range(n_docs[c]):
            length = 1 + rng.poisson(doc_length - 1)
            is_ind = rng.random(length) < indicator_mass
            n_ind = int(is_ind.sum())
            owners = np.full(n_ind, c)
            if n_classes > 1 and noise > 0:
                flip = rng.random(n_ind) < noise
                others = rng.integers(0, n_classes - 1, size=n_ind)
                others = others + (others >= c)
                owners = np.where(flip, others, owners)
            ind_words = rng.choice(indicators, size=n_ind, p=ind_w)
            bg_words = rng.choice(vocab_size, size=length - n_ind, p=bg_w)
            tokens = [planted[o][w] for o, w in zip(owners, ind_words)] + [background[w] for w in bg_words]
            token_lists.append(tokens)
            labels.append(classes[c])
            sources.append(f"synthetic:{classes[c]}:{i}")
    return from_tokens(token_lists, labels, sources, min_count=1)


def _methods(text: str) -> list[str]:
    return [canonical_method(m) for m in parse_list(str)(text)]


@dataclass
class ExperimentSpec:
    """Flat experiment description; every field can be set from a ``key = value`` file."""

    name: str = option("experiment", str, "label used in CSV rows and file names")
    corpus: str = option("synthetic", str, "'synthetic', a serialized corpus, a TSV file or a class directory")
    stopwords: str | None = option(None, parse_optional(str), "stopword file for raw corpora (default: bundled)")
    min_count: int = option(2, int, "document-frequency floor for raw corpora")
    synthetic_docs: int = option(1000, int, "documents per class")
    synthetic_classes: int = option(2, int)
    synthetic_vocab: int = option(1000, int, "background words")
    synthetic_indicators: int = option(20, int, "planted indicator words per class")
    synthetic_doc_length: int = option(40, int)
    synthetic_noise: float = option(0.3, float)
    synthetic_indicator_mass: float = option(0.1, float)
    synthetic_seed: int = option(0, int)
    unbalance_class: int = option(1, int, "class whose documents are removed")
    remove_fractions: list = option([0.0], parse_list(float))
    feature_source: str = option("info_gain", str, "info_gain, lda or file")
    feature_file: str | None = option(None, parse_optional(str))
    pool_size: int = option(20, int, "pool entries per class (info_gain) or per topic (lda)")
    feature_counts: list = option([(10, 10)], parse_list(parse_counts), "per-class labeled counts, e.g. 10:1, 10:10")
    methods: list = option(list(METHODS), _methods)
    betas: list = option([5.0], parse_list(float), "lambda = beta * |K|")
    references: list = option([None], parse_list(parse_ratio),
                              "reference class distributions for kl_divergence; 'train' = training-fold labels")
    neutral_count: int = option(10, int)
    sigma: float = option(1.0, float)
    folds: int = option(10, int)
    repetitions: int = option(10, int)
    seed: int = option(0, int)
    lda_topics: int | None = option(None, parse_optional(int), "default: number of classes")
    lda_iterations: int = option(500, int)
    lda_alpha: float | None = option(None, parse_optional(float), "default: 50 / topics")
    lda_eta: float = option(0.01, float)
    max_iterations: int = option(300, int)
    memory: int = option(10, int)
    gradient_tolerance: float = option(1e-5, float)
    missing: str = option("warn", str, "labeled features absent from a training fold: warn or error")
    sweep_axis: str = option("t", str, "x axis of sweep files: t, beta, remove_fraction or reference")
    gnuplot: bool = option(False, parse_bool, "also write a gnuplot script")

    def __post_init__(self):
        if self.feature_source not in ("info_gain", "lda", "file"):
            raise InputError(f"unknown feature_source {self.feature_source!r}")
        if self.feature_source == "file" and not self.feature_file:
            raise InputError("feature_source = file needs feature_file")
        if self.folds < 2 or self.repetitions < 1:
            raise InputError("need folds >= 2 and repetitions >= 1")
        if self.sweep_axis not in ("t", "beta", "remove_fraction", "reference"):
            raise InputError(f"unknown sweep_axis {self.sweep_axis!r}")
        if self.missing not in ("warn", "error"):
            raise InputError("missing must be 'warn' or 'error'")
        self.methods = [canonical_method(m) for m in self.methods]
        for counts in self.feature_counts:
            if self.feature_source != "file" and any(c > self.pool_size for c in counts):
                raise InputError(f"feature counts {counts} exceed pool size {self.pool_size}")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "ExperimentSpec":
        values = read_flat(path)
        values.update(overrides)
        return build(cls, values)

    def settings(self) -> list["Setting"]:
        return [Setting(rf, fc, beta, ref)
                for rf in self.remove_fractions
                for fc in self.feature_counts
                for beta in self.betas
                for ref in self.references]

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(memory=self.memory, max_iterations=self.max_iterations,
                               gradient_tolerance=self.gradient_tolerance)


@dataclass(frozen=True)
class Setting:
    remove_fraction: float
    feature_counts: tuple[int, ...]
    beta: float
    reference: tuple[float, ...] | None

    @property
    def label(self) -> str:
        ref = "train" if self.reference is None else ":".join(f"{p:.6g}" for p in self.reference)
        counts = ":".join(str(c) for c in self.feature_counts)
        return f"rf={self.remove_fraction:g} fc={counts} beta={self.beta:g} ref={ref}"

    def axis(self, name: str):
        if name == "t":
            return self.feature_counts[0] if self.feature_counts else 0
        if name == "beta":
            return self.beta
        if name == "remove_fraction":
            return self.remove_fraction
        return "train" if self.reference is None else ":".join(f"{p:.6g}" for p in self.reference)


@dataclass
class FoldResult:
    fold: int
    accuracy: float
    marginal_kl: float
    iterations: int
    termination: str
    n_labeled: int


@dataclass
class ResultRow:
    setting: Setting
    method: str
    repetition: int
    seed: int
    folds: list[FoldResult]

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([f.accuracy for f in self.folds])

    @property
    def mean(self) -> float:
        return float(np.nanmean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.nanstd(self.accuracies))


@dataclass
class ResultTable:
    experiment: str
    rows: list[ResultRow] = field(default_factory=list)

    def select(self, method: str | None = None, **setting) -> list[ResultRow]:
        method = canonical_method(method) if method else None
        out = []
        for row in self.rows:
            if method is not None and row.method != method:
                continue
            if any(getattr(row.setting, k) != v for k, v in setting.items()):
                continue
            out.append(row)
        return out

    def mean_accuracy(self, method: str, **setting) -> float:
        """Mean over folds and repetitions for one method and setting."""
        rows = self.select(method, **setting)
        if not rows:
            raise KeyError(f"no rows for {method} {setting}")
        return float(np.nanmean(np.concatenate([r.accuracies for r in rows])))

    def mean_marginal_kl(self, method: str, **setting) -> float:
        rows = self.select(method, **setting)
        return float(np.nanmean([f.marginal_kl for r in rows for f in r.folds]))


def load_corpus(spec: ExperimentSpec) -> Corpus:
    if spec.corpus == "synthetic":
        return synthesize_corpus(spec.synthetic_docs, spec.synthetic_vocab, spec.synthetic_indicators,
                                 spec.synthetic_doc_length, spec.synthetic_noise, spec.synthetic_seed,
                                 spec.synthetic_classes, spec.synthetic_indicator_mass)
    path = Path(spec.corpus)
    if path.is_file():
        with path.open(encoding="utf-8") as fh:
            first = fh.readline().rstrip("\n")
        if first == CORPUS_MAGIC:
            return read_corpus(path)
    return ingest(path, load_stopwords(spec.stopwords), spec.min_count)


def _feature_pool(spec: ExperimentSpec, train_corpus: Corpus, seed: int) -> FeaturePool:
    if spec.feature_source == "info_gain":
        return info_gain_pool(train_corpus, spec.pool_size)
    topics = spec.lda_topics or train_corpus.n_classes
    model = lda.fit(train_corpus, topics, spec.lda_iterations, spec.lda_alpha, spec.lda_eta, seed)
    return lda.lda_feature_pool(model, train_corpus, spec.pool_size)


def _available_counts(spec: ExperimentSpec, pool: FeaturePool, counts: tuple[int, ...]) -> tuple[int, ...]:
    """LDA pools are lopsided by nature, so their draws take what each class offers."""
    if spec.feature_source != "lda":
        return counts
    clipped = tuple(min(c, pool.size(k)) for k, c in enumerate(counts))
    if clipped != counts:
        log.warning("LDA pool too small for counts %s; drawing %s", counts, clipped)
    return clipped


def run(spec: ExperimentSpec, corpus: Corpus | None = None) -> ResultTable:
    """Execute every (repetition, setting, method, fold) cell of ``spec``."""
    if corpus is None:
        corpus = load_corpus(spec)
    table = ResultTable(spec.name)
    settings = spec.settings()
    optimizer = spec.optimizer()
    fixed_features = None
    if spec.feature_source == "file":
        fixed_features = read_labeled_features(spec.feature_file, corpus, spec.missing)
    results: dict[tuple, list[FoldResult]] = {}
    for rep in range(spec.repetitions):
        rep_seed = derive_seed(spec.seed, rep)
        for rf in dict.fromkeys(s.remove_fraction for s in settings):
            data = unbalance(corpus, spec.unbalance_class, rf, derive_seed(rep_seed, 1)) if rf > 0 else corpus
            folds = cv_folds(data, spec.folds, derive_seed(rep_seed, 2))
            for fold_id, (train_fold, test_fold) in enumerate(folds):
                pool = None
                if fixed_features is None:
                    pool = _feature_pool(spec, train_fold, derive_seed(rep_seed, 3, fold_id))
                neutral = neutral_features(train_fold, min(spec.neutral_count, train_fold.n_features))
                true_ref = tuple(train_fold.label_distribution())
                cache: dict[tuple, FoldResult] = {}
                for setting in (s for s in settings if s.remove_fraction == rf):
                    if fixed_features is not None:
                        labeled = fixed_features
                    else:
                        counts = _available_counts(spec, pool, setting.feature_counts)
                        labeled = draw_labeled(pool, counts, derive_seed(rep_seed, 4, fold_id))
                    ref = setting.reference if setting.reference is not None else true_ref
                    for method in spec.methods:
                        # methods that ignore beta / the reference share one fit across settings
                        key = (setting.feature_counts, method,
                               setting.beta if method in ("max_entropy", "kl_divergence") else None,
                               ref if method == "kl_divergence" else None)
                        if key not in cache:
                            cache[key] = _fit_cell(train_fold, test_fold, labeled, neutral, method,
                                                   setting.beta, ref, spec, optimizer, fold_id)
                        results.setdefault((setting, method, rep), []).append(cache[key])
        for setting in settings:
            for method in spec.methods:
                table.rows.append(ResultRow(setting, method, rep, rep_seed, results[(setting, method, rep)]))
    return table


def _fit_cell(train_fold, test_fold, labeled, neutral, method, beta, ref, spec, optimizer, fold_id) -> FoldResult:
    config = RegularizationConfig(method, beta, ref if method == "kl_divergence" else None,
                                  neutral if method == "neutral" else None)
    try:
        result = train(train_fold, labeled, config, spec.sigma, optimizer, spec.missing)
    except NumericalError as exc:
        log.warning("fold %d, %s: training diverged (%s)", fold_id, method, exc)
        return FoldResult(fold_id, math.nan, math.nan, 0, "numerical_failure", len(labeled))
    except InputError as exc:
        log.warning("fold %d, %s: %s", fold_id, method, exc)
        return FoldResult(fold_id, math.nan, math.nan, 0, "no_knowledge", len(labeled))
    marginal = result.objective.class_marginal(result.params.theta)
    return FoldResult(fold_id, accuracy(result.params, test_fold), kl(ref, marginal), result.trace.iterations,
                      result.trace.reason, len(result.objective.labeled))


def _provenance_lines(spec: ExperimentSpec) -> list[str]:
    return [f"# {k} = {v}" for k, v in to_flat(spec).items()]


def results_csv(table: ResultTable, spec: ExperimentSpec | None = None) -> str:
    buf = io.StringIO()
    if spec is not None:
        buf.write("\n".join(_provenance_lines(spec)) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["experiment", "setting", "method", "fold", "seed", "accuracy"])
    for row in table.rows:
        for f in row.folds:
            writer.writerow([table.experiment, row.setting.label, METHOD_LABELS[row.method], f.fold, row.seed,
                             repr(f.accuracy)])
    return buf.getvalue()


def summary_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["experiment", "setting", "method", "mean", "std", "n"])
    groups: dict[tuple, list[float]] = {}
    for row in table.rows:
        groups.setdefault((row.setting.label, row.method), []).extend(row.accuracies.tolist())
    for (label, method), accs in groups.items():
        arr = np.array(accs)
        writer.writerow([table.experiment, label, METHOD_LABELS[method], repr(float(np.nanmean(arr))),
                         repr(float(np.nanstd(arr))), int(np.sum(~np.isnan(arr)))])
    return buf.getvalue()


def diagnostics_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["experiment", "setting", "method", "repetition", "fold", "n_labeled", "iterations",
                     "termination", "marginal_kl"])
    for row in table.rows:
        for f in row.folds:
            writer.writerow([table.experiment, row.setting.label, METHOD_LABELS[row.method], row.repetition,
                             f.fold, f.n_labeled, f.iterations, f.termination, repr(f.marginal_kl)])
    return buf.getvalue()


def sweep_tables(table: ResultTable, spec: ExperimentSpec) -> list[tuple[str, str]]:
    """One plot-ready CSV per group of non-axis settings: ``(group label, csv text)``."""
    axis = spec.sweep_axis
    groups: dict[str, dict] = {}
    for row in table.rows:
        s = row.setting
        rest = {"t": (s.remove_fraction, s.feature_counts[1:], s.beta, s.reference),
                "beta": (s.remove_fraction, s.feature_counts, s.reference),
                "remove_fraction": (s.feature_counts, s.beta, s.reference),
                "reference": (s.remove_fraction, s.feature_counts, s.beta)}[axis]
        label = " ".join(format_value(v) if not isinstance(v, tuple) else ":".join(map(str, v)) for v in rest)
        cells = groups.setdefault(label, {})
        cells.setdefault(s.axis(axis), {}).setdefault(row.method, []).extend(row.accuracies.tolist())
    out = []
    for label, cells in groups.items():
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([axis] + [METHOD_LABELS[m] for m in spec.methods])
        for x, per_method in cells.items():
            writer.writerow([x] + [repr(float(np.nanmean(per_method[m]))) for m in spec.methods])
        out.append((label, buf.getvalue()))
    return out


def gnuplot_script(spec: ExperimentSpec, sweep_files: list[str]) -> str:
    lines = ["set datafile separator ','", "set key autotitle columnhead", "set ylabel 'accuracy'",
             f"set xlabel '{spec.sweep_axis}'", "set terminal pngcairo size 800,500"]
    for path in sweep_files:
        stem = Path(path).stem
        lines.append(f"set output '{stem}.png'")
        plots = [f"'{Path(path).name}' using 1:{i + 2} with linespoints" for i in range(len(spec.methods))]
        lines.append("plot " + ", ".join(plots))
    return "\n".join(lines) + "\n"


def write_results(table: ResultTable, spec: ExperimentSpec, out_dir: str | Path) -> list[Path]:
    """Write ``<name>.csv``, ``<name>_summary.csv``, diagnostics and sweep files; return their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = "\n".join(_provenance_lines(spec)) + "\n"
    written = []

    def emit(name: str, text: str):
        path = out_dir / name
        path.write_text(header + text, encoding="utf-8")
        written.append(path)
        return path

    emit(f"{spec.name}.csv", results_csv(table))
    emit(f"{spec.name}_summary.csv", summary_csv(table))
    emit(f"{spec.name}_diagnostics.csv", diagnostics_csv(table))
    sweeps = sweep_tables(table, spec)
    sweep_paths = []
    for i, (label, text) in enumerate(sweeps):
        name = f"{spec.name}_sweep.csv" if len(sweeps) == 1 else f"{spec.name}_sweep_{i}.csv"
        sweep_paths.append(str(emit(name, f"# group = {label}\n" + text)))
    if spec.gnuplot:
        emit(f"{spec.name}.gp", gnuplot_script(spec, sweep_paths))
    return written
