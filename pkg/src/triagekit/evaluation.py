"""Metrics, stratified cross-validation, held-out scoring, chance baseline.

The headline metric is macro-averaged F1 over the urgency classes, reported
both over all four classes and with the lowest-urgency class excluded. The
chance baseline scores label shuffles and fixes a better-than-chance
threshold at a Bonferroni-corrected rank-order statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .corpus import CoarseLabel, LabelMap, map_label
from .errors import ConfigError, DataError
from .featurize import FeatureTable
from .model import FittedPipeline, PipelineSpec, fit, predict_coarse
from .seeds import rng_for

METRICS_FORMAT = "triagekit-metrics/1"
BASELINE_FORMAT = "triagekit-baseline/1"

COARSE_ORDER: tuple[CoarseLabel, ...] = (
    CoarseLabel.GREEN,
    CoarseLabel.AMBER,
    CoarseLabel.RED,
    CoarseLabel.CRISIS,
)


# --- macro F1 -----------------------------------------------------------------


def _f1_parts(
    y_true: Sequence[Hashable], y_pred: Sequence[Hashable], cls: Hashable
) -> tuple[float, float, float]:
    tp = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p == cls)
    fp = sum(1 for t, p in zip(y_true, y_pred) if t != cls and p == cls)
    fn = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p != cls)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
    return precision, recall, f1


def macro_f1(
    y_true: Sequence[Hashable],
    y_pred: Sequence[Hashable],
    included_classes: Sequence[Hashable],
) -> float:
    """Unweighted mean of per-class F1 over included_classes.

    A class with no true and no predicted members contributes F1 = 0, so the
    value is defined for every input.
    """
    if len(y_true) != len(y_pred):
        raise DataError(f"{len(y_true)} true labels but {len(y_pred)} predictions")
    classes = list(dict.fromkeys(included_classes))
    if not classes:
        raise ConfigError("included_classes must not be empty")
    return sum(_f1_parts(y_true, y_pred, cls)[2] for cls in classes) / len(classes)


# --- metric report ------------------------------------------------------------


@dataclass(frozen=True)
class MetricReport:
    """Per-class precision/recall/F1, confusion counts, and both macro scores.

    Rows of the confusion matrix are true classes, columns predicted classes,
    both in coarse ordinal order.
    """

    n: int
    precision: Mapping[str, float]
    recall: Mapping[str, float]
    f1: Mapping[str, float]
    support: Mapping[str, int]
    confusion: tuple[tuple[int, ...], ...]
    macro_f1_all: float
    macro_f1_excl_green: float


def metric_report(
    y_true: Sequence[CoarseLabel], y_pred: Sequence[CoarseLabel]
) -> MetricReport:
    if len(y_true) != len(y_pred):
        raise DataError(f"{len(y_true)} true labels but {len(y_pred)} predictions")
    if not y_true:
        raise DataError("cannot build a metric report from zero posts")
    precision, recall, f1, support = {}, {}, {}, {}
    for cls in COARSE_ORDER:
        p, r, f = _f1_parts(y_true, y_pred, cls)
        precision[cls.tag] = p
        recall[cls.tag] = r
        f1[cls.tag] = f
        support[cls.tag] = sum(1 for t in y_true if t == cls)
    confusion = tuple(
        tuple(
            sum(1 for t, p in zip(y_true, y_pred) if t == row and p == col)
            for col in COARSE_ORDER
        )
        for row in COARSE_ORDER
    )
    return MetricReport(
        n=len(y_true),
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        confusion=confusion,
        macro_f1_all=macro_f1(y_true, y_pred, COARSE_ORDER),
        macro_f1_excl_green=macro_f1(y_true, y_pred, COARSE_ORDER[1:]),
    )


def format_metric_report(report: MetricReport) -> str:
    """Key-value text with nested per-class blocks and the confusion matrix."""
    lines = [
        f"format = {METRICS_FORMAT}",
        f"n = {report.n}",
        f"macro_f1_all = {report.macro_f1_all!r}",
        f"macro_f1_excl_green = {report.macro_f1_excl_green!r}",
    ]
    for cls in COARSE_ORDER:
        tag = cls.tag
        lines.append(f"[class {tag}]")
        lines.append(f"precision = {report.precision[tag]!r}")
        lines.append(f"recall = {report.recall[tag]!r}")
        lines.append(f"f1 = {report.f1[tag]!r}")
        lines.append(f"support = {report.support[tag]}")
    lines.append("[confusion]")
    for cls, row in zip(COARSE_ORDER, report.confusion):
        lines.append(f"{cls.tag} = " + " ".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_metric_report(text: str) -> MetricReport:
    sections = _parse_key_value_blocks(text, METRICS_FORMAT)
    top = sections[""]
    try:
        precision, recall, f1, support = {}, {}, {}, {}
        for cls in COARSE_ORDER:
            block = sections[f"class {cls.tag}"]
            precision[cls.tag] = float(block["precision"])
            recall[cls.tag] = float(block["recall"])
            f1[cls.tag] = float(block["f1"])
            support[cls.tag] = int(block["support"])
        confusion = tuple(
            tuple(int(v) for v in sections["confusion"][cls.tag].split())
            for cls in COARSE_ORDER
        )
        return MetricReport(
            n=int(top["n"]),
            precision=precision,
            recall=recall,
            f1=f1,
            support=support,
            confusion=confusion,
            macro_f1_all=float(top["macro_f1_all"]),
            macro_f1_excl_green=float(top["macro_f1_excl_green"]),
        )
    except KeyError as exc:
        raise DataError(f"metric report is missing {exc}") from None


def _parse_key_value_blocks(text: str, expected_format: str) -> dict[str, dict[str, str]]:
    sections: dict[str, dict[str, str]] = {"": {}}
    current = sections[""]
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            current = sections.setdefault(name, {})
            continue
        if " = " not in line:
            raise DataError(f"bad report line {raw!r}")
        key, value = line.split(" = ", 1)
        current[key.strip()] = value.strip()
    declared = sections[""].get("format")
    if declared != expected_format:
        raise DataError(f"report format {declared!r} is not {expected_format!r}")
    return sections


# --- cross-validation ----------------------------------------------------------


@dataclass(frozen=True)
class CVPlan:
    folds: int = 10
    repeats: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ConfigError(f"cross-validation needs folds >= 2, got {self.folds}")
        if self.repeats < 1:
            raise ConfigError(f"cross-validation needs repeats >= 1, got {self.repeats}")


FoldAssignments = tuple[tuple[tuple[int, ...], ...], ...]


def stratified_repeated_cv(plan: CVPlan, y: Sequence[Hashable]) -> FoldAssignments:
    """Fold index sets per repeat; each class spread within ±1 across folds.

    Every repeat is an independent stratified shuffle on its own seed stream,
    so assignments are deterministic in (plan.seed, repeat index).
    """
    n = len(y)
    by_class: dict[Hashable, list[int]] = {}
    for i, label in enumerate(y):
        by_class.setdefault(label, []).append(i)
    for label, members in sorted(by_class.items(), key=lambda kv: repr(kv[0])):
        if len(members) < plan.folds:
            raise DataError(
                f"class {label!r} has {len(members)} rows, fewer than {plan.folds} folds"
            )
    repeats = []
    for r in range(plan.repeats):
        rng = rng_for(plan.seed, "cv_repeat", r)
        folds: list[list[int]] = [[] for _ in range(plan.folds)]
        for label, members in sorted(by_class.items(), key=lambda kv: repr(kv[0])):
            order = rng.permutation(len(members))
            start = int(rng.integers(plan.folds))
            for j, pos in enumerate(order):
                folds[(start + j) % plan.folds].append(members[pos])
        repeats.append(tuple(tuple(sorted(fold)) for fold in folds))
        assert sum(len(f) for f in repeats[-1]) == n
    return tuple(repeats)


def iter_cv_splits(
    assignments: FoldAssignments,
) -> Iterator[tuple[int, int, tuple[int, ...], tuple[int, ...]]]:
    """Yield (repeat, fold, train_indices, test_indices) per held-out fold."""
    for r, folds in enumerate(assignments):
        all_rows = sorted(i for fold in folds for i in fold)
        for f, test in enumerate(folds):
            test_set = set(test)
            train = tuple(i for i in all_rows if i not in test_set)
            yield r, f, train, test


@dataclass(frozen=True)
class FoldScore:
    repeat: int
    fold: int
    macro_f1_all: float
    macro_f1_excl_green: float
    n_test: int


@dataclass(frozen=True)
class CVResult:
    plan: CVPlan
    fold_scores: tuple[FoldScore, ...]
    mean_macro_f1_all: float
    mean_macro_f1_excl_green: float


def cross_validate(
    spec: PipelineSpec,
    table: FeatureTable,
    y: Sequence[str],
    label_map: LabelMap,
    plan: CVPlan,
) -> CVResult:
    """Stratified repeated CV of a pipeline spec; unweighted mean over folds."""
    if len(y) != table.n_rows:
        raise DataError(f"{table.n_rows} rows but {len(y)} labels")
    assignments = stratified_repeated_cv(plan, y)
    coarse_true = [map_label(label, label_map) for label in y]
    scores = []
    for r, f, train_idx, test_idx in iter_cv_splits(assignments):
        train_table = _subset(table, train_idx)
        test_table = _subset(table, test_idx)
        fitted = fit(spec, train_table, [y[i] for i in train_idx], label_map, seed=plan.seed)
        got = predict_coarse(fitted, test_table)
        truth = [coarse_true[i] for i in test_idx]
        scores.append(
            FoldScore(
                repeat=r,
                fold=f,
                macro_f1_all=macro_f1(truth, got, COARSE_ORDER),
                macro_f1_excl_green=macro_f1(truth, got, COARSE_ORDER[1:]),
                n_test=len(test_idx),
            )
        )
    return CVResult(
        plan=plan,
        fold_scores=tuple(scores),
        mean_macro_f1_all=sum(s.macro_f1_all for s in scores) / len(scores),
        mean_macro_f1_excl_green=sum(s.macro_f1_excl_green for s in scores) / len(scores),
    )


def _subset(table: FeatureTable, rows: Sequence[int]) -> FeatureTable:
    return table.subset_rows([table.row_ids[i] for i in rows])


# --- chance baseline -----------------------------------------------------------


@dataclass(frozen=True)
class BaselineReport:
    n: int
    n_shuffles: int
    alpha: float
    n_tests: int
    threshold_rank: int
    mean_macro_f1: float
    threshold: float
    scores: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


def random_baseline(
    y_true: Sequence[Hashable],
    n_shuffles: int = 10000,
    alpha: float = 0.05,
    n_tests: int = 8,
    seed: int = 0,
) -> BaselineReport:
    """Score shuffles of the labels against themselves.

    Each trial permutes the labels on its own seed stream and records the
    all-class macro F1. The better-than-chance threshold is the r-th largest
    trial value, r = floor(alpha / n_tests * n_shuffles) — the Bonferroni
    rank for n_tests comparisons.
    """
    labels = list(y_true)
    if not labels:
        raise DataError("cannot compute a baseline over zero labels")
    rank = math.floor(alpha / n_tests * n_shuffles)
    if rank < 1:
        raise ConfigError(
            f"rank floor(alpha/n_tests*n_shuffles) = {rank}; need at least 1"
        )
    if rank > n_shuffles:
        raise ConfigError(f"rank {rank} exceeds n_shuffles {n_shuffles}")

    classes = list(dict.fromkeys(labels))
    code_of = {cls: i for i, cls in enumerate(classes)}
    codes = np.array([code_of[label] for label in labels], dtype=np.int64)
    k = len(classes)
    n = len(labels)
    class_counts = np.bincount(codes, minlength=k).astype(np.float64)

    scores = np.zeros(n_shuffles, dtype=np.float64)
    for trial in range(n_shuffles):
        rng = rng_for(seed, "baseline_trial", trial)
        shuffled = codes[rng.permutation(n)]
        joint = np.bincount(codes * k + shuffled, minlength=k * k).reshape(k, k)
        tp = np.diag(joint).astype(np.float64)
        predicted = joint.sum(axis=0).astype(np.float64)
        denom = class_counts + predicted  # == 2tp + fp + fn per class
        f1 = np.divide(2 * tp, denom, out=np.zeros(k), where=denom > 0)
        scores[trial] = f1.mean()

    ordered = np.sort(scores)[::-1]
    return BaselineReport(
        n=n,
        n_shuffles=n_shuffles,
        alpha=alpha,
        n_tests=n_tests,
        threshold_rank=rank,
        mean_macro_f1=float(scores.mean()),
        threshold=float(ordered[rank - 1]),
        scores=scores,
    )


def format_baseline_report(report: BaselineReport) -> str:
    lines = [
        f"format = {BASELINE_FORMAT}",
        f"n = {report.n}",
        f"n_shuffles = {report.n_shuffles}",
        f"alpha = {report.alpha!r}",
        f"n_tests = {report.n_tests}",
        f"threshold_rank = {report.threshold_rank}",
        f"mean_macro_f1 = {report.mean_macro_f1!r}",
        f"threshold = {report.threshold!r}",
    ]
    return "\n".join(lines) + "\n"


def parse_baseline_report(text: str) -> BaselineReport:
    sections = _parse_key_value_blocks(text, BASELINE_FORMAT)
    top = sections[""]
    try:
        return BaselineReport(
            n=int(top["n"]),
            n_shuffles=int(top["n_shuffles"]),
            alpha=float(top["alpha"]),
            n_tests=int(top["n_tests"]),
            threshold_rank=int(top["threshold_rank"]),
            mean_macro_f1=float(top["mean_macro_f1"]),
            threshold=float(top["threshold"]),
        )
    except KeyError as exc:
        raise DataError(f"baseline report is missing {exc}") from None


# --- held-out evaluation ---------------------------------------------------------


def evaluate_heldout(
    fp: FittedPipeline, table: FeatureTable, y: Sequence[str]
) -> MetricReport:
    """Score a fitted pipeline on held-out rows labeled with granular tags."""
    if len(y) != table.n_rows:
        raise DataError(f"{table.n_rows} rows but {len(y)} labels")
    truth = [map_label(label, fp.label_map) for label in y]
    got = predict_coarse(fp, table)
    return metric_report(truth, got)
