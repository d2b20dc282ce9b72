"""Feature-space comparison, permutation importance, and token masking.

Three post-hoc lenses over a fitted pipeline and its feature tables: the
Mantel permutation test between pairwise-distance structures, per-column
permutation importance, and single-token masking that re-runs the whole
featurize-and-predict path to attribute urgency shifts to words.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .corpus import CoarseLabel, Corpus, Post, make_post
from .errors import ConfigError, DataError
from .evaluation import COARSE_ORDER, macro_f1
from .featurize import Extractor, FeatureTable, build_feature_table
from .ioutil import write_text_atomic
from .model import FittedPipeline, predict_coarse
from .seeds import derive_seed, rng_for
from .textutil import replace_span, tokenize_with_spans

DEFAULT_UNK_TOKEN = "unkunkunk"


# --- pairwise distances ----------------------------------------------------------


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DataError(f"distance matrix must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("distance matrix contains non-finite values")
        if np.any(np.diag(v) != 0.0):
            raise DataError("distance matrix diagonal must be zero")
        if np.any(v < 0.0):
            raise DataError("distance matrix must be non-negative")
        if np.max(np.abs(v - v.T)) > 1e-9:
            raise DataError("distance matrix must be symmetric within 1e-9")
        object.__setattr__(self, "values", v)
        v.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def pairwise_euclidean(table: FeatureTable) -> DistanceMatrix:
    """All-pairs Euclidean distances between rows of the feature table."""
    matrix = np.asarray(table.values, dtype=np.float64)
    n = matrix.shape[0]
    out = np.zeros((n, n), dtype=np.float64)
    cells = max(1, n * max(1, matrix.shape[1]))
    chunk = max(1, int(4_000_000 // cells))
    for start in range(0, n, chunk):
        block = matrix[start : start + chunk]
        diffs = block[:, None, :] - matrix[None, :, :]
        out[start : start + chunk] = np.sqrt((diffs * diffs).sum(axis=2))
    return DistanceMatrix(values=out)


# --- Mantel test -----------------------------------------------------------------


@dataclass(frozen=True)
class MantelResult:
    r: float
    p: float
    n_permutations: int
    exhaustive: bool = False


def _upper(values: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(values.shape[0], k=1)
    return values[iu]


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    sa = a - a.mean()
    sb = b - b.mean()
    var_a = float(np.dot(sa, sa))
    var_b = float(np.dot(sb, sb))
    if var_a == 0.0 or var_b == 0.0:
        raise DataError(
            "correlation undefined: constant distances in the upper triangle"
        )
    r = float(np.dot(sa, sb)) / math.sqrt(var_a * var_b)
    return min(1.0, max(-1.0, r))


def mantel(
    d1: DistanceMatrix, d2: DistanceMatrix, n_perm: int = 999, seed: int = 0
) -> MantelResult:
    """Pearson correlation of strict upper triangles with a permutation test.

    Each trial applies one simultaneous row/column permutation to the second
    matrix; the two-sided p-value is (#{|r_perm| >= |r_obs|} + 1)/(n_perm + 1).
    When every permutation fits in the trial budget (n! <= n_perm + 1) the
    test enumerates all of them instead, making p exact with no smoothing.
    """
    if d1.n != d2.n:
        raise DataError(f"distance matrices disagree on n: {d1.n} vs {d2.n}")
    n = d1.n
    if n < 3:
        raise DataError(f"Mantel test needs n >= 3 points, got {n}")
    if n_perm < 1:
        raise ConfigError(f"n_perm must be >= 1, got {n_perm}")
    a = _upper(d1.values)
    r_obs = _pearson(a, _upper(d2.values))

    if math.factorial(n) <= n_perm + 1:
        total = 0
        hits = 0
        for perm in itertools.permutations(range(n)):
            order = np.array(perm)
            r_perm = _pearson(a, _upper(d2.values[np.ix_(order, order)]))
            total += 1
            if abs(r_perm) >= abs(r_obs):
                hits += 1
        return MantelResult(r=r_obs, p=hits / total, n_permutations=total, exhaustive=True)

    hits = 0
    for trial in range(n_perm):
        order = rng_for(seed, "mantel_trial", trial).permutation(n)
        r_perm = _pearson(a, _upper(d2.values[np.ix_(order, order)]))
        if abs(r_perm) >= abs(r_obs):
            hits += 1
    return MantelResult(
        r=r_obs, p=(hits + 1) / (n_perm + 1), n_permutations=n_perm, exhaustive=False
    )


def mantel_grid(
    named: Sequence[tuple[str, DistanceMatrix]], n_perm: int = 999, seed: int = 0
) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    """Pairwise Mantel r and p matrices over named distance structures."""
    names = tuple(name for name, _ in named)
    if len(set(names)) != len(names):
        raise ConfigError("feature-set names must be unique")
    k = len(named)
    r_grid = np.eye(k, dtype=np.float64)
    p_grid = np.zeros((k, k), dtype=np.float64)
    for i in range(k):
        for j in range(i + 1, k):
            pair_seed = derive_seed(seed, f"mantel:{names[i]}|{names[j]}")
            result = mantel(named[i][1], named[j][1], n_perm=n_perm, seed=pair_seed)
            r_grid[i, j] = r_grid[j, i] = result.r
            p_grid[i, j] = p_grid[j, i] = result.p
    return names, r_grid, p_grid


def save_named_matrix(names: Sequence[str], matrix: np.ndarray, path: str) -> None:
    """Symmetric TSV: header row of names, one labeled row per feature set."""
    lines = ["\t" + "\t".join(names)]
    for name, row in zip(names, np.asarray(matrix)):
        lines.append(name + "\t" + "\t".join(repr(float(v)) for v in row))
    write_text_atomic(path, "\n".join(lines) + "\n")


# --- permutation importance ---------------------------------------------------------


@dataclass(frozen=True)
class ImportanceEntry:
    column: str
    mean_drop: float
    std_drop: float
    n_repeats: int


@dataclass(frozen=True)
class ImportanceReport:
    base_score: float
    entries: tuple[ImportanceEntry, ...]


def _default_metric(y_true: Sequence[CoarseLabel], y_pred: Sequence[CoarseLabel]) -> float:
    return macro_f1(y_true, y_pred, COARSE_ORDER[1:])


def permutation_importance(
    fp: FittedPipeline,
    table: FeatureTable,
    y_coarse: Sequence[CoarseLabel],
    metric: Callable[[Sequence[CoarseLabel], Sequence[CoarseLabel]], float] = _default_metric,
    n_repeats: int = 10,
    seed: int = 0,
) -> ImportanceReport:
    """Mean metric drop when one column is shuffled within the evaluation set.

    The model is never refit. Shuffles are drawn from independent streams
    per (seed, column, repeat), so results are schedule-independent. A
    column whose shuffle leaves the transformed features unchanged (constant
    values, or never selected by the pipeline) drops exactly 0.
    """
    if n_repeats < 1:
        raise ConfigError(f"n_repeats must be >= 1, got {n_repeats}")
    if len(y_coarse) != table.n_rows:
        raise DataError(f"{table.n_rows} rows but {len(y_coarse)} labels")
    truth = list(y_coarse)
    base_score = metric(truth, predict_coarse(fp, table))
    matrix = np.asarray(table.values, dtype=np.float64)
    n = matrix.shape[0]
    entries = []
    for j, column in enumerate(table.columns):
        drops = []
        for repeat in range(n_repeats):
            rng = rng_for(seed, f"importance:{j}", repeat)
            shuffled = matrix.copy()
            shuffled[:, j] = matrix[rng.permutation(n), j]
            perturbed = FeatureTable(
                row_ids=table.row_ids,
                columns=table.columns,
                values=shuffled,
                degenerate_ids=table.degenerate_ids,
            )
            drops.append(base_score - metric(truth, predict_coarse(fp, perturbed)))
        arr = np.array(drops, dtype=np.float64)
        entries.append(
            ImportanceEntry(
                column=column.name(),
                mean_drop=float(arr.mean()),
                std_drop=float(arr.std()) if n_repeats > 1 else 0.0,
                n_repeats=n_repeats,
            )
        )
    order = sorted(range(len(entries)), key=lambda i: (-entries[i].mean_drop, i))
    return ImportanceReport(
        base_score=base_score, entries=tuple(entries[i] for i in order)
    )


IMPORTANCE_COLUMNS = ("column", "mean_drop", "std_drop", "n_repeats")


def save_importance_report(report: ImportanceReport, path: str) -> None:
    lines = [f"# base_score={report.base_score!r}", "\t".join(IMPORTANCE_COLUMNS)]
    for e in report.entries:
        lines.append(
            f"{e.column}\t{e.mean_drop!r}\t{e.std_drop!r}\t{e.n_repeats}"
        )
    write_text_atomic(path, "\n".join(lines) + "\n")


def load_importance_report(path: str) -> ImportanceReport:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# base_score="):
        raise DataError(f"{path}: not an importance report")
    base_score = float(lines[0].split("=", 1)[1])
    if len(lines) < 2 or tuple(lines[1].split("\t")) != IMPORTANCE_COLUMNS:
        raise DataError(f"{path}: bad importance header")
    entries = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"{path}:{lineno}: expected 4 columns")
        entries.append(
            ImportanceEntry(
                column=parts[0],
                mean_drop=float(parts[1]),
                std_drop=float(parts[2]),
                n_repeats=int(parts[3]),
            )
        )
    return ImportanceReport(base_score=base_score, entries=tuple(entries))


# --- token masking -------------------------------------------------------------------


@dataclass(frozen=True)
class TokenAttribution:
    index: int
    token: str
    original: CoarseLabel
    masked: CoarseLabel
    shift: int


def shift_to_color(shift: int) -> Optional[str]:
    """Report color for a masked-token shift.

    Masking a word and getting a less severe prediction means the word was
    pushing severity up: one level is "yellow", two or more is "red".
    A more severe prediction means the word was protective: "green".
    """
    if shift <= -2:
        return "red"
    if shift == -1:
        return "yellow"
    if shift >= 1:
        return "green"
    return None


def mask_explain(
    fp: FittedPipeline,
    post: Post,
    extractors: Sequence[Extractor],
    unk_token: str = DEFAULT_UNK_TOKEN,
) -> list[TokenAttribution]:
    """Re-predict the post with each token masked by an out-of-vocabulary word.

    Every variant rebuilds the text, re-splits sentences, re-featurizes with
    the given extractors, and re-predicts; the attribution records how the
    coarse prediction moved relative to the unmasked post.
    """
    spans = tokenize_with_spans(post.body_clean)
    if not spans:
        raise DataError(f"post {post.id!r} has no tokens to mask")
    variants = [make_post(post.id, post.body_clean, post.thread_id)]
    for t, span in enumerate(spans):
        masked_body = replace_span(post.body_clean, span, unk_token)
        variants.append(make_post(f"{post.id}#mask{t:04d}", masked_body, post.thread_id))
    corpus = Corpus(posts=tuple(variants))
    table = build_feature_table(corpus, extractors, post_ids=[p.id for p in variants])
    predictions = predict_coarse(fp, table)
    original = predictions[0]
    return [
        TokenAttribution(
            index=t,
            token=span.text,
            original=original,
            masked=masked,
            shift=int(masked) - int(original),
        )
        for t, (span, masked) in enumerate(zip(spans, predictions[1:]))
    ]


ATTRIBUTION_COLUMNS = ("token_index", "token", "original", "masked", "shift")


def save_attributions(attributions: Sequence[TokenAttribution], path: str) -> None:
    lines = ["\t".join(ATTRIBUTION_COLUMNS)]
    for a in attributions:
        lines.append(
            f"{a.index}\t{a.token}\t{a.original.tag}\t{a.masked.tag}\t{a.shift}"
        )
    write_text_atomic(path, "\n".join(lines) + "\n")


def load_attributions(path: str) -> list[TokenAttribution]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or tuple(lines[0].split("\t")) != ATTRIBUTION_COLUMNS:
        raise DataError(f"{path}: not a token attribution file")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise DataError(f"{path}:{lineno}: expected 5 columns")
        out.append(
            TokenAttribution(
                index=int(parts[0]),
                token=parts[1],
                original=CoarseLabel.from_name(parts[2]),
                masked=CoarseLabel.from_name(parts[3]),
                shift=int(parts[4]),
            )
        )
    return out
