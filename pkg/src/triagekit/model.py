"""Declarative classifier pipelines: parse, fit, predict, serialize.

A pipeline is a '|'-separated chain of preprocessing components ending in
exactly one classifier, e.g. `select_k_anova(100)|binarize(0.0)|knn(21)`.
Fitting is deterministic in (spec, features, labels, seed); every tie in
selection, voting, and distance ranking has a documented total order.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .corpus import CoarseLabel, LabelMap, map_label
from .errors import (
    ConfigError,
    DataError,
    FeatureMismatchError,
    ModelFormatError,
    UnknownLabelError,
)
from .featurize import ColumnDesc, FeatureTable
from .ioutil import write_text_atomic

MODEL_FORMAT = "triagekit-model/1"

#: selector size used by the reference pipeline when none is given
REFERENCE_K_SELECT = 100

#: parameter names and types per component kind, in positional order
_PARAM_SPECS: Mapping[str, tuple[tuple[str, type], ...]] = {
    "scale": (),
    "binarize": (("threshold", float),),
    "select_k_anova": (("k", int),),
    "knn": (("k", int),),
    "linear_svm": (("c", float), ("epochs", int)),
    "logistic": (("l2", float), ("epochs", int)),
    "majority": (),
}

CLASSIFIER_KINDS = ("knn", "linear_svm", "logistic", "majority")


@dataclass(frozen=True)
class Component:
    kind: str
    args: tuple[Union[int, float], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _PARAM_SPECS:
            raise ConfigError(f"unknown pipeline component {self.kind!r}")
        params = _PARAM_SPECS[self.kind]
        if len(self.args) != len(params):
            raise ConfigError(
                f"{self.kind} takes {len(params)} parameter(s), got {len(self.args)}"
            )
        coerced = []
        for value, (name, typ) in zip(self.args, params):
            if typ is int:
                if isinstance(value, float) and not value.is_integer():
                    raise ConfigError(f"{self.kind} parameter {name} must be an integer")
                coerced.append(int(value))
            else:
                coerced.append(float(value))
        object.__setattr__(self, "args", tuple(coerced))
        if self.kind in ("knn", "select_k_anova") and self.args[0] < 1:
            raise ConfigError(f"{self.kind} parameter k must be >= 1, got {self.args[0]}")
        if self.kind == "linear_svm" and self.args[0] <= 0:
            raise ConfigError(f"linear_svm parameter c must be > 0, got {self.args[0]}")
        if self.kind == "logistic" and self.args[0] < 0:
            raise ConfigError(f"logistic parameter l2 must be >= 0, got {self.args[0]}")
        if self.kind in ("linear_svm", "logistic") and self.args[1] < 1:
            raise ConfigError(f"{self.kind} parameter epochs must be >= 1, got {self.args[1]}")
        if self.kind == "binarize" and not math.isfinite(self.args[0]):
            raise ConfigError("binarize threshold must be finite")

    @property
    def is_classifier(self) -> bool:
        return self.kind in CLASSIFIER_KINDS

    def canonical(self) -> str:
        parts = []
        for value, (_name, typ) in zip(self.args, _PARAM_SPECS[self.kind]):
            parts.append(str(int(value)) if typ is int else repr(float(value)))
        return f"{self.kind}({','.join(parts)})"


@dataclass(frozen=True)
class PipelineSpec:
    """Ordered components; exactly one classifier, in terminal position."""

    components: tuple[Component, ...]

    def __post_init__(self) -> None:
        if not self.components:
            raise ConfigError("pipeline has no components")
        classifiers = [c for c in self.components if c.is_classifier]
        if len(classifiers) != 1 or not self.components[-1].is_classifier:
            raise ConfigError(
                "pipeline must contain exactly one classifier, in terminal position: "
                f"{self.canonical() if classifiers else [c.kind for c in self.components]}"
            )

    def canonical(self) -> str:
        return "|".join(c.canonical() for c in self.components)

    @property
    def n_components(self) -> int:
        return len(self.components)


_COMPONENT_RE = re.compile(r"^([a-z_0-9]+)\((.*)\)$")


def parse_pipeline(text: str) -> PipelineSpec:
    """Parse the canonical text encoding back into a PipelineSpec."""
    components = []
    for chunk in text.strip().split("|"):
        chunk = chunk.strip()
        m = _COMPONENT_RE.match(chunk)
        if not m:
            raise ConfigError(f"bad pipeline component syntax {chunk!r}")
        kind, raw_args = m.group(1), m.group(2)
        if kind not in _PARAM_SPECS:
            raise ConfigError(f"unknown pipeline component {kind!r}")
        args: list[Union[int, float]] = []
        if raw_args.strip():
            for raw, (name, typ) in zip(
                raw_args.split(","), _PARAM_SPECS[kind] + (("extra", float),) * 8
            ):
                raw = raw.strip()
                try:
                    args.append(int(raw) if typ is int else float(raw))
                except ValueError:
                    raise ConfigError(
                        f"bad value {raw!r} for {kind} parameter {name}"
                    ) from None
        components.append(Component(kind, tuple(args)))
    return PipelineSpec(tuple(components))


def reference_pipeline(k_select: int = REFERENCE_K_SELECT) -> PipelineSpec:
    """The benchmark configuration: ANOVA-F top-k, binarize at 0, 21-NN."""
    return parse_pipeline(f"select_k_anova({k_select})|binarize(0.0)|knn(21)")


def majority_pipeline() -> PipelineSpec:
    return parse_pipeline("majority()")


# --- ANOVA F -----------------------------------------------------------------


def anova_f(column: np.ndarray, y: Sequence[object]) -> float:
    """One-way ANOVA F statistic of one feature column against class labels.

    Zero within-class variance with positive between-class variance returns
    +inf (such columns rank first); zero variance overall returns 0.
    """
    x = np.asarray(column, dtype=np.float64)
    labels = list(y)
    if x.shape[0] != len(labels):
        raise DataError(f"column has {x.shape[0]} rows but y has {len(labels)}")
    groups: dict[object, list[int]] = {}
    for i, label in enumerate(labels):
        groups.setdefault(label, []).append(i)
    k = len(groups)
    n = x.shape[0]
    if k < 2:
        raise DataError("ANOVA F needs at least 2 classes")
    grand = x.mean()
    ss_between = 0.0
    ss_within = 0.0
    for rows in groups.values():
        values = x[rows]
        mean_g = values.mean()
        ss_between += len(rows) * (mean_g - grand) ** 2
        ss_within += float(((values - mean_g) ** 2).sum())
    if ss_within == 0.0:
        return math.inf if ss_between > 0.0 else 0.0
    return (ss_between / (k - 1)) / (ss_within / (n - k))


def _anova_f_all_columns(matrix: np.ndarray, y: Sequence[object]) -> np.ndarray:
    """Vectorized anova_f over every column of the matrix."""
    labels = list(y)
    n, m = matrix.shape
    groups: dict[object, list[int]] = {}
    for i, label in enumerate(labels):
        groups.setdefault(label, []).append(i)
    k = len(groups)
    if k < 2:
        raise DataError("ANOVA F needs at least 2 classes")
    grand = matrix.mean(axis=0)
    ss_between = np.zeros(m, dtype=np.float64)
    ss_within = np.zeros(m, dtype=np.float64)
    for rows in groups.values():
        block = matrix[rows, :]
        mean_g = block.mean(axis=0)
        ss_between += len(rows) * (mean_g - grand) ** 2
        ss_within += ((block - mean_g) ** 2).sum(axis=0)
    out = np.zeros(m, dtype=np.float64)
    nonzero = ss_within > 0.0
    out[nonzero] = (ss_between[nonzero] / (k - 1)) / (ss_within[nonzero] / (n - k))
    out[~nonzero] = np.where(ss_between[~nonzero] > 0.0, np.inf, 0.0)
    return out


# --- fitted components ------------------------------------------------------


@dataclass(frozen=True)
class FittedScale:
    means: np.ndarray
    stds: np.ndarray

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        out = matrix - self.means
        safe = np.where(self.stds > 0.0, self.stds, 1.0)
        out = out / safe
        out[:, self.stds == 0.0] = 0.0
        return out


@dataclass(frozen=True)
class FittedBinarize:
    threshold: float

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        return (matrix > self.threshold).astype(np.float64)


@dataclass(frozen=True)
class FittedSelect:
    indices: tuple[int, ...]

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        return matrix[:, list(self.indices)]


@dataclass(frozen=True)
class FittedKnn:
    k: int
    train: np.ndarray
    train_codes: np.ndarray


@dataclass(frozen=True)
class FittedLinear:
    kind: str
    weights: np.ndarray  # n_classes x (n_features + 1), bias last
    loss_history: tuple[float, ...]


@dataclass(frozen=True)
class FittedMajority:
    code: int


FittedComponent = Union[FittedScale, FittedBinarize, FittedSelect, FittedKnn, FittedLinear, FittedMajority]


@dataclass(frozen=True)
class FittedPipeline:
    spec: PipelineSpec
    fitted: tuple[FittedComponent, ...]
    codebook: tuple[str, ...]
    label_map: LabelMap
    class_freq: Mapping[str, int]
    columns: tuple[ColumnDesc, ...]
    warnings: tuple[str, ...] = ()

    def coarse_of(self, granular: str) -> CoarseLabel:
        return map_label(granular, self.label_map)


# --- fitting -----------------------------------------------------------------


def fit(
    spec: PipelineSpec,
    table: FeatureTable,
    y: Sequence[str],
    label_map: LabelMap,
    seed: int = 0,
) -> FittedPipeline:
    """Fit the pipeline on granular labels aligned with the table rows."""
    if table.n_rows == 0:
        raise DataError("cannot fit on an empty training set")
    if len(y) != table.n_rows:
        raise DataError(f"{table.n_rows} rows but {len(y)} labels")
    for label in y:
        if label not in label_map:
            raise UnknownLabelError(f"training label {label!r} is not in the label map")

    codebook = tuple(sorted(set(y)))
    code_of = {label: i for i, label in enumerate(codebook)}
    codes = np.array([code_of[label] for label in y], dtype=np.int64)
    class_freq = {label: 0 for label in codebook}
    for label in y:
        class_freq[label] += 1

    matrix = np.asarray(table.values, dtype=np.float64)
    warnings: list[str] = []
    fitted: list[FittedComponent] = []
    for component in spec.components:
        if component.kind == "scale":
            state: FittedComponent = FittedScale(
                means=matrix.mean(axis=0), stds=matrix.std(axis=0)
            )
            matrix = state.transform(matrix)
        elif component.kind == "binarize":
            state = FittedBinarize(threshold=component.args[0])
            matrix = state.transform(matrix)
        elif component.kind == "select_k_anova":
            k = int(component.args[0])
            m = matrix.shape[1]
            if k > m:
                warnings.append(f"select_k_anova k={k} clamped to {m} columns")
                k = m
            f_values = _anova_f_all_columns(matrix, list(y))
            ranked = sorted(range(m), key=lambda j: (-f_values[j], j))[:k]
            state = FittedSelect(indices=tuple(sorted(ranked)))
            matrix = state.transform(matrix)
        elif component.kind == "knn":
            k = int(component.args[0])
            if k > matrix.shape[0]:
                warnings.append(f"knn k={k} clamped to {matrix.shape[0]} training rows")
                k = matrix.shape[0]
            state = FittedKnn(k=k, train=matrix.copy(), train_codes=codes.copy())
        elif component.kind in ("linear_svm", "logistic"):
            state = _fit_linear(component, matrix, codes, len(codebook))
        elif component.kind == "majority":
            state = FittedMajority(
                code=_break_label_tie(list(range(len(codebook))), codebook, class_freq, label_map)
            )
        else:  # pragma: no cover - constructor forbids unknown kinds
            raise ConfigError(f"unknown component {component.kind!r}")
        fitted.append(state)

    return FittedPipeline(
        spec=spec,
        fitted=tuple(fitted),
        codebook=codebook,
        label_map=label_map,
        class_freq=class_freq,
        columns=table.columns,
        warnings=tuple(warnings),
    )


def _break_label_tie(
    candidate_codes: Sequence[int],
    codebook: tuple[str, ...],
    class_freq: Mapping[str, int],
    label_map: LabelMap,
) -> int:
    """Total order over tied candidate labels.

    Most frequent in training wins; then lowest coarse ordinal; then
    lexicographically smallest granular tag.
    """
    def key(code: int):
        label = codebook[code]
        return (-class_freq[label], int(map_label(label, label_map)), label)

    return min(candidate_codes, key=key)


def _fit_linear(
    component: Component, matrix: np.ndarray, codes: np.ndarray, n_classes: int
) -> FittedLinear:
    """One-vs-rest full-batch subgradient descent with backtracking steps.

    Each epoch proposes one gradient step per class; a step that would
    increase the total objective is halved until it does not, so the loss
    history is non-increasing by construction.
    """
    kind = component.kind
    reg = 1.0 / component.args[0] if kind == "linear_svm" else component.args[0]
    epochs = int(component.args[1])
    n, m = matrix.shape
    x = np.concatenate([matrix, np.ones((n, 1))], axis=1)
    targets = np.where(codes[None, :] == np.arange(n_classes)[:, None], 1.0, -1.0)
    weights = np.zeros((n_classes, m + 1), dtype=np.float64)

    def objective(w: np.ndarray) -> float:
        margins = targets * (w @ x.T)
        if kind == "linear_svm":
            data_loss = np.maximum(0.0, 1.0 - margins).mean(axis=1).sum()
        else:
            data_loss = np.logaddexp(0.0, -margins).mean(axis=1).sum()
        return float(data_loss + 0.5 * reg * (w[:, :-1] ** 2).sum())

    def gradient(w: np.ndarray) -> np.ndarray:
        margins = targets * (w @ x.T)
        if kind == "linear_svm":
            active = (margins < 1.0).astype(np.float64)
            grad = -(active * targets) @ x / n
        else:
            sigma = 0.5 * (1.0 - np.tanh(0.5 * margins))  # sigmoid(-margins), overflow-safe
            grad = -(sigma * targets) @ x / n
        grad[:, :-1] += reg * w[:, :-1]
        return grad

    step = 1.0
    history = [objective(weights)]
    for _ in range(epochs):
        grad = gradient(weights)
        current = history[-1]
        accepted = weights
        accepted_loss = current
        trial_step = step
        for _attempt in range(40):
            trial = weights - trial_step * grad
            trial_loss = objective(trial)
            if trial_loss <= current:
                accepted = trial
                accepted_loss = trial_loss
                step = trial_step * 1.1
                break
            trial_step *= 0.5
        weights = accepted
        history.append(accepted_loss)
    return FittedLinear(kind=kind, weights=weights, loss_history=tuple(history))


# --- prediction --------------------------------------------------------------


def _check_columns(fp: FittedPipeline, table: FeatureTable) -> None:
    if table.columns == fp.columns:
        return
    trained = {c.name() for c in fp.columns}
    given = {c.name() for c in table.columns}
    missing = sorted(trained - given)
    extra = sorted(given - trained)
    if missing or extra:
        raise FeatureMismatchError(
            f"feature columns do not match training: missing={missing} extra={extra}"
        )
    raise FeatureMismatchError("feature columns match as a set but not in order")


def _knn_predict_codes(state: FittedKnn, fp: FittedPipeline, queries: np.ndarray) -> np.ndarray:
    n_train = state.train.shape[0]
    out = np.zeros(queries.shape[0], dtype=np.int64)
    cells_per_query = max(1, n_train * max(1, state.train.shape[1]))
    chunk = max(1, int(4_000_000 // cells_per_query))
    for start in range(0, queries.shape[0], chunk):
        block = queries[start : start + chunk]
        diffs = block[:, None, :] - state.train[None, :, :]
        dists = np.sqrt((diffs * diffs).sum(axis=2))
        for r in range(block.shape[0]):
            order = np.lexsort((np.arange(n_train), dists[r]))
            top = state.train_codes[order[: state.k]]
            counts = np.bincount(top, minlength=len(fp.codebook))
            best = counts.max()
            tied = [code for code in range(len(fp.codebook)) if counts[code] == best]
            out[start + r] = _break_label_tie(tied, fp.codebook, fp.class_freq, fp.label_map)
    return out


def predict(fp: FittedPipeline, table: FeatureTable) -> list[str]:
    """Granular label per row; column descriptors must match training."""
    _check_columns(fp, table)
    matrix = np.asarray(table.values, dtype=np.float64)
    if matrix.shape[0] == 0:
        return []
    codes: Optional[np.ndarray] = None
    for state in fp.fitted:
        if isinstance(state, (FittedScale, FittedBinarize, FittedSelect)):
            matrix = state.transform(matrix)
        elif isinstance(state, FittedKnn):
            codes = _knn_predict_codes(state, fp, matrix)
        elif isinstance(state, FittedLinear):
            scores = state.weights @ np.concatenate(
                [matrix, np.ones((matrix.shape[0], 1))], axis=1
            ).T
            codes = np.argmax(scores, axis=0)
        elif isinstance(state, FittedMajority):
            codes = np.full(matrix.shape[0], state.code, dtype=np.int64)
    assert codes is not None
    return [fp.codebook[int(code)] for code in codes]


def predict_coarse(fp: FittedPipeline, table: FeatureTable) -> list[CoarseLabel]:
    return [fp.coarse_of(label) for label in predict(fp, table)]


# --- serialization ------------------------------------------------------------


def _fitted_to_json(state: FittedComponent) -> dict:
    if isinstance(state, FittedScale):
        return {"kind": "scale", "means": state.means.tolist(), "stds": state.stds.tolist()}
    if isinstance(state, FittedBinarize):
        return {"kind": "binarize", "threshold": state.threshold}
    if isinstance(state, FittedSelect):
        return {"kind": "select", "indices": list(state.indices)}
    if isinstance(state, FittedKnn):
        return {
            "kind": "knn",
            "k": state.k,
            "train": state.train.tolist(),
            "train_codes": state.train_codes.tolist(),
        }
    if isinstance(state, FittedLinear):
        return {
            "kind": "linear",
            "linear_kind": state.kind,
            "weights": state.weights.tolist(),
            "loss_history": list(state.loss_history),
        }
    if isinstance(state, FittedMajority):
        return {"kind": "majority", "code": state.code}
    raise ModelFormatError(f"unserializable fitted component {state!r}")


def _fitted_from_json(blob: dict) -> FittedComponent:
    kind = blob.get("kind")
    if kind == "scale":
        return FittedScale(
            means=np.array(blob["means"], dtype=np.float64),
            stds=np.array(blob["stds"], dtype=np.float64),
        )
    if kind == "binarize":
        return FittedBinarize(threshold=float(blob["threshold"]))
    if kind == "select":
        return FittedSelect(indices=tuple(int(i) for i in blob["indices"]))
    if kind == "knn":
        return FittedKnn(
            k=int(blob["k"]),
            train=np.array(blob["train"], dtype=np.float64).reshape(
                len(blob["train"]), -1
            ),
            train_codes=np.array(blob["train_codes"], dtype=np.int64),
        )
    if kind == "linear":
        return FittedLinear(
            kind=str(blob["linear_kind"]),
            weights=np.array(blob["weights"], dtype=np.float64),
            loss_history=tuple(float(x) for x in blob["loss_history"]),
        )
    if kind == "majority":
        return FittedMajority(code=int(blob["code"]))
    raise ModelFormatError(f"unknown fitted component kind {kind!r}")


def save_model(fp: FittedPipeline, path: str) -> None:
    """Write the fitted pipeline as versioned JSON."""
    payload = {
        "format": MODEL_FORMAT,
        "spec": fp.spec.canonical(),
        "codebook": list(fp.codebook),
        "label_map": {tag: coarse.tag for tag, coarse in fp.label_map.entries.items()},
        "class_freq": dict(fp.class_freq),
        "columns": [c.name() for c in fp.columns],
        "warnings": list(fp.warnings),
        "fitted": [_fitted_to_json(s) for s in fp.fitted],
    }
    write_text_atomic(path, json.dumps(payload, indent=1) + "\n")


def load_model(path: str) -> FittedPipeline:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a valid model file: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ModelFormatError(
            f"{path}: format {payload.get('format')!r} is not {MODEL_FORMAT!r}"
            if isinstance(payload, dict)
            else f"{path}: not a model file"
        )
    try:
        spec = parse_pipeline(payload["spec"])
        label_map = LabelMap(
            {tag: CoarseLabel.from_name(name) for tag, name in payload["label_map"].items()}
        )
        return FittedPipeline(
            spec=spec,
            fitted=tuple(_fitted_from_json(blob) for blob in payload["fitted"]),
            codebook=tuple(payload["codebook"]),
            label_map=label_map,
            class_freq={k: int(v) for k, v in payload["class_freq"].items()},
            columns=tuple(ColumnDesc.from_name(name) for name in payload["columns"]),
            warnings=tuple(payload.get("warnings", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: truncated or malformed model file: {exc}") from None
