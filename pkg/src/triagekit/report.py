"""Human-readable artifacts: benchmark tables, violin data, token highlights.

Pure emitters over already-computed results. Each one is a deterministic
function of its inputs, so identical inputs always produce byte-identical
artifact text; rendering (plots, styled terminals) is left to consumers of
the emitted files.
"""

from __future__ import annotations

import html as _html
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .analysis import ImportanceReport, TokenAttribution, shift_to_color
from .corpus import CoarseLabel
from .errors import ConfigError, DataError, FeatureMismatchError
from .evaluation import BaselineReport
from .featurize import FeatureTable
from .ioutil import write_text_atomic

# --- value normalization ---------------------------------------------------------


def normalize_minmax(values: Sequence[float]) -> list[float]:
    """Rescale to [0, 1] via (v - min)/(max - min); constant input maps to zeros."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ConfigError("normalize_minmax needs a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise DataError("normalize_minmax input contains non-finite values")
    low = float(arr.min())
    high = float(arr.max())
    if high == low:
        return [0.0] * arr.size
    return [(float(v) - low) / (high - low) for v in arr]


# --- violin-plot data export --------------------------------------------------------


@dataclass(frozen=True)
class ViolinDatum:
    feature: str
    coarse: CoarseLabel
    value: float


VIOLIN_COLUMNS = ("feature", "class", "value")


def emit_violin_data(
    table: FeatureTable,
    labels: Sequence[Optional[CoarseLabel]],
    importance: ImportanceReport,
    top_k: int = 10,
) -> list[ViolinDatum]:
    """Long-format rows for the most important mean-aggregated features.

    Features appear in importance order (largest mean drop first), clamped to
    however many mean-aggregated columns exist. Normalization is per-feature
    min-max over every row of the table, labeled or not; rows are emitted
    only for labeled posts (``labels[i] is None`` skips row i).
    """
    if top_k < 1:
        raise ConfigError(f"top_k must be >= 1, got {top_k}")
    if len(labels) != table.n_rows:
        raise DataError(f"{table.n_rows} rows but {len(labels)} labels")
    column_index = {col.name(): j for j, col in enumerate(table.columns)}
    chosen: list[str] = []
    for entry in importance.entries:
        j = column_index.get(entry.column)
        if j is None:
            raise FeatureMismatchError(
                f"importance entry {entry.column!r} is not a column of the table"
            )
        if table.columns[j].aggregation != "mean":
            continue
        chosen.append(entry.column)
        if len(chosen) == top_k:
            break
    rows: list[ViolinDatum] = []
    for name in chosen:
        normalized = normalize_minmax(table.values[:, column_index[name]])
        for i, label in enumerate(labels):
            if label is None:
                continue
            rows.append(ViolinDatum(feature=name, coarse=label, value=normalized[i]))
    return rows


def save_violin_data(rows: Sequence[ViolinDatum], path: str) -> None:
    lines = ["\t".join(VIOLIN_COLUMNS)]
    for row in rows:
        lines.append(f"{row.feature}\t{row.coarse.tag}\t{row.value!r}")
    write_text_atomic(path, "\n".join(lines) + "\n")


# --- token-highlight documents --------------------------------------------------------

_HIGHLIGHT_STYLE = (
    "body { font-family: sans-serif; max-width: 40em; margin: 2em auto; }\n"
    ".y { background-color: #f7e08a; }\n"
    ".r { background-color: #f2a0a0; }\n"
    ".g { background-color: #a8e6b8; }\n"
)

_COLOR_INITIAL = {"yellow": "y", "red": "r", "green": "g"}


def _highlight_header(attributions: Sequence[TokenAttribution], granular: str) -> str:
    coarse = attributions[0].original
    return f"{coarse.tag.capitalize()} ({granular})"


def emit_highlight_doc(
    attributions: Sequence[TokenAttribution],
    granular: str,
    fmt: str = "markdown",
) -> str:
    """Render masked-token attributions as a highlighted document.

    Tokens whose masking moved the prediction get a color span: one level
    less severe is yellow, two or more is red, and any more-severe move is
    green. The header names the unmasked prediction, coarse then granular.
    """
    if not attributions:
        raise ConfigError("cannot render an empty attribution list")
    if fmt not in ("markdown", "html"):
        raise ConfigError(f"format must be 'markdown' or 'html', got {fmt!r}")
    header = _highlight_header(attributions, granular)
    if fmt == "markdown":
        words = []
        for a in attributions:
            color = shift_to_color(a.shift)
            if color is None:
                words.append(a.token)
            else:
                words.append(f"[{_COLOR_INITIAL[color]}:{a.token}]")
        return f"## {header}\n\n{' '.join(words)}\n"
    words = []
    for a in attributions:
        token = _html.escape(a.token)
        color = shift_to_color(a.shift)
        if color is None:
            words.append(token)
        else:
            words.append(f'<span class="{_COLOR_INITIAL[color]}">{token}</span>')
    return (
        "<html>\n<head>\n<meta charset=\"utf-8\"/>\n"
        f"<style>\n{_HIGHLIGHT_STYLE}</style>\n</head>\n<body>\n"
        f"<h2>{_html.escape(header)}</h2>\n"
        f"<p>{' '.join(words)}</p>\n"
        "</body>\n</html>\n"
    )


# --- benchmark summary table ----------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkRow:
    """One benchmarked configuration: a feature set trained one way."""

    feature_set: str
    trainer: str
    n_features: int
    cv_score: float
    test_score: float
    external_score: float


BENCHMARK_COLUMNS = (
    "feature_set",
    "trainer",
    "n_features",
    "cv_macro_f1",
    "test_macro_f1",
    "external_macro_f1",
    "above_chance",
)


def emit_benchmark_table(
    rows: Sequence[BenchmarkRow], baseline: BaselineReport
) -> str:
    """TSV summary of benchmark runs with a better-than-chance marker.

    The marker column holds ``*`` exactly when the external-validation score
    exceeds the chance-distribution threshold, and is empty otherwise.
    """
    if not rows:
        raise ConfigError("benchmark table needs at least one row")
    lines = ["\t".join(BENCHMARK_COLUMNS)]
    for row in rows:
        marker = "*" if row.external_score > baseline.threshold else ""
        lines.append(
            f"{row.feature_set}\t{row.trainer}\t{row.n_features}\t"
            f"{row.cv_score!r}\t{row.test_score!r}\t{row.external_score!r}\t{marker}"
        )
    return "\n".join(lines) + "\n"


def parse_benchmark_table(text: str) -> list[tuple[BenchmarkRow, bool]]:
    lines = text.splitlines()
    if not lines or tuple(lines[0].split("\t")) != BENCHMARK_COLUMNS:
        raise DataError("not a benchmark table: bad header")
    out: list[tuple[BenchmarkRow, bool]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != len(BENCHMARK_COLUMNS):
            raise DataError(f"line {lineno}: expected {len(BENCHMARK_COLUMNS)} columns")
        row = BenchmarkRow(
            feature_set=parts[0],
            trainer=parts[1],
            n_features=int(parts[2]),
            cv_score=float(parts[3]),
            test_score=float(parts[4]),
            external_score=float(parts[5]),
        )
        if parts[6] not in ("*", ""):
            raise DataError(f"line {lineno}: bad marker {parts[6]!r}")
        out.append((row, parts[6] == "*"))
    return out
