"""Feature extraction: sentiment, category lexicons, embeddings, aggregation.

Sentence-level extractors (sentiment, embeddings) are aggregated to the post
level as [means | maxes | mins], tripling their width; post-level extractors
(category proportions) contribute their width directly. Every column of the
resulting table records its provenance (extractor, base feature,
aggregation), and rows are ordered by post id.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .corpus import Corpus, Post
from .errors import ConfigError, DataError, EmbeddingFormatError, LexiconFormatError
from .ioutil import read_package_data, write_text_atomic
from .seeds import fnv1a64, mix64
from .textutil import tokenize
from .vader import (  # noqa: F401  (public surface of this module)
    SentimentScores,
    ValenceLexicon,
    load_valence_lexicon,
    packaged_valence_lexicon,
    parse_valence_lexicon,
    vader_sentence,
)

VADER_BASE_FEATURES = ("pos", "neg", "neu", "compound")

AGGREGATIONS = ("mean", "max", "min", "post")


@dataclass(frozen=True)
class ColumnDesc:
    """Provenance of one feature column."""

    extractor: str
    base_feature: str
    aggregation: str

    def __post_init__(self) -> None:
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"bad aggregation {self.aggregation!r}; expected one of {AGGREGATIONS}")
        for part in (self.extractor, self.base_feature):
            if not part or re.search(r"[|\t\n]", part):
                raise ConfigError(f"bad column name part {part!r}")

    def name(self) -> str:
        return f"{self.extractor}|{self.base_feature}|{self.aggregation}"

    @classmethod
    def from_name(cls, name: str) -> "ColumnDesc":
        parts = name.split("|")
        if len(parts) != 3:
            raise DataError(f"bad column name {name!r}; expected extractor|base|aggregation")
        return cls(*parts)


@dataclass(frozen=True)
class FeatureTable:
    """N×M post-level feature matrix with per-column provenance."""

    row_ids: tuple[str, ...]
    columns: tuple[ColumnDesc, ...]
    values: np.ndarray
    degenerate_ids: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"feature values must be 2-D, got shape {values.shape}")
        if values.shape != (len(self.row_ids), len(self.columns)):
            raise DataError(
                f"feature shape {values.shape} does not match "
                f"{len(self.row_ids)} rows x {len(self.columns)} columns"
            )
        if not np.all(np.isfinite(values)):
            raise DataError("feature table contains NaN or infinite values")
        if len(set(self.row_ids)) != len(self.row_ids):
            raise DataError("duplicate row ids in feature table")
        names = [c.name() for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column descriptors in feature table")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_rows(self) -> int:
        return len(self.row_ids)

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def column_names(self) -> list[str]:
        return [c.name() for c in self.columns]

    def row_index(self, post_id: str) -> int:
        try:
            return self.row_ids.index(post_id)
        except ValueError:
            raise KeyError(f"no row for post id {post_id!r}") from None

    def subset_rows(self, post_ids: Sequence[str]) -> "FeatureTable":
        index = {pid: i for i, pid in enumerate(self.row_ids)}
        rows = [index[pid] for pid in post_ids]
        return FeatureTable(
            row_ids=tuple(post_ids),
            columns=self.columns,
            values=self.values[rows, :],
            degenerate_ids=self.degenerate_ids & set(post_ids),
        )


# --- category lexicons ------------------------------------------------------


@dataclass(frozen=True)
class CategoryLexicon:
    """Category name -> entries; an entry is a stem plus a wildcard flag."""

    categories: tuple[str, ...]
    entries: Mapping[str, tuple[tuple[str, bool], ...]]

    def __post_init__(self) -> None:
        if len(set(self.categories)) != len(self.categories):
            raise LexiconFormatError("duplicate category names")
        for cat in self.categories:
            if cat not in self.entries:
                raise LexiconFormatError(f"category {cat!r} has no entries")
            for stem, _wild in self.entries[cat]:
                if not stem:
                    raise LexiconFormatError(f"category {cat!r} has an empty stem")


def parse_category_lexicon(text: str, origin: str = "<string>") -> CategoryLexicon:
    """Parse `category<TAB>entry1,entry2,...` lines; trailing `*` = prefix wildcard."""
    categories: list[str] = []
    entries: dict[str, tuple[tuple[str, bool], ...]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise LexiconFormatError(f"{origin}:{lineno}: expected 2 columns, got {len(parts)}")
        category, raw_entries = parts
        if not category:
            raise LexiconFormatError(f"{origin}:{lineno}: empty category name")
        if category in entries:
            raise LexiconFormatError(f"{origin}:{lineno}: duplicate category {category!r}")
        parsed = []
        for raw in raw_entries.split(","):
            raw = raw.strip()
            if not raw:
                continue
            if raw.endswith("*"):
                parsed.append((raw[:-1].lower(), True))
            else:
                parsed.append((raw.lower(), False))
        if not parsed:
            raise LexiconFormatError(f"{origin}:{lineno}: category {category!r} has no entries")
        categories.append(category)
        entries[category] = tuple(parsed)
    return CategoryLexicon(categories=tuple(categories), entries=entries)


def load_category_lexicon(path: str) -> CategoryLexicon:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_category_lexicon(fh.read(), origin=path)


@lru_cache(maxsize=1)
def packaged_category_lexicon() -> CategoryLexicon:
    """The small demo category lexicon shipped with the package."""
    return parse_category_lexicon(
        read_package_data("categories_distress.tsv"), origin="categories_distress.tsv"
    )


def category_features(body_clean: str, lex: CategoryLexicon) -> np.ndarray:
    """Per-category proportion of tokens matching any entry of the category."""
    tokens = [t.lower() for t in tokenize(body_clean)]
    out = np.zeros(len(lex.categories), dtype=np.float64)
    if not tokens:
        return out
    for k, category in enumerate(lex.categories):
        stems = lex.entries[category]
        count = 0
        for token in tokens:
            for stem, wildcard in stems:
                if token.startswith(stem) if wildcard else token == stem:
                    count += 1
                    break
        out[k] = count / len(tokens)
    return out


# --- embeddings --------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingSet:
    """Sentence vectors of a fixed dimension keyed by (post_id, sentence_index)."""

    dim: int
    vectors: Mapping[tuple[str, int], np.ndarray]

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise EmbeddingFormatError(f"dimension must be >= 1, got {self.dim}")
        for key, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise EmbeddingFormatError(
                    f"vector for {key} has shape {vec.shape}, expected ({self.dim},)"
                )


def load_embeddings(path: str, corpus: Corpus) -> EmbeddingSet:
    """Read an embedding file and check it covers the corpus exactly.

    Format: first line `#dim=D`, then a header `post_id<TAB>sentence_index
    <TAB>values` with comma-separated decimal reals. Every sentence of every
    non-degenerate post must appear exactly once.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith("#dim="):
        raise EmbeddingFormatError(f"{path}:1: missing #dim=D comment line")
    try:
        dim = int(lines[0][len("#dim=") :])
    except ValueError:
        raise EmbeddingFormatError(f"{path}:1: bad dimension in {lines[0]!r}") from None
    if len(lines) < 2 or lines[1].split("\t") != ["post_id", "sentence_index", "values"]:
        raise EmbeddingFormatError(f"{path}:2: missing header post_id/sentence_index/values")

    posts = corpus.by_id()
    vectors: dict[tuple[str, int], np.ndarray] = {}
    for lineno, line in enumerate(lines[2:], start=3):
        parts = line.split("\t")
        if len(parts) != 3:
            raise EmbeddingFormatError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
        post_id, raw_index, raw_values = parts
        if post_id not in posts:
            raise EmbeddingFormatError(f"{path}:{lineno}: unknown post id {post_id!r}")
        try:
            sentence_index = int(raw_index)
        except ValueError:
            raise EmbeddingFormatError(f"{path}:{lineno}: bad sentence index {raw_index!r}") from None
        if not 0 <= sentence_index < len(posts[post_id].sentences):
            raise EmbeddingFormatError(
                f"{path}:{lineno}: sentence index {sentence_index} out of range for "
                f"post {post_id!r} with {len(posts[post_id].sentences)} sentences"
            )
        key = (post_id, sentence_index)
        if key in vectors:
            raise EmbeddingFormatError(f"{path}:{lineno}: duplicate row for {key}")
        try:
            vec = np.array([float(x) for x in raw_values.split(",")], dtype=np.float64)
        except ValueError:
            raise EmbeddingFormatError(f"{path}:{lineno}: non-numeric value in vector") from None
        if vec.shape != (dim,):
            raise EmbeddingFormatError(
                f"{path}:{lineno}: vector has {vec.shape[0]} values, expected {dim}"
            )
        vectors[key] = vec

    for post in corpus.posts:
        for idx in range(len(post.sentences)):
            if (post.id, idx) not in vectors:
                raise EmbeddingFormatError(
                    f"{path}: missing vector for post {post.id!r} sentence {idx}"
                )
    return EmbeddingSet(dim=dim, vectors=vectors)


def save_embeddings(embeddings: EmbeddingSet, path: str) -> None:
    """Write the embedding format (rows sorted by post id, then index)."""
    rows = [f"#dim={embeddings.dim}", "post_id\tsentence_index\tvalues"]
    for (post_id, idx) in sorted(embeddings.vectors):
        values = ",".join(repr(float(x)) for x in embeddings.vectors[(post_id, idx)])
        rows.append(f"{post_id}\t{idx}\t{values}")
    write_text_atomic(path, "\n".join(rows) + "\n")


# --- deterministic stub encoder ----------------------------------------------

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


@lru_cache(maxsize=65536)
def _token_hash(token: str) -> int:
    return fnv1a64(token.encode("utf-8"))


def _mix64_array(x: np.ndarray) -> np.ndarray:
    z = x.astype(np.uint64)
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


def stub_encode(sentence: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic pseudo-embedding with an integer-exact construction.

    Per token: a 64-bit FNV-1a hash, xored with the splitmix64-mixed seed
    and a per-dimension salt (dimension index times 0x9E3779B97F4A7C15, mod
    2^64), finalized with the splitmix64 mixer; the low 32 bits are the
    token's contribution to that dimension. Contributions are summed
    exactly; each sum s maps to s' = (s mod 2^32) - 2^31, read as s'/2^31 in
    [-1, 1), and the vector is scaled to unit Euclidean length. The
    normalizer is computed as the square root of the exact integer sum of
    the s' squares, so every arithmetic step up to the final two IEEE
    operations (one sqrt, one divide) is integer-exact and independent
    implementations agree bit-for-bit. Empty sentences give the zero
    vector. Tokens come from the package-wide whitespace-and-edge-
    punctuation tokenizer.
    """
    if dim < 1:
        raise ConfigError(f"stub dimension must be >= 1, got {dim}")
    tokens = tokenize(sentence)
    if not tokens:
        return np.zeros(dim, dtype=np.float64)
    seed_mix = np.uint64(mix64(seed & _MASK64))
    dim_salt = np.arange(dim, dtype=np.uint64) * np.uint64(_GOLDEN)
    acc = np.zeros(dim, dtype=np.uint64)
    for token in tokens:
        g = _mix64_array(np.uint64(_token_hash(token)) ^ seed_mix ^ dim_salt)
        acc += g & np.uint64(0xFFFFFFFF)
    s_mod = (acc & np.uint64(0xFFFFFFFF)).astype(np.int64)
    s_prime = s_mod - np.int64(1 << 31)
    sum_sq = sum(int(x) * int(x) for x in s_prime)
    if sum_sq == 0:
        return np.zeros(dim, dtype=np.float64)
    return s_prime.astype(np.float64) / math.sqrt(float(sum_sq))


# --- aggregation and table assembly ------------------------------------------


def aggregate_post(block: Union[np.ndarray, Sequence[Sequence[float]]]) -> np.ndarray:
    """Collapse an S×D sentence-feature block to [means | maxes | mins]."""
    if isinstance(block, np.ndarray):
        arr = block.astype(np.float64)
        if arr.ndim != 2:
            raise DataError(f"sentence block must be 2-D, got shape {arr.shape}")
    else:
        rows = [list(map(float, row)) for row in block]
        if not rows:
            return np.zeros(0, dtype=np.float64)
        width = len(rows[0])
        if any(len(row) != width for row in rows):
            raise DataError("ragged sentence block: rows have differing widths")
        arr = np.array(rows, dtype=np.float64)
    if arr.shape[0] == 0:
        return np.zeros(3 * arr.shape[1], dtype=np.float64)
    return np.concatenate([arr.mean(axis=0), arr.max(axis=0), arr.min(axis=0)])


class VaderExtractor:
    """Sentence-level sentiment scores (4 base features)."""

    def __init__(self, lexicon: Optional[ValenceLexicon] = None, name: str = "vader"):
        self.name = name
        self.lexicon = lexicon if lexicon is not None else packaged_valence_lexicon()

    sentence_level = True

    def base_features(self) -> list[str]:
        return list(VADER_BASE_FEATURES)

    def sentence_vectors(self, post: Post) -> np.ndarray:
        rows = []
        for sentence in post.sentences:
            s = vader_sentence(sentence, self.lexicon)
            rows.append((s.pos, s.neg, s.neu, s.compound))
        return np.array(rows, dtype=np.float64).reshape(len(post.sentences), 4)


class CategoryExtractor:
    """Post-level category proportions over the cleaned body."""

    def __init__(self, lexicon: Optional[CategoryLexicon] = None, name: str = "categories"):
        self.name = name
        self.lexicon = lexicon if lexicon is not None else packaged_category_lexicon()

    sentence_level = False

    def base_features(self) -> list[str]:
        return list(self.lexicon.categories)

    def post_vector(self, post: Post) -> np.ndarray:
        return category_features(post.body_clean, self.lexicon)


class StubEmbeddingExtractor:
    """Sentence-level deterministic stub embeddings."""

    def __init__(self, dim: int, seed: int, name: str = "stub"):
        if dim < 1:
            raise ConfigError(f"stub dimension must be >= 1, got {dim}")
        self.name = name
        self.dim = dim
        self.seed = seed

    sentence_level = True

    def base_features(self) -> list[str]:
        return [f"d{j:04d}" for j in range(self.dim)]

    def sentence_vectors(self, post: Post) -> np.ndarray:
        rows = [stub_encode(s, self.dim, self.seed) for s in post.sentences]
        return np.array(rows, dtype=np.float64).reshape(len(post.sentences), self.dim)


class FileEmbeddingExtractor:
    """Sentence-level vectors ingested from an embedding file."""

    def __init__(self, embeddings: EmbeddingSet, name: str = "embed"):
        self.name = name
        self.embeddings = embeddings

    sentence_level = True

    @property
    def dim(self) -> int:
        return self.embeddings.dim

    def base_features(self) -> list[str]:
        return [f"d{j:04d}" for j in range(self.dim)]

    def sentence_vectors(self, post: Post) -> np.ndarray:
        rows = []
        for idx in range(len(post.sentences)):
            key = (post.id, idx)
            if key not in self.embeddings.vectors:
                raise EmbeddingFormatError(f"no vector for post {post.id!r} sentence {idx}")
            rows.append(self.embeddings.vectors[key])
        return np.array(rows, dtype=np.float64).reshape(len(post.sentences), self.dim)


class CallbackExtractor:
    """Sentence-level vectors from a live sentence->vector callback."""

    def __init__(self, encode: Callable[[str], np.ndarray], dim: int, name: str = "encoder"):
        if dim < 1:
            raise ConfigError(f"encoder dimension must be >= 1, got {dim}")
        self.name = name
        self.dim = dim
        self.encode = encode

    sentence_level = True

    def base_features(self) -> list[str]:
        return [f"d{j:04d}" for j in range(self.dim)]

    def sentence_vectors(self, post: Post) -> np.ndarray:
        rows = []
        for sentence in post.sentences:
            vec = np.asarray(self.encode(sentence), dtype=np.float64)
            if vec.shape != (self.dim,):
                raise DataError(
                    f"encoder returned shape {vec.shape} for declared dimension {self.dim}"
                )
            rows.append(vec)
        return np.array(rows, dtype=np.float64).reshape(len(post.sentences), self.dim)


Extractor = Union[
    VaderExtractor, CategoryExtractor, StubEmbeddingExtractor, FileEmbeddingExtractor, CallbackExtractor
]


def build_feature_table(
    corpus: Corpus,
    extractors: Sequence[Extractor],
    post_ids: Optional[Sequence[str]] = None,
) -> FeatureTable:
    """Featurize posts into one table; rows ordered by post id.

    Sentence-level extractors contribute 3×D columns (mean/max/min
    aggregation); post-level extractors contribute D columns. Zero-sentence
    posts get all-zero features and are flagged in degenerate_ids.
    """
    if not extractors:
        raise ConfigError("no extractors configured")
    names = [e.name for e in extractors]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate extractor names: {names}")
    if post_ids is None:
        row_ids = tuple(sorted(post.id for post in corpus.posts))
    else:
        row_ids = tuple(post_ids)
    posts = corpus.by_id()

    columns: list[ColumnDesc] = []
    for extractor in extractors:
        base = extractor.base_features()
        if extractor.sentence_level:
            for agg in ("mean", "max", "min"):
                columns.extend(ColumnDesc(extractor.name, b, agg) for b in base)
        else:
            columns.extend(ColumnDesc(extractor.name, b, "post") for b in base)

    values = np.zeros((len(row_ids), len(columns)), dtype=np.float64)
    degenerate = set()
    for i, pid in enumerate(row_ids):
        post = posts[pid]
        if post.degenerate:
            degenerate.add(pid)
        offset = 0
        for extractor in extractors:
            if extractor.sentence_level:
                dim = len(extractor.base_features())
                width = 3 * dim
                if not post.degenerate:
                    block = extractor.sentence_vectors(post)
                    values[i, offset : offset + width] = aggregate_post(block)
            else:
                width = len(extractor.base_features())
                values[i, offset : offset + width] = extractor.post_vector(post)
            offset += width
    return FeatureTable(
        row_ids=row_ids,
        columns=tuple(columns),
        values=values,
        degenerate_ids=frozenset(degenerate),
    )


# --- feature table file -------------------------------------------------------


def save_feature_table(table: FeatureTable, path: str) -> None:
    """Write the table as TSV; one optional leading #degenerate= comment."""
    rows = []
    if table.degenerate_ids:
        rows.append("#degenerate=" + ",".join(sorted(table.degenerate_ids)))
    rows.append("\t".join(["post_id"] + table.column_names()))
    for i, pid in enumerate(table.row_ids):
        rows.append("\t".join([pid] + [repr(float(v)) for v in table.values[i]]))
    write_text_atomic(path, "\n".join(rows) + "\n")


def load_feature_table(path: str) -> FeatureTable:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    degenerate: frozenset[str] = frozenset()
    start = 0
    if lines and lines[0].startswith("#degenerate="):
        raw = lines[0][len("#degenerate=") :]
        degenerate = frozenset(raw.split(",")) if raw else frozenset()
        start = 1
    if start >= len(lines):
        raise DataError(f"{path}: missing header")
    header = lines[start].split("\t")
    if not header or header[0] != "post_id":
        raise DataError(f"{path}: first header column must be post_id")
    columns = tuple(ColumnDesc.from_name(name) for name in header[1:])
    row_ids = []
    values = []
    for lineno, line in enumerate(lines[start + 1 :], start=start + 2):
        parts = line.split("\t")
        if len(parts) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} columns, got {len(parts)}")
        row_ids.append(parts[0])
        try:
            values.append([float(x) for x in parts[1:]])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
    matrix = np.array(values, dtype=np.float64).reshape(len(row_ids), len(columns))
    return FeatureTable(
        row_ids=tuple(row_ids), columns=columns, values=matrix, degenerate_ids=degenerate
    )
