"""Data model for triage corpora: posts, labels, cleaning, and loading.

A corpus is a list of forum posts, each with a raw body, a cleaned body
(quotes and URLs removed), and a deterministic sentence segmentation.
Labels carry a coarse urgency class (green < amber < red < crisis) and an
optional granular tag; a LabelMap sends granular tags to coarse classes.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, Mapping, Optional, Sequence

from .errors import ConfigError, CorpusFormatError, DataError, UnknownLabelError
from .ioutil import escape_field, unescape_field, write_text_atomic
from .seeds import rng_for

SPLIT_TAGS = ("train", "test", "external")

CORPUS_COLUMNS = ("id", "thread_id", "split", "coarse", "granular", "body")

#: Dotted abbreviations that do not end a sentence. Single letters followed
#: by a period ("J. Smith") are suppressed by rule and need not be listed.
ABBREVIATIONS = frozenset(
    [
        "dr.",
        "mr.",
        "mrs.",
        "ms.",
        "prof.",
        "rev.",
        "sr.",
        "jr.",
        "st.",
        "vs.",
        "etc.",
        "e.g.",
        "i.e.",
        "cf.",
        "ca.",
        "approx.",
        "dept.",
        "fig.",
        "ph.d.",
        "a.m.",
        "p.m.",
        "u.s.",
        "u.k.",
    ]
)


class CoarseLabel(IntEnum):
    """Ordinal urgency classes, least to most urgent."""

    GREEN = 0
    AMBER = 1
    RED = 2
    CRISIS = 3

    @classmethod
    def from_name(cls, name: str) -> "CoarseLabel":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise UnknownLabelError(
                f"unknown coarse label {name!r}; expected one of "
                f"{', '.join(m.name.lower() for m in cls)}"
            ) from None

    @property
    def tag(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class TriageLabel:
    """A coarse class plus an optional granular tag ('' when absent)."""

    coarse: CoarseLabel
    granular: str = ""


@dataclass(frozen=True)
class LabelMap:
    """Total mapping from granular tags to coarse classes."""

    entries: Mapping[str, CoarseLabel]

    def __contains__(self, granular: str) -> bool:
        return granular in self.entries


def map_label(granular: str, label_map: LabelMap) -> CoarseLabel:
    """Resolve a granular tag to its coarse class.

    Raises UnknownLabelError (naming the tag) when the map has no entry.
    """
    try:
        return label_map.entries[granular]
    except KeyError:
        raise UnknownLabelError(f"granular tag {granular!r} is not in the label map") from None


def parse_labelmap(text: str, origin: str = "<string>") -> LabelMap:
    """Parse two-column `granular<TAB>coarse` lines (no header)."""
    entries: dict[str, CoarseLabel] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise CorpusFormatError(f"{origin}:{lineno}: expected 2 columns, got {len(parts)}")
        granular, coarse = parts
        if not granular:
            raise CorpusFormatError(f"{origin}:{lineno}: empty granular tag")
        if granular in entries:
            raise CorpusFormatError(f"{origin}:{lineno}: duplicate granular tag {granular!r}")
        entries[granular] = CoarseLabel.from_name(coarse)
    return LabelMap(entries)


def load_labelmap(path: str) -> LabelMap:
    """Read a two-column TSV `granular<TAB>coarse` (no header)."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_labelmap(fh.read(), origin=path)


def packaged_labelmap() -> LabelMap:
    """The demo granular->coarse map shipped with the package."""
    from .ioutil import read_package_data

    return parse_labelmap(read_package_data("granular_map_default.tsv"), origin="granular_map_default.tsv")


def save_labelmap(label_map: LabelMap, path: str) -> None:
    lines = [f"{tag}\t{coarse.tag}" for tag, coarse in label_map.entries.items()]
    write_text_atomic(path, "\n".join(lines) + ("\n" if lines else ""))


@dataclass(frozen=True)
class Post:
    """One forum post; body_clean and sentences are derived from body_raw."""

    id: str
    body_raw: str
    body_clean: str
    sentences: tuple[str, ...]
    thread_id: str = ""

    @property
    def degenerate(self) -> bool:
        """True when stripping left no usable text (zero sentences)."""
        return not self.sentences


def make_post(post_id: str, body_raw: str, thread_id: str = "") -> Post:
    clean = strip_markup(body_raw)
    return Post(
        id=post_id,
        body_raw=body_raw,
        body_clean=clean,
        sentences=tuple(split_sentences(clean)),
        thread_id=thread_id,
    )


@dataclass
class Corpus:
    """Posts plus partial label and split assignments, keyed by post id."""

    posts: tuple[Post, ...]
    labels: dict[str, TriageLabel] = field(default_factory=dict)
    split: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        id_set: set[str] = set()
        for post in self.posts:
            if post.id in id_set:
                raise CorpusFormatError(f"duplicate post id {post.id!r}")
            id_set.add(post.id)
        for pid in self.labels:
            if pid not in id_set:
                raise DataError(f"label references missing post id {pid!r}")
        for pid, tag in self.split.items():
            if pid not in id_set:
                raise DataError(f"split tag references missing post id {pid!r}")
            if tag not in SPLIT_TAGS:
                raise DataError(
                    f"bad split tag {tag!r} for post {pid!r}; expected one of {SPLIT_TAGS}"
                )
        for pid in self.labels:
            if pid not in self.split:
                raise DataError(f"labeled post {pid!r} has no split assignment")

    def __len__(self) -> int:
        return len(self.posts)

    def __iter__(self) -> Iterator[Post]:
        return iter(self.posts)

    def by_id(self) -> dict[str, Post]:
        return {post.id: post for post in self.posts}

    def get(self, post_id: str) -> Post:
        try:
            return self.by_id()[post_id]
        except KeyError:
            raise KeyError(f"no post with id {post_id!r}") from None

    def labeled_posts(self, split: Optional[str] = None) -> list[Post]:
        """Posts that carry a label, optionally restricted to one split."""
        out = []
        for post in self.posts:
            if post.id not in self.labels:
                continue
            if split is not None and self.split.get(post.id) != split:
                continue
            out.append(post)
        return out

    def class_counts(self, split: Optional[str] = None) -> dict[CoarseLabel, int]:
        counts = {c: 0 for c in CoarseLabel}
        for post in self.labeled_posts(split):
            counts[self.labels[post.id].coarse] += 1
        return counts


# --- text cleaning ---------------------------------------------------------

_BLOCKQUOTE_RE = re.compile(r"<blockquote\b[^>]*>.*?</blockquote\s*>", re.IGNORECASE | re.DOTALL)
_BLOCKQUOTE_TAG_RE = re.compile(r"</?blockquote\b[^>]*>", re.IGNORECASE)
_URL_RE = re.compile(r"(?:\b[A-Za-z][A-Za-z0-9+.-]*://[^\s<>]*|\bwww\.[^\s<>]*)")


def strip_markup(body_raw: str) -> str:
    """Remove quoted material and URL tokens; normalize whitespace.

    Quote blocks are HTML <blockquote> elements (content included) and any
    line whose first non-blank character is '>'. URLs are scheme://... and
    www.... tokens. Runs of blanks collapse to single spaces, line breaks
    survive as single newlines, and emptied lines are dropped, so the result
    is stable under a second application.
    """
    text = body_raw
    while True:
        text, n = _BLOCKQUOTE_RE.subn(" ", text)
        if n == 0:
            break
    text = _BLOCKQUOTE_TAG_RE.sub(" ", text)
    text = _URL_RE.sub(" ", text)
    lines = []
    for line in text.splitlines():
        line = " ".join(line.split())
        if not line or line.startswith(">"):
            continue
        lines.append(line)
    return "\n".join(lines)


_TERMINALS = ".!?"
_CLOSERS = "\"')]"
_SINGLE_INITIAL_RE = re.compile(r"^[a-z]\.$")


def _abbrev_before(text: str, dot_index: int) -> bool:
    """True when the token ending at text[dot_index] is a known abbreviation."""
    start = dot_index
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    chunk = text[start : dot_index + 1].lstrip("\"'([{").lower()
    return chunk in ABBREVIATIONS or bool(_SINGLE_INITIAL_RE.match(chunk))


def split_sentences(body_clean: str) -> list[str]:
    """Split cleaned text into sentences.

    Boundaries fall after runs of terminal punctuation (. ! ?) — plus any
    closing quotes/brackets — that are followed by whitespace, and at hard
    newlines. A lone period does not split after an entry of ABBREVIATIONS
    or after a single-letter initial. Only whitespace is discarded: joining
    the sentences reproduces every non-blank character in order.
    """
    sentences: list[str] = []

    def flush(span: str) -> None:
        span = span.strip()
        if span:
            sentences.append(span)

    n = len(body_clean)
    start = 0
    i = 0
    while i < n:
        ch = body_clean[i]
        if ch == "\n":
            flush(body_clean[start:i])
            i += 1
            start = i
        elif ch in _TERMINALS:
            run_end = i
            while run_end + 1 < n and body_clean[run_end + 1] in _TERMINALS:
                run_end += 1
            close_end = run_end
            while close_end + 1 < n and body_clean[close_end + 1] in _CLOSERS:
                close_end += 1
            nxt = close_end + 1
            if nxt < n and body_clean[nxt].isspace():
                single_dot = ch == "." and run_end == i
                if single_dot and _abbrev_before(body_clean, i):
                    i += 1
                else:
                    flush(body_clean[start : close_end + 1])
                    start = nxt
                    i = nxt
            else:
                i = nxt if nxt > i else i + 1
        else:
            i += 1
    flush(body_clean[start:])
    return sentences


# --- canonical corpus file -------------------------------------------------


def load_corpus(path: str, schema: Optional[Mapping[str, str]] = None) -> Corpus:
    """Read the canonical tab-separated corpus file.

    `schema` optionally maps the canonical column roles (id, thread_id,
    split, coarse, granular, body) to the column names actually present in
    the file's header; by default the canonical names are expected.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CorpusFormatError(f"{path}: empty file (missing header)")
    header = lines[0].split("\t")
    roles = dict(schema) if schema else {}
    col_index: dict[str, int] = {}
    for role in CORPUS_COLUMNS:
        name = roles.get(role, role)
        try:
            col_index[role] = header.index(name)
        except ValueError:
            raise CorpusFormatError(f"{path}: header is missing column {name!r}") from None

    posts: list[Post] = []
    labels: dict[str, TriageLabel] = {}
    split: dict[str, str] = {}
    seen_ids: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != len(header):
            raise CorpusFormatError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(parts)}"
            )
        post_id = parts[col_index["id"]]
        if not post_id:
            raise CorpusFormatError(f"{path}:{lineno}: empty post id")
        if post_id in seen_ids:
            raise CorpusFormatError(f"{path}:{lineno}: duplicate post id {post_id!r}")
        seen_ids.add(post_id)
        body = unescape_field(parts[col_index["body"]])
        posts.append(make_post(post_id, body, thread_id=parts[col_index["thread_id"]]))
        coarse_name = parts[col_index["coarse"]]
        granular = parts[col_index["granular"]]
        split_tag = parts[col_index["split"]]
        if coarse_name:
            labels[post_id] = TriageLabel(CoarseLabel.from_name(coarse_name), granular)
            if not split_tag:
                raise CorpusFormatError(
                    f"{path}:{lineno}: labeled post {post_id!r} has no split tag"
                )
        elif granular:
            raise CorpusFormatError(
                f"{path}:{lineno}: granular tag {granular!r} without a coarse label"
            )
        if split_tag:
            if split_tag not in SPLIT_TAGS:
                raise CorpusFormatError(
                    f"{path}:{lineno}: bad split tag {split_tag!r}; "
                    f"expected one of {SPLIT_TAGS}"
                )
            split[post_id] = split_tag
    return Corpus(posts=tuple(posts), labels=labels, split=split)


def save_corpus(corpus: Corpus, path: str) -> None:
    """Write the canonical tab-separated corpus file (see load_corpus)."""
    rows = ["\t".join(CORPUS_COLUMNS)]
    for post in corpus.posts:
        label = corpus.labels.get(post.id)
        rows.append(
            "\t".join(
                [
                    post.id,
                    post.thread_id,
                    corpus.split.get(post.id, ""),
                    label.coarse.tag if label else "",
                    label.granular if label else "",
                    escape_field(post.body_raw),
                ]
            )
        )
    write_text_atomic(path, "\n".join(rows) + "\n")


# --- synthetic corpora -----------------------------------------------------

#: Urgency-class proportions observed in the labeled benchmark forum data;
#: used as the default mixing weights for synthetic fixture corpora.
BENCHMARK_CLASS_PROPORTIONS: tuple[float, float, float, float] = (
    0.586,
    0.256,
    0.117,
    0.052,
)

#: Class-indicative vocabulary planted into generated posts. The lists are
#: chosen so that the packaged category lexicon and the packaged valence
#: lexicon can each tell the classes apart: every class hits a distinct
#: category, and under the valence lexicon green posts read purely positive,
#: amber posts mix positive and negative words, red posts read purely
#: negative, and crisis posts are valence-silent (farewell/method language
#: carries no valence entry).
DEFAULT_PLANTED_LEXICON: dict[CoarseLabel, tuple[str, ...]] = {
    CoarseLabel.GREEN: ("grateful", "calm", "improving", "hopeful", "relief"),
    CoarseLabel.AMBER: ("worried", "anxious", "restless", "hopeful", "calm"),
    CoarseLabel.RED: ("desperate", "panicking", "frantic"),
    CoarseLabel.CRISIS: ("overdose", "goodbye", "ending", "farewell", "pills"),
}

_FILLER_WORDS = (
    "the",
    "morning",
    "window",
    "garden",
    "tea",
    "walk",
    "room",
    "kitchen",
    "table",
    "street",
    "later",
    "today",
    "evening",
    "weather",
    "book",
    "letter",
    "bus",
    "shift",
    "week",
    "again",
)

_GRANULAR_SUFFIXES = string.ascii_uppercase


def default_granular_map(granular_per_class: int = 2) -> LabelMap:
    """LabelMap covering the tags gen_synthetic emits."""
    entries: dict[str, CoarseLabel] = {}
    for coarse in CoarseLabel:
        for k in range(granular_per_class):
            entries[f"{coarse.tag}{_GRANULAR_SUFFIXES[k]}"] = coarse
    return LabelMap(entries)


def gen_synthetic(
    seed: int,
    n: int,
    class_probs: Sequence[float],
    planted_lexicon: Optional[Mapping[CoarseLabel, Sequence[str]]] = None,
    *,
    granular_per_class: int = 2,
    test_fraction: float = 0.25,
) -> Corpus:
    """Generate a fully labeled corpus with class-indicative planted words.

    `class_probs` gives one positive weight per coarse class (green, amber,
    red, crisis), normalized internally. Every sentence mixes a few neutral
    filler words with a majority of planted words drawn from the post's
    class, so class-indicative vocabulary dominates each sentence. Output is
    a pure function of the arguments.
    """
    probs = _check_probs(class_probs)
    if n < 0:
        raise ConfigError(f"post count must be >= 0, got {n}")
    if not 0.0 <= test_fraction <= 1.0:
        raise ConfigError(f"test fraction must be in [0, 1], got {test_fraction}")
    if not 1 <= granular_per_class <= len(_GRANULAR_SUFFIXES):
        raise ConfigError(f"granular_per_class must be in 1..26, got {granular_per_class}")
    lexicon = dict(DEFAULT_PLANTED_LEXICON if planted_lexicon is None else planted_lexicon)
    for coarse in CoarseLabel:
        if not lexicon.get(coarse):
            raise ConfigError(f"planted lexicon has no words for class {coarse.tag!r}")

    rng = rng_for(seed, "gen_synthetic")
    classes = list(CoarseLabel)
    posts: list[Post] = []
    labels: dict[str, TriageLabel] = {}
    split: dict[str, str] = {}
    for i in range(n):
        coarse = classes[int(rng.choice(len(classes), p=probs))]
        suffix = _GRANULAR_SUFFIXES[int(rng.integers(granular_per_class))]
        body = _synthesize_body(rng, lexicon[coarse])
        post_id = f"p{i:05d}"
        posts.append(make_post(post_id, body, thread_id=f"t{i // 3:04d}"))
        labels[post_id] = TriageLabel(coarse, f"{coarse.tag}{suffix}")
        split[post_id] = "test" if rng.random() < test_fraction else "train"
    return Corpus(posts=tuple(posts), labels=labels, split=split)


def _check_probs(class_probs: Sequence[float]) -> list[float]:
    probs = [float(p) for p in class_probs]
    if len(probs) != len(CoarseLabel):
        raise ConfigError(f"expected {len(CoarseLabel)} class weights, got {len(probs)}")
    if any(p != p or p < 0.0 for p in probs):
        raise ConfigError(f"class weights must be non-negative reals, got {probs}")
    total = sum(probs)
    if total <= 0.0:
        raise ConfigError("class weights sum to zero")
    return [p / total for p in probs]


def _synthesize_body(rng, planted: Sequence[str]) -> str:
    n_sentences = int(rng.integers(2, 5))
    sentences = []
    for _ in range(n_sentences):
        words = [_FILLER_WORDS[int(rng.integers(len(_FILLER_WORDS)))] for _ in range(int(rng.integers(2, 6)))]
        for _ in range(int(rng.integers(4, 9))):
            word = planted[int(rng.integers(len(planted)))]
            pos = int(rng.integers(len(words) + 1))
            words.insert(pos, word)
        sentence = " ".join(words) + "."
        sentences.append(sentence[0].upper() + sentence[1:])
    sep = "\n" if n_sentences > 1 and rng.random() < 0.1 else " "
    return sep.join(sentences)
