r"""Reader for the tab-separated triage corpus exchange format.

One header line names the columns; six are required — ``id``,
``thread_id``, ``split``, ``coarse``, ``granular``, ``body`` — in any
order, and unknown extra columns are ignored. Every data row must have
exactly as many fields as the header. Post ids must be non-empty and
unique. The body field stores the raw post text on one line with ``\\``,
``\t`` and ``\n`` escapes (strict: any other backslash sequence is an
error). A row with a coarse label (``green``, ``amber``, ``red`` or
``crisis``, case-insensitive) must also carry a split tag (one of
``train``, ``test``, ``external``); a granular tag without a coarse label
is an error. Unlabeled rows leave those fields empty.

This module deliberately enforces the same rules as the training side's
loader so that a corpus file is either accepted by both programs or
rejected by both.

Sentence-level consumers (extraction, embedding verification) need each
post's deterministic sentence list, so :func:`parse_corpus_file` applies
the cleaning and segmentation rules from :mod:`.textrules` up front.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CorpusError
from .textrules import clean_body, split_sentences

REQUIRED_COLUMNS = ("id", "thread_id", "split", "coarse", "granular", "body")

SPLIT_TAGS = ("train", "test", "external")

#: Coarse urgency classes; matched case-insensitively after stripping blanks.
COARSE_NAMES = ("green", "amber", "red", "crisis")


def unescape_body(text: str) -> str:
    r"""Decode the single-line body encoding (\\ \t \n), strictly."""
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= n:
            raise CorpusError("dangling escape at end of body field")
        nxt = text[i + 1]
        if nxt == "\\":
            out.append("\\")
        elif nxt == "t":
            out.append("\t")
        elif nxt == "n":
            out.append("\n")
        else:
            raise CorpusError(f"unknown escape sequence \\{nxt} in body field")
        i += 2
    return "".join(out)


@dataclass(frozen=True)
class PostText:
    """One post's identity and derived sentence segmentation."""

    id: str
    body_raw: str
    body_clean: str
    sentences: tuple[str, ...]

    @property
    def degenerate(self) -> bool:
        """True when cleaning leaves no sentences to embed."""
        return not self.sentences


@dataclass(frozen=True)
class CorpusText:
    """All posts of a corpus file, in file order."""

    path: str
    posts: tuple[PostText, ...]
    by_id: dict[str, PostText] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "by_id", {post.id: post for post in self.posts})

    def __len__(self) -> int:
        return len(self.posts)

    def __iter__(self):
        return iter(self.posts)

    def total_sentences(self) -> int:
        return sum(len(post.sentences) for post in self.posts)


def parse_corpus_file(path: str) -> CorpusText:
    """Read and validate a corpus file; raise CorpusError with file:line."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CorpusError(f"{path}: empty file (missing header)")
    header = lines[0].split("\t")
    columns: dict[str, int] = {}
    for name in REQUIRED_COLUMNS:
        try:
            columns[name] = header.index(name)
        except ValueError:
            raise CorpusError(f"{path}: header is missing column {name!r}") from None

    posts: list[PostText] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != len(header):
            raise CorpusError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(parts)}"
            )
        post_id = parts[columns["id"]]
        if not post_id:
            raise CorpusError(f"{path}:{lineno}: empty post id")
        if post_id in seen:
            raise CorpusError(f"{path}:{lineno}: duplicate post id {post_id!r}")
        seen.add(post_id)
        try:
            body_raw = unescape_body(parts[columns["body"]])
        except CorpusError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from None
        coarse = parts[columns["coarse"]]
        granular = parts[columns["granular"]]
        split_tag = parts[columns["split"]]
        if coarse:
            if coarse.strip().lower() not in COARSE_NAMES:
                raise CorpusError(
                    f"{path}:{lineno}: unknown coarse label {coarse!r}; "
                    f"expected one of {COARSE_NAMES}"
                )
            if not split_tag:
                raise CorpusError(
                    f"{path}:{lineno}: labeled post {post_id!r} has no split tag"
                )
        elif granular:
            raise CorpusError(
                f"{path}:{lineno}: granular tag {granular!r} without a coarse label"
            )
        if split_tag and split_tag not in SPLIT_TAGS:
            raise CorpusError(
                f"{path}:{lineno}: bad split tag {split_tag!r}; "
                f"expected one of {SPLIT_TAGS}"
            )
        body_clean = clean_body(body_raw)
        posts.append(
            PostText(
                id=post_id,
                body_raw=body_raw,
                body_clean=body_clean,
                sentences=tuple(split_sentences(body_clean)),
            )
        )
    return CorpusText(path=path, posts=tuple(posts))
