"""Writer and verifier for the sentence-embedding exchange format.

Layout, line by line:

1. ``#dim=D`` — the vector dimension, a positive integer.
2. ``post_id<TAB>sentence_index<TAB>values`` — fixed column header.
3. Data rows: post id, 0-based sentence index, and ``D`` comma-separated
   decimal reals. Rows are sorted by (post id, sentence index), every
   value is written as its shortest round-trip decimal form, and the file
   ends with a newline.

A file is complete for a corpus when every sentence of every post appears
exactly once (posts whose cleaned body has no sentences contribute no
rows). :func:`verify_embedding_file` checks exactly what the training
side's ingestion checks — no more, no less — so the two programs accept
and reject the same files: header and dimension well-formed, three
columns per row, known post ids, in-range unique sentence indices,
every value numerically parseable, vector lengths equal to the declared
dimension, and full coverage. Violations are reported as findings with
line numbers where a specific line is at fault.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpusfile import CorpusText

_COLUMN_HEADER = ["post_id", "sentence_index", "values"]


@dataclass(frozen=True)
class Finding:
    """One verification failure; ``line`` is None for whole-file findings."""

    path: str
    line: int | None
    message: str

    def __str__(self) -> str:
        if self.line is None:
            return f"{self.path}: {self.message}"
        return f"{self.path}:{self.line}: {self.message}"


def _write_text_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_embedding_file(
    path: str, dim: int, vectors: Mapping[tuple[str, int], Sequence[float]]
) -> None:
    """Write vectors keyed by (post id, sentence index) in canonical order."""
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    rows = [f"#dim={dim}", "\t".join(_COLUMN_HEADER)]
    for post_id, index in sorted(vectors):
        values = vectors[(post_id, index)]
        if len(values) != dim:
            raise ValueError(
                f"vector for ({post_id!r}, {index}) has {len(values)} values, "
                f"expected {dim}"
            )
        joined = ",".join(repr(float(v)) for v in values)
        rows.append(f"{post_id}\t{index}\t{joined}")
    _write_text_atomic(path, "\n".join(rows) + "\n")


def verify_embedding_file(path: str, corpus: CorpusText) -> list[Finding]:
    """Check an embedding file against its corpus; empty list means valid."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    findings: list[Finding] = []
    if not lines or not lines[0].startswith("#dim="):
        findings.append(Finding(path, 1, "missing #dim=D comment line"))
        return findings
    try:
        dim = int(lines[0][len("#dim=") :])
    except ValueError:
        findings.append(Finding(path, 1, f"bad dimension in {lines[0]!r}"))
        return findings
    if dim < 1:
        findings.append(Finding(path, 1, f"dimension must be >= 1, got {dim}"))
        return findings
    if len(lines) < 2 or lines[1].split("\t") != _COLUMN_HEADER:
        findings.append(
            Finding(path, 2, "missing header post_id/sentence_index/values")
        )
        return findings

    seen: set[tuple[str, int]] = set()
    for lineno, line in enumerate(lines[2:], start=3):
        parts = line.split("\t")
        if len(parts) != 3:
            findings.append(
                Finding(path, lineno, f"expected 3 columns, got {len(parts)}")
            )
            continue
        post_id, raw_index, raw_values = parts
        post = corpus.by_id.get(post_id)
        if post is None:
            findings.append(Finding(path, lineno, f"unknown post id {post_id!r}"))
            continue
        try:
            index = int(raw_index)
        except ValueError:
            findings.append(
                Finding(path, lineno, f"bad sentence index {raw_index!r}")
            )
            continue
        if not 0 <= index < len(post.sentences):
            findings.append(
                Finding(
                    path,
                    lineno,
                    f"sentence index {index} out of range for post {post_id!r} "
                    f"with {len(post.sentences)} sentences",
                )
            )
            continue
        key = (post_id, index)
        if key in seen:
            findings.append(Finding(path, lineno, f"duplicate row for {key}"))
            continue
        seen.add(key)
        values = raw_values.split(",")
        try:
            for value in values:
                float(value)
        except ValueError:
            findings.append(Finding(path, lineno, "non-numeric value in vector"))
            continue
        if len(values) != dim:
            findings.append(
                Finding(
                    path,
                    lineno,
                    f"vector has {len(values)} values, expected {dim}",
                )
            )

    for post in corpus.posts:
        for index in range(len(post.sentences)):
            if (post.id, index) not in seen:
                findings.append(
                    Finding(
                        path,
                        None,
                        f"missing vector for post {post.id!r} sentence {index}",
                    )
                )
    return findings
