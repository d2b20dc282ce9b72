"""Small file helpers: atomic writes and TSV body escaping."""

from __future__ import annotations

import os
import tempfile

from .errors import CorpusFormatError


def write_text_atomic(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename into place."""
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


def read_package_data(relpath: str) -> str:
    """Read a text file bundled under triagekit/data/."""
    from importlib.resources import files

    return (files("triagekit") / "data" / relpath).read_text(encoding="utf-8")


def escape_field(text: str) -> str:
    r"""Escape a free-text field for single-line TSV storage (\\, \t, \n)."""
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def unescape_field(text: str) -> str:
    """Inverse of :func:`escape_field`."""
    out = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\":
            if i + 1 >= n:
                raise CorpusFormatError("dangling escape at end of field")
            nxt = text[i + 1]
            if nxt == "\\":
                out.append("\\")
            elif nxt == "t":
                out.append("\t")
            elif nxt == "n":
                out.append("\n")
            else:
                raise CorpusFormatError(f"unknown escape sequence \\{nxt}")
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)
