"""Shared tokenization used by category features, the stub encoder, and masking.

One rule everywhere: split on whitespace, then strip leading/trailing
punctuation from each chunk. Apostrophes inside a token survive (they are
never leading/trailing), so contractions stay intact. Chunks that are pure
punctuation produce no token.

Masking needs to rebuild the original text with one token swapped out, so the
span variant reports the [start, end) offsets of each token core in the
source string; surrounding punctuation is left in place when a core is
replaced.
"""

from __future__ import annotations

import re
import string
from typing import NamedTuple

_PUNCT = string.punctuation
_CHUNK = re.compile(r"\S+")


class TokenSpan(NamedTuple):
    text: str
    start: int
    end: int


def tokenize_with_spans(text: str) -> list[TokenSpan]:
    """Tokens plus their core offsets in ``text``."""
    out = []
    for m in _CHUNK.finditer(text):
        chunk = m.group()
        core = chunk.strip(_PUNCT)
        if not core:
            continue
        lead = len(chunk) - len(chunk.lstrip(_PUNCT))
        start = m.start() + lead
        out.append(TokenSpan(core, start, start + len(core)))
    return out


def tokenize(text: str) -> list[str]:
    """Token cores only."""
    out = []
    for chunk in text.split():
        core = chunk.strip(_PUNCT)
        if core:
            out.append(core)
    return out


def replace_span(text: str, span: TokenSpan, replacement: str) -> str:
    """Rebuild ``text`` with one token core swapped for ``replacement``."""
    return text[: span.start] + replacement + text[span.end :]
