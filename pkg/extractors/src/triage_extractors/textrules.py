"""Text preparation rules for the triage corpus exchange format.

The corpus format stores raw post bodies; consumers derive cleaned text and
a deterministic sentence segmentation. Independent implementations must
agree on every derived sentence, so the rules are fixed:

Cleaning
    1. HTML <blockquote> elements are removed with their content — the
       non-greedy match takes each opening tag up to the first closing
       tag, repeatedly — and stray opening/closing blockquote tags are
       then removed on their own.
    2. URL tokens — a scheme://... form or a www.-prefixed form — are
       removed.
    3. Line by line: runs of whitespace collapse to single spaces; lines
       that are empty after collapsing, or whose first character is '>'
       (quoted reply), are dropped. Surviving lines are joined with single
       newlines.

Sentence segmentation
    Boundaries fall after a run of terminal punctuation (. ! ?), plus any
    immediately following closing quotes/brackets (" ' ) ]), when the next
    character is whitespace — and at hard newlines. A lone period does not
    end a sentence when the whitespace-delimited token it closes is a known
    dotted abbreviation or a single lowercase initial ("j."); the
    abbreviation check lowercases the token and ignores leading opening
    quotes/brackets (" ' ( [ {). Sentences are the spans between
    boundaries, stripped of surrounding whitespace; blank spans are
    dropped.

Tokenization
    Split on whitespace; strip leading and trailing punctuation from each
    chunk (every ASCII punctuation character); keep non-empty cores.
    Apostrophes inside a word survive.
"""

from __future__ import annotations

import re
import string

#: Dotted abbreviations that never terminate a sentence. Single lowercase
#: letters followed by a period are suppressed by rule and are not listed.
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

_TERMINALS = ".!?"
_TRAILING_CLOSERS = "\"')]"
_LEADING_OPENERS = "\"'([{"

_QUOTE_ELEMENT = re.compile(
    r"<blockquote\b[^>]*>.*?</blockquote\s*>", re.IGNORECASE | re.DOTALL
)
_QUOTE_TAG = re.compile(r"</?blockquote\b[^>]*>", re.IGNORECASE)
_URL = re.compile(r"(?:\b[A-Za-z][A-Za-z0-9+.-]*://[^\s<>]*|\bwww\.[^\s<>]*)")


def clean_body(raw: str) -> str:
    """Apply the cleaning rules; stable under a second application."""
    text = raw
    while True:
        text, removed = _QUOTE_ELEMENT.subn(" ", text)
        if not removed:
            break
    text = _QUOTE_TAG.sub(" ", text)
    text = _URL.sub(" ", text)
    kept = []
    for line in text.splitlines():
        collapsed = " ".join(line.split())
        if collapsed and not collapsed.startswith(">"):
            kept.append(collapsed)
    return "\n".join(kept)


def _token_is_abbreviation(text: str, dot: int) -> bool:
    """Is the whitespace-delimited token ending at text[dot] an abbreviation?"""
    begin = dot
    while begin > 0 and not text[begin - 1].isspace():
        begin -= 1
    token = text[begin : dot + 1].lstrip(_LEADING_OPENERS).lower()
    if token in ABBREVIATIONS:
        return True
    return len(token) == 2 and token[0] in string.ascii_lowercase and token[1] == "."


def split_sentences(cleaned: str) -> list[str]:
    """Segment cleaned text by the documented boundary rules."""
    out: list[str] = []

    def emit(begin: int, end: int) -> None:
        span = cleaned[begin:end].strip()
        if span:
            out.append(span)

    length = len(cleaned)
    begin = 0
    pos = 0
    while pos < length:
        ch = cleaned[pos]
        if ch == "\n":
            emit(begin, pos)
            pos += 1
            begin = pos
            continue
        if ch not in _TERMINALS:
            pos += 1
            continue
        run = pos
        while run + 1 < length and cleaned[run + 1] in _TERMINALS:
            run += 1
        close = run
        while close + 1 < length and cleaned[close + 1] in _TRAILING_CLOSERS:
            close += 1
        after = close + 1
        if after < length and cleaned[after].isspace():
            if ch == "." and run == pos and _token_is_abbreviation(cleaned, pos):
                pos += 1
            else:
                emit(begin, close + 1)
                begin = after
                pos = after
        else:
            pos = after if after > pos else pos + 1
    emit(begin, length)
    return out


_PUNCTUATION = string.punctuation


def tokenize(text: str) -> list[str]:
    """Whitespace split, then strip edge punctuation; drop empty cores."""
    cores = []
    for chunk in text.split():
        core = chunk.strip(_PUNCTUATION)
        if core:
            cores.append(core)
    return cores
