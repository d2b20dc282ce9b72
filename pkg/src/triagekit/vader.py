"""Rule-based valence scoring of single sentences.

A from-scratch implementation of the classic lexicon-plus-heuristics
sentiment algorithm: token valences from a lexicon, adjusted for boosters
and dampeners, negation (including "n't" contractions), all-caps emphasis,
special-case idioms, "least"/"never so" constructions, contrastive "but"
clauses, and exclamation/question-mark amplification. The exact behavior —
including its quirks around token punctuation stripping and case-sensitive
negation — is locked by a committed fixture battery scored with a widely
used reference implementation.
"""

from __future__ import annotations

import math
import re
import string
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

from .errors import LexiconFormatError

B_INCR = 0.293
B_DECR = -0.293
#: empirically derived emphasis bump for an all-caps word amid mixed case
C_INCR = 0.733
N_SCALAR = -0.74
ALPHA = 15.0

#: Punctuation strings that may cling to a word without hiding it from the
#: lexicon. A token is reduced to its punctuation-free core only when it is
#: exactly core+p or p+core for a single p in this list, so "happy!!!!"
#: (four marks) stays opaque while "happy!!!" resolves.
PUNC_LIST = (
    ".", "!", "?", ",", ";", ":", "-", "'", '"',
    "!!", "!!!", "??", "???", "?!?", "!?!", "?!?!", "!?!?",
)

NEGATE = frozenset(
    [
        "aint", "arent", "cannot", "cant", "couldnt", "darent", "didnt", "doesnt",
        "ain't", "aren't", "can't", "couldn't", "daren't", "didn't", "doesn't",
        "dont", "hadnt", "hasnt", "havent", "isnt", "mightnt", "mustnt", "neither",
        "don't", "hadn't", "hasn't", "haven't", "isn't", "mightn't", "mustn't",
        "neednt", "needn't", "never", "none", "nope", "nor", "not", "nothing",
        "nowhere", "oughtnt", "shant", "shouldnt", "uhuh", "wasnt", "werent",
        "oughtn't", "shan't", "shouldn't", "uh-uh", "wasn't", "weren't",
        "without", "wont", "wouldnt", "won't", "wouldn't", "rarely", "seldom", "despite",
    ]
)

BOOSTER_DICT: Mapping[str, float] = {
    "absolutely": B_INCR, "amazingly": B_INCR, "awfully": B_INCR, "completely": B_INCR,
    "considerably": B_INCR, "decidedly": B_INCR, "deeply": B_INCR, "effing": B_INCR,
    "enormously": B_INCR, "entirely": B_INCR, "especially": B_INCR, "exceptionally": B_INCR,
    "extremely": B_INCR, "fabulously": B_INCR, "flipping": B_INCR, "flippin": B_INCR,
    "fricking": B_INCR, "frickin": B_INCR, "frigging": B_INCR, "friggin": B_INCR,
    "fully": B_INCR, "fucking": B_INCR, "greatly": B_INCR, "hella": B_INCR,
    "highly": B_INCR, "hugely": B_INCR, "incredibly": B_INCR, "intensely": B_INCR,
    "majorly": B_INCR, "more": B_INCR, "most": B_INCR, "particularly": B_INCR,
    "purely": B_INCR, "quite": B_INCR, "really": B_INCR, "remarkably": B_INCR,
    "so": B_INCR, "substantially": B_INCR, "thoroughly": B_INCR, "totally": B_INCR,
    "tremendously": B_INCR, "uber": B_INCR, "unbelievably": B_INCR, "unusually": B_INCR,
    "utterly": B_INCR, "very": B_INCR,
    "almost": B_DECR, "barely": B_DECR, "hardly": B_DECR, "just enough": B_DECR,
    "kind of": B_DECR, "kinda": B_DECR, "kindof": B_DECR, "kind-of": B_DECR,
    "less": B_DECR, "little": B_DECR, "marginally": B_DECR, "occasionally": B_DECR,
    "partly": B_DECR, "scarcely": B_DECR, "slightly": B_DECR, "somewhat": B_DECR,
    "sort of": B_DECR, "sorta": B_DECR, "sortof": B_DECR, "sort-of": B_DECR,
}

#: n-gram overrides keyed by raw (case-sensitive) space-joined token windows
SPECIAL_CASE_IDIOMS: Mapping[str, float] = {
    "the shit": 3.0,
    "the bomb": 3.0,
    "bad ass": 1.5,
    "yeah right": -2.0,
    "cut the mustard": 2.0,
    "kiss of death": -1.5,
    "hand to mouth": -2.0,
}


@dataclass(frozen=True)
class SentimentScores:
    """Proportional pos/neg/neu plus the normalized compound in [-1, 1]."""

    pos: float
    neg: float
    neu: float
    compound: float


@dataclass(frozen=True)
class ValenceLexicon:
    """Token valences plus the booster and negation vocabularies."""

    valence: Mapping[str, float]
    boosters: Mapping[str, float] = field(default=None)  # type: ignore[assignment]
    negations: frozenset = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.boosters is None:
            object.__setattr__(self, "boosters", BOOSTER_DICT)
        if self.negations is None:
            object.__setattr__(self, "negations", NEGATE)


def parse_valence_lexicon(text: str, origin: str = "<string>") -> ValenceLexicon:
    """Parse `token<TAB>valence` lines into a ValenceLexicon."""
    valence: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise LexiconFormatError(f"{origin}:{lineno}: expected 2 columns, got {len(parts)}")
        token, raw_value = parts
        if not token:
            raise LexiconFormatError(f"{origin}:{lineno}: empty token")
        try:
            value = float(raw_value)
        except ValueError:
            raise LexiconFormatError(f"{origin}:{lineno}: bad valence {raw_value!r}") from None
        if not -4.0 <= value <= 4.0:
            raise LexiconFormatError(f"{origin}:{lineno}: valence {value} outside [-4, 4]")
        valence[token] = value
    return ValenceLexicon(valence=valence)


def load_valence_lexicon(path: str) -> ValenceLexicon:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_valence_lexicon(fh.read(), origin=path)


@lru_cache(maxsize=1)
def packaged_valence_lexicon() -> ValenceLexicon:
    """The valence lexicon shipped with the package."""
    from .ioutil import read_package_data

    return parse_valence_lexicon(read_package_data("vader_valence.tsv"), origin="vader_valence.tsv")


# --- token preparation -----------------------------------------------------

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def _strip_core(token: str) -> str:
    core = token.translate(_PUNCT_TABLE)
    if len(core) > 1 and any(token == p + core or token == core + p for p in PUNC_LIST):
        return core
    return token


def words_and_emoticons(text: str) -> list[str]:
    """Tokens of length > 1, reduced to their core when a single clinging
    punctuation string from PUNC_LIST surrounds it."""
    tokens = [t for t in re.split(r"\s", text) if len(t) > 1]
    return [_strip_core(t) for t in tokens]


def _is_upper(word: str) -> bool:
    has_cap = False
    for ch in word:
        if "a" <= ch <= "z":
            return False
        if "A" <= ch <= "Z":
            has_cap = True
    return has_cap


def _allcap_differential(words: Sequence[str]) -> bool:
    n_caps = sum(1 for w in words if _is_upper(w))
    return 0 < len(words) - n_caps < len(words)


# --- rule helpers ----------------------------------------------------------


def _negated(raw_words: Sequence[str], negations: frozenset) -> bool:
    for word in raw_words:
        if word in negations or "n't" in word:
            return True
    for i, word in enumerate(raw_words):
        if word == "least":
            return i > 0 and raw_words[i - 1] != "at"
    return False


def _scalar_inc_dec(word: str, valence: float, is_cap_diff: bool, boosters: Mapping[str, float]) -> float:
    scalar = boosters.get(word.lower())
    if scalar is None:
        return 0.0
    if valence < 0:
        scalar *= -1
    if is_cap_diff and _is_upper(word):
        scalar += C_INCR if valence > 0 else -C_INCR
    return scalar


def _never_check(valence: float, words: Sequence[str], start_i: int, index: int, negations: frozenset) -> float:
    if start_i == 0:
        if _negated([words[index - 1]], negations):
            valence *= N_SCALAR
    elif start_i == 1:
        if words[index - 2] == "never" and words[index - 1] in ("so", "this"):
            valence *= 1.5
        elif _negated([words[index - 2]], negations):
            valence *= N_SCALAR
    elif start_i == 2:
        if (words[index - 3] == "never" and words[index - 2] in ("so", "this")) or words[
            index - 1
        ] in ("so", "this"):
            valence *= 1.25
        elif _negated([words[index - 3]], negations):
            valence *= N_SCALAR
    return valence


def _idioms_check(valence: float, words: Sequence[str], index: int, boosters: Mapping[str, float]) -> float:
    onezero = f"{words[index - 1]} {words[index]}"
    twoonezero = f"{words[index - 2]} {words[index - 1]} {words[index]}"
    twoone = f"{words[index - 2]} {words[index - 1]}"
    threetwoone = f"{words[index - 3]} {words[index - 2]} {words[index - 1]}"
    threetwo = f"{words[index - 3]} {words[index - 2]}"
    for sequence in (onezero, twoonezero, twoone, threetwoone, threetwo):
        if sequence in SPECIAL_CASE_IDIOMS:
            valence = SPECIAL_CASE_IDIOMS[sequence]
            break
    if len(words) - 1 > index:
        zeroone = f"{words[index]} {words[index + 1]}"
        if zeroone in SPECIAL_CASE_IDIOMS:
            valence = SPECIAL_CASE_IDIOMS[zeroone]
    if len(words) - 1 > index + 1:
        zeroonetwo = f"{words[index]} {words[index + 1]} {words[index + 2]}"
        if zeroonetwo in SPECIAL_CASE_IDIOMS:
            valence = SPECIAL_CASE_IDIOMS[zeroonetwo]
    if threetwo in boosters or twoone in boosters:
        valence += B_DECR
    return valence


def _least_check(valence: float, words: Sequence[str], index: int, lex: ValenceLexicon) -> float:
    if (
        index > 1
        and words[index - 1].lower() == "least"
        and words[index - 1].lower() not in lex.valence
    ):
        if words[index - 2].lower() not in ("at", "very"):
            valence *= N_SCALAR
    elif (
        index > 0
        and words[index - 1].lower() == "least"
        and words[index - 1].lower() not in lex.valence
    ):
        valence *= N_SCALAR
    return valence


def _but_check(words: Sequence[str], sentiments: list[float]) -> list[float]:
    try:
        but_index = list(words).index("but")
    except ValueError:
        try:
            but_index = list(words).index("BUT")
        except ValueError:
            return sentiments
    return [
        s * 0.5 if i < but_index else s * 1.5 if i > but_index else s
        for i, s in enumerate(sentiments)
    ]


def _sentiment_valence(
    lex: ValenceLexicon, words: Sequence[str], is_cap_diff: bool, item: str, index: int
) -> float:
    item_lower = item.lower()
    if item_lower not in lex.valence:
        return 0.0
    valence = lex.valence[item_lower]
    if _is_upper(item) and is_cap_diff:
        valence += C_INCR if valence > 0 else -C_INCR
    for start_i in range(3):
        if index > start_i and words[index - (start_i + 1)].lower() not in lex.valence:
            scalar = _scalar_inc_dec(words[index - (start_i + 1)], valence, is_cap_diff, lex.boosters)
            if start_i == 1 and scalar != 0:
                scalar *= 0.95
            elif start_i == 2 and scalar != 0:
                scalar *= 0.9
            valence += scalar
            valence = _never_check(valence, words, start_i, index, lex.negations)
            if start_i == 2:
                valence = _idioms_check(valence, words, index, lex.boosters)
    return _least_check(valence, words, index, lex)


# --- amplification and assembly --------------------------------------------


def _normalize(score: float) -> float:
    norm = score / math.sqrt(score * score + ALPHA)
    return max(-1.0, min(1.0, norm))


def _punctuation_emphasis(text: str) -> float:
    ep_count = min(text.count("!"), 4)
    qm_count = text.count("?")
    qm_amplifier = 0.0
    if qm_count > 1:
        qm_amplifier = qm_count * 0.18 if qm_count <= 3 else 0.96
    return ep_count * 0.292 + qm_amplifier


def vader_sentence(sentence: str, lex: ValenceLexicon) -> SentimentScores:
    """Score one sentence; empty/unscorable input gives all-zero scores."""
    words = words_and_emoticons(sentence)
    is_cap_diff = _allcap_differential(words)
    sentiments: list[float] = []
    for index, item in enumerate(words):
        if (
            index < len(words) - 1
            and item.lower() == "kind"
            and words[index + 1].lower() == "of"
        ) or item.lower() in lex.boosters:
            sentiments.append(0.0)
            continue
        sentiments.append(_sentiment_valence(lex, words, is_cap_diff, item, index))
    sentiments = _but_check(words, sentiments)

    if not sentiments:
        return SentimentScores(pos=0.0, neg=0.0, neu=0.0, compound=0.0)

    sum_s = sum(sentiments)
    amplifier = _punctuation_emphasis(sentence)
    if sum_s > 0:
        sum_s += amplifier
    elif sum_s < 0:
        sum_s -= amplifier
    compound = _normalize(sum_s)

    pos_sum = 0.0
    neg_sum = 0.0
    neu_count = 0
    for s in sentiments:
        if s > 0:
            pos_sum += s + 1
        elif s < 0:
            neg_sum += s - 1
        else:
            neu_count += 1
    if pos_sum > abs(neg_sum):
        pos_sum += amplifier
    elif pos_sum < abs(neg_sum):
        neg_sum -= amplifier
    total = pos_sum + abs(neg_sum) + neu_count
    return SentimentScores(
        pos=round(abs(pos_sum / total), 3),
        neg=round(abs(neg_sum / total), 3),
        neu=round(abs(neu_count / total), 3),
        compound=round(compound, 4),
    )
