"""Tokenization shared by the indexer, the query builders and every feature extractor.

Text is lowercased, stopwords are dropped and the remaining words pass through
a light inflectional stemmer (Harman's S-stemmer).  Tokens that look like unit
symbols or identifiers (digits, ``/``, ``^`` or inner capitals such as ``keV``)
bypass the stemmer so ``m/s^2`` and ``keV`` survive intact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import FrozenSet, List, Tuple

STEMMER_NAME = "s-stemmer-v1"

# Connectors are only kept between alphanumerics, so "range." -> "range"
# while "m/s^2", "x-ray", "1.0-10.0" and "A0535+262" stay whole.
TOKEN_RE = re.compile(r"\w+(?:[-/^.+]\w+|\^-\d+)*")
POSSESSIVE_RE = re.compile(r"(?<=\w)['’]s\b")


@dataclass(frozen=True)
class Token:
    surface: str
    stem: str
    position: int


@lru_cache(maxsize=1)
def stopwords() -> FrozenSet[str]:
    text = resources.files("tablesearch.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


def bypasses_stemmer(surface: str) -> bool:
    if any(ch.isdigit() or ch in "/^" for ch in surface):
        return True
    return any(ch.isupper() for ch in surface[1:])


def s_stem(word: str) -> str:
    """Harman S-stemmer; words shorter than four letters are left alone."""
    if len(word) < 4:
        return word
    if word.endswith("ies") and not word.endswith(("eies", "aies")):
        return word[:-3] + "y"
    if word.endswith("es") and not word.endswith(("aes", "ees", "oes")):
        return word[:-1]
    if word.endswith("s") and not word.endswith(("us", "ss")):
        return word[:-1]
    return word


def stem(surface: str) -> str:
    lowered = surface.lower()
    if bypasses_stemmer(surface):
        return lowered
    return s_stem(lowered)


def tokenize(text: str) -> List[Token]:
    """Tokenize one text unit.  Positions are renumbered after stopword removal."""
    stop = stopwords()
    out: List[Token] = []
    for match in TOKEN_RE.finditer(POSSESSIVE_RE.sub("", text)):
        surface = match.group(0)
        if surface.lower() in stop:
            continue
        out.append(Token(surface, stem(surface), len(out)))
    return out


def stems(text: str) -> Tuple[str, ...]:
    return tuple(tok.stem for tok in tokenize(text))


def words(text: str) -> List[str]:
    """Raw word surfaces in order, stopwords included (used by the chunker)."""
    return TOKEN_RE.findall(POSSESSIVE_RE.sub("", text))
