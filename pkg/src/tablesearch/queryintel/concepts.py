"""Key-concept identification: gazetteer entity linking and noun-phrase chunking."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..analysis import s_stem, stems, words
from ..corpus import FieldType
from ..index import Index, count_windows
from .types import Concept, ConceptSource

logger = logging.getLogger(__name__)

KEYNESS_FIELDS: Tuple[FieldType, ...] = tuple(ft for ft in FieldType if ft is not FieldType.CELL_VALUE)


def _data_text(name: str) -> str:
    return resources.files("tablesearch.data").joinpath(name).read_text("utf-8")


def _content_lines(text: str):
    for line in text.splitlines():
        if line.strip() and not line.lstrip().startswith("#"):
            yield line.rstrip("\n")


# -- entity linking ---------------------------------------------------------

@dataclass(frozen=True)
class GazetteerEntry:
    canonical: str
    prior: float
    canonical_length: int


class Gazetteer:
    """Surface form (as a tuple of index stems) -> canonical entity and commonness prior."""

    def __init__(self, entries: Dict[Tuple[str, ...], GazetteerEntry]):
        self.entries = entries
        self.max_len = max((len(k) for k in entries), default=0)

    @classmethod
    def from_rows(cls, rows: Sequence[Tuple[str, str, float]]) -> "Gazetteer":
        entries: Dict[Tuple[str, ...], GazetteerEntry] = {}
        for surface, canonical, prior in rows:
            if not 0 < prior <= 1:
                raise ValueError(f"gazetteer prior for {surface!r} must be in (0, 1], got {prior}")
            key = stems(surface)
            if not key:
                logger.warning("gazetteer surface %r is all stopwords; skipped", surface)
                continue
            entry = GazetteerEntry(canonical, prior, max(len(stems(canonical)), 1))
            old = entries.get(key)
            if old is None or entry.prior > old.prior:
                entries[key] = entry
        return cls(entries)

    @classmethod
    def from_tsv(cls, text: str) -> "Gazetteer":
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"gazetteer line {lineno}: expected 3 tab-separated columns")
            rows.append((parts[0], parts[1], float(parts[2])))
        return cls.from_rows(rows)

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None) -> "Gazetteer":
        text = Path(path).read_text("utf-8") if path else _data_text("gazetteer.tsv")
        return cls.from_tsv(text)


def link_entities(query: str, gazetteer: Gazetteer) -> List[Tuple[Concept, float]]:
    """Greedy longest match, left to right, over the normalized query tokens.

    rho = prior * min(1, matched span / canonical token count).
    """
    toks = stems(query)
    out: List[Tuple[Concept, float]] = []
    i = 0
    while i < len(toks):
        for n in range(min(gazetteer.max_len, len(toks) - i), 0, -1):
            entry = gazetteer.entries.get(toks[i : i + n])
            if entry is not None:
                rho = entry.prior * min(1.0, n / entry.canonical_length)
                concept = Concept(entry.canonical, toks[i : i + n], source=ConceptSource.ENTITY, raw_score=rho)
                out.append((concept, rho))
                i += n
                break
        else:
            i += 1
    return out


# -- noun phrases -----------------------------------------------------------

_ADJ_SUFFIXES = ("al", "ic", "ous", "ive", "ian", "able", "ible", "ful", "less", "-like", "ary")


class Lexicon:
    """Word -> coarse POS tag, with suffix heuristics for unknown words."""

    def __init__(self, tags: Dict[str, str]):
        self.tags = tags

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None) -> "Lexicon":
        text = Path(path).read_text("utf-8") if path else _data_text("lexicon.tsv")
        tags = {}
        for line in _content_lines(text):
            word, tag = line.split("\t")
            tags[word.lower()] = tag
        return cls(tags)

    def tag(self, word: str) -> str:
        lw = word.lower()
        if lw in self.tags:
            return self.tags[lw]
        if s_stem(lw) in self.tags:
            return self.tags[s_stem(lw)]
        if any(ch.isdigit() for ch in lw) and not any(ch.isalpha() for ch in lw):
            return "NUM"
        if lw.endswith("ly"):
            return "ADV"
        if lw.endswith("ed") or lw.endswith("ing"):
            return "VERB"
        if lw.endswith(_ADJ_SUFFIXES):
            return "ADJ"
        return "NOUN"


def chunk_noun_phrases(tagged: Sequence[Tuple[str, str]]) -> List[Tuple[int, int]]:
    """Spans [start, end) matching ADJ* NOUN+, maximal and non-overlapping."""
    spans = []
    i, n = 0, len(tagged)
    while i < n:
        j = i
        while j < n and tagged[j][1] == "ADJ":
            j += 1
        k = j
        while k < n and tagged[k][1] == "NOUN":
            k += 1
        if k > j:
            spans.append((i, k))
            i = k
        else:
            i = max(j, i + 1)
    return spans


def extract_noun_phrases(query: str, lexicon: Lexicon) -> List[str]:
    ws = words(query)
    tagged = [(w, lexicon.tag(w)) for w in ws]
    return [" ".join(ws[a:b]) for a, b in chunk_noun_phrases(tagged)]


# -- keyness of noun phrases ------------------------------------------------

def _idf(num_tables: int, df: int) -> float:
    return math.log((num_tables + 1) / df) if df > 0 else 0.0


def _phrase_field_stats(tokens: Tuple[str, ...], index: Index, ft: FieldType) -> Tuple[int, int]:
    if len(tokens) == 1:
        return index.stats.term_ctf(tokens[0], ft), index.stats.term_df(tokens[0], ft)
    ctf = df = 0
    for tid in index.tables_containing(tokens[:1]):
        c = count_windows(index.entry(tid).units[ft], tokens, ordered=True)
        ctf += c
        df += c > 0
    return ctf, df


def keyness_features(tokens: Sequence[str], index: Index) -> List[float]:
    """14 features: (ctf, idf) for each non-cell field type, in field order.

    Without any exact sequential match the vector is the mean over the
    phrase's consecutive bigrams.  Absent phrases get ctf = idf = 0.
    """
    tokens = tuple(tokens)
    n = len(index)

    def direct(seq: Tuple[str, ...]) -> List[float]:
        feats: List[float] = []
        for ft in KEYNESS_FIELDS:
            ctf, df = _phrase_field_stats(seq, index, ft)
            feats.extend([float(ctf), _idf(n, df)])
        return feats

    feats = direct(tokens)
    if len(tokens) > 2 and not any(feats[0::2]):
        vectors = [direct(tokens[i : i + 2]) for i in range(len(tokens) - 1)]
        feats = [sum(col) / len(vectors) for col in zip(*vectors)]
    return feats


@dataclass(frozen=True)
class KeynessModel:
    bias: float
    weights: Tuple[float, ...]

    def __post_init__(self):
        if len(self.weights) != 2 * len(KEYNESS_FIELDS):
            raise ValueError(f"keyness model needs {2 * len(KEYNESS_FIELDS)} weights")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "KeynessModel":
        values = {}
        for line in _content_lines(Path(path).read_text("utf-8")):
            key, *rest = line.split()
            values[key] = [float(x) for x in rest]
        if values.get("version") != [1.0]:
            raise ValueError(f"{path}: unsupported keyness model version")
        return cls(values["bias"][0], tuple(values["weights"]))

    def score(self, feats: Sequence[float]) -> float:
        return max(0.0, self.bias + sum(w * x for w, x in zip(self.weights, feats)))


def noun_phrase_keyness(tokens: Sequence[str], index: Index, model: Optional[KeynessModel] = None) -> float:
    """h(c): trained linear score if a model is given, else mean idf across the seven fields."""
    feats = keyness_features(tokens, index)
    if model is not None:
        return model.score(feats)
    idfs = feats[1::2]
    return sum(idfs) / len(idfs)


# -- weighting --------------------------------------------------------------

def normalize_weights(scored: Sequence[Tuple[Concept, float]]) -> List[Concept]:
    """p(c|q) = raw / sum(raw); all-zero raw scores become uniform."""
    if not scored:
        return []
    if any(raw < 0 for _, raw in scored):
        raise ValueError("concept scores must be nonnegative")
    total = sum(raw for _, raw in scored)
    if total <= 0:
        return [replace(c, weight=1.0 / len(scored), raw_score=raw) for c, raw in scored]
    return [replace(c, weight=raw / total, raw_score=raw) for c, raw in scored]
