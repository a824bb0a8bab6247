"""Reference rankers: BM25, BM25F, TableRank, and the Indri bag-of-words / SDM degenerations of the ranker."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .corpus import FieldType
from .index import Index
from .query import And, QueryNode, Term
from .ranker import SDM_WEIGHTS, DEFAULT_FIELD_WEIGHTS, ModelParams, build_concept_node, rank

BASELINES = ("bm25", "bm25f", "tablerank", "indri-bow", "indri-sdm")


@dataclass(frozen=True)
class BM25Params:
    """``field_weights`` and ``field_b`` only matter to BM25F; fields missing from ``field_b`` use ``b``.

    ``length_norm`` picks the BM25F length normalizer: ``"document"`` divides
    every field's tf by the weighted table length relative to its mean (so
    uniform weights reproduce BM25 exactly), ``"field"`` uses each field's
    own length relative to that field's mean.
    """

    k1: float = 1.2
    b: float = 0.75
    field_weights: Mapping[FieldType, float] = field(default_factory=lambda: {ft: 1.0 for ft in FieldType})
    field_b: Mapping[FieldType, float] = field(default_factory=dict)
    length_norm: str = "document"

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        for b in (self.b, *self.field_b.values()):
            if not 0.0 <= b <= 1.0:
                raise ValueError(f"b must be in [0, 1], got {b}")
        if any(w < 0 for w in self.field_weights.values()):
            raise ValueError("BM25F field weights must be nonnegative")
        if self.length_norm not in ("document", "field"):
            raise ValueError(f"length_norm must be 'document' or 'field', got {self.length_norm!r}")

    def b_for(self, ft: FieldType) -> float:
        return self.field_b.get(ft, self.b)


def bm25_idf(num_tables: int, df: int) -> float:
    return math.log((num_tables - df + 0.5) / (df + 0.5) + 1.0)


def _saturate(tf: float, k1: float) -> float:
    return tf * (k1 + 1.0) / (tf + k1) if tf > 0 else 0.0


def bm25_score(tokens: Sequence[str], table_id: str, index: Index, params: BM25Params = BM25Params()) -> float:
    """BM25 over the union of all fields."""
    n = len(index)
    avgdl = index.stats.total(None) / n
    dl = index.field_length(table_id, None)
    norm = 1.0 - params.b + params.b * dl / avgdl if avgdl > 0 else 1.0
    score = 0.0
    for term, qtf in Counter(tokens).items():
        tf = index.term_count(table_id, term, None)
        if tf:
            score += qtf * bm25_idf(n, index.stats.term_df(term, None)) * _saturate(tf / norm, params.k1)
    return score


class _WeightedLengths:
    """Mean weighted table length, computed once per (index, weights)."""

    def __init__(self, index: Index, weights: Mapping[FieldType, float]):
        self.weights = weights
        total = sum(self.length(index, tid) for tid in index.table_ids)
        self.mean = total / len(index) if len(index) else 0.0

    def length(self, index: Index, table_id: str) -> float:
        return sum(w * index.field_length(table_id, ft) for ft, w in self.weights.items())


def bm25f_score(tokens: Sequence[str], table_id: str, index: Index, params: BM25Params = BM25Params(),
                _lengths: Optional[_WeightedLengths] = None) -> float:
    """Field-weighted, length-normalized tf pooled across fields, then one saturation and the BM25 idf."""
    n = len(index)
    weights = {ft: w for ft, w in params.field_weights.items() if w > 0}
    if params.length_norm == "document":
        lengths = _lengths or _WeightedLengths(index, weights)
        ratio = lengths.length(index, table_id) / lengths.mean if lengths.mean > 0 else 0.0
        norms = {ft: 1.0 - params.b_for(ft) + params.b_for(ft) * ratio for ft in weights}
    else:
        norms = {}
        for ft in weights:
            avg = index.stats.total(ft) / n
            ratio = index.field_length(table_id, ft) / avg if avg > 0 else 0.0
            norms[ft] = 1.0 - params.b_for(ft) + params.b_for(ft) * ratio
    score = 0.0
    for term, qtf in Counter(tokens).items():
        pooled = sum(w * index.term_count(table_id, term, ft) / norms[ft] for ft, w in weights.items())
        if pooled > 0:
            score += qtf * bm25_idf(n, index.stats.term_df(term, None)) * _saturate(pooled, params.k1)
    return score


# -- TableRank --------------------------------------------------------------

def _ittf(index: Index, term: str) -> float:
    ctf = index.stats.term_ctf(term, None)
    return math.log(index.stats.total(None) / ctf) if ctf > 0 else 0.0


def table_vector(table_id: str, index: Index, field_weights: Mapping[FieldType, float]) -> Dict[str, float]:
    """TTF-ITTF weights: field-weighted term frequency times log(corpus tokens / ctf)."""
    entry = index.entry(table_id)
    tf: Counter = Counter()
    for ft, w in field_weights.items():
        if w > 0 and ft in entry.counts:
            for term, c in entry.counts[ft].items():
                tf[term] += w * c
    return {t: v * _ittf(index, t) for t, v in tf.items()}


def query_vector(tokens: Sequence[str], index: Index) -> Dict[str, float]:
    return {t: c * _ittf(index, t) for t, c in Counter(tokens).items()}


def cosine(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0 or nb == 0:
        return 0.0
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    return sum(v * large.get(t, 0.0) for t, v in small.items()) / (na * nb)


def tablerank_score(tokens: Sequence[str], table_id: str, index: Index,
                    field_weights: Mapping[FieldType, float] = DEFAULT_FIELD_WEIGHTS) -> float:
    return cosine(query_vector(tokens, index), table_vector(table_id, index, field_weights))


# -- Indri degenerations of the ranker --------------------------------------

UNION_PARAMS = ModelParams(field_weights={None: 1.0}, alpha=0.0, beta=0.0, prior_enabled=False)


def indri_bow_query(tokens: Sequence[str]) -> QueryNode:
    """``#combine`` of the query terms over the whole table."""
    return And(tuple(Term(t) for t in tokens))


def indri_sdm_query(tokens: Sequence[str], sdm_weights: Sequence[float] = SDM_WEIGHTS) -> QueryNode:
    return build_concept_node(tokens, sdm_weights, fields=(None,))


# -- run generation ---------------------------------------------------------

def _rank_by(score: Callable[[str], float], pool: Sequence[str], k: int) -> List[Tuple[str, float]]:
    scored = sorted(((tid, score(tid)) for tid in pool), key=lambda item: (-item[1], item[0]))
    return scored[:k]


def run_baseline(name: str, tokens: Sequence[str], index: Index, k: int = 100,
                 bm25: BM25Params = BM25Params(),
                 field_weights: Mapping[FieldType, float] = DEFAULT_FIELD_WEIGHTS,
                 params: ModelParams = UNION_PARAMS) -> List[Tuple[str, float]]:
    """Rank tables containing at least one query token with the named baseline."""
    if k <= 0 or not tokens:
        return []
    if name == "indri-bow":
        return rank(index, indri_bow_query(tokens), params, k)
    if name == "indri-sdm":
        return rank(index, indri_sdm_query(tokens, params.sdm_weights), params, k)
    pool = index.tables_containing(tokens)
    if name == "bm25":
        return _rank_by(lambda tid: bm25_score(tokens, tid, index, bm25), pool, k)
    if name == "bm25f":
        weights = {ft: w for ft, w in bm25.field_weights.items() if w > 0}
        lengths = _WeightedLengths(index, weights)
        return _rank_by(lambda tid: bm25f_score(tokens, tid, index, bm25, lengths), pool, k)
    if name == "tablerank":
        return _rank_by(lambda tid: tablerank_score(tokens, tid, index, field_weights), pool, k)
    raise ValueError(f"unknown baseline {name!r}; choose from {', '.join(BASELINES)}")
