"""Field language-model scoring of structured queries.

Leaves are scored with two-stage smoothing (Jelinek-Mercer over a Dirichlet
prior).  Field-restricted leaves use the *fielded* parameters and, by default,
the collection model of their field type; unrestricted leaves score against
the whole table with the *full-text* parameters and the corpus model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .corpus import FieldType
from .index import Index
from .query import (
    And,
    FieldKey,
    Leaf,
    Max,
    OrderedWindow,
    QueryNode,
    Term,
    UnorderedWindow,
    WAnd,
    WSum,
    leaf_terms,
)
from .queryintel.types import AnalyzedQuery

DEFAULT_FIELD_WEIGHTS: Dict[FieldType, float] = {
    FieldType.CAPTION: 0.25,
    FieldType.ARTICLE_TITLE: 0.15,
    FieldType.REFERRING_SENTENCE: 0.15,
    FieldType.ABSTRACT: 0.10,
    FieldType.FOOTNOTE: 0.05,
    FieldType.ROW_HEADER: 0.12,
    FieldType.COLUMN_HEADER: 0.12,
    FieldType.CELL_VALUE: 0.06,
}
SDM_WEIGHTS = (0.85, 0.10, 0.05)


class QueryBuildError(ValueError):
    pass


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class SmoothingParams:
    lam: float
    mu: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")


FULLTEXT_SMOOTHING = SmoothingParams(lam=0.58, mu=250.0)
FIELDED_SMOOTHING = SmoothingParams(lam=0.81, mu=2.0)


@dataclass(frozen=True)
class ModelParams:
    field_weights: Mapping[FieldKey, float] = field(default_factory=lambda: dict(DEFAULT_FIELD_WEIGHTS))
    alpha: float = 0.2
    beta: float = 0.1
    sdm_weights: Tuple[float, float, float] = SDM_WEIGHTS
    prior_enabled: bool = True
    fielded: SmoothingParams = FIELDED_SMOOTHING
    fulltext: SmoothingParams = FULLTEXT_SMOOTHING
    global_collection: bool = False

    def __post_init__(self):
        weights = list(self.field_weights.values())
        if any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0, abs_tol=1e-9):
            raise ValueError(f"field weights must be nonnegative and sum to 1, got {dict(self.field_weights)}")
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta > 1 + 1e-12:
            raise ValueError(f"need alpha, beta >= 0 and alpha + beta <= 1 (got {self.alpha}, {self.beta})")
        if len(self.sdm_weights) != 3 or not math.isclose(sum(self.sdm_weights), 1.0, abs_tol=1e-9):
            raise ValueError(f"sdm weights must be three values summing to 1, got {self.sdm_weights}")

    @property
    def fields(self) -> Tuple[FieldKey, ...]:
        return tuple(f for f, w in self.field_weights.items() if w > 0)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


# -- leaf probabilities -----------------------------------------------------

def smoothed_term_prob(count: float, field_length: float, corpus_prob: float, params: SmoothingParams) -> float:
    """Two-stage smoothed p(w|f).

    An empty field with ``mu == 0`` has no maximum-likelihood estimate; the
    Dirichlet part then falls back to the corpus probability.
    """
    denom = field_length + params.mu
    dirichlet = (count + params.mu * corpus_prob) / denom if denom > 0 else corpus_prob
    return params.lam * dirichlet + (1.0 - params.lam) * corpus_prob


def unseen_floor(total_tokens: int) -> float:
    return 0.5 / (total_tokens + 1)


class Scorer:
    """Evaluates query trees against one index.  Holds a query-local cache."""

    def __init__(self, index: Index, params: ModelParams):
        self.index = index
        self.params = params
        self._coll_cache: Dict[Tuple, float] = {}

    def _collection_field(self, field: FieldKey) -> FieldKey:
        return None if self.params.global_collection else field

    def _collection_count(self, leaf: Leaf, cf: FieldKey) -> int:
        if isinstance(leaf, Term):
            return self.index.stats.term_ctf(leaf.stem, cf)
        width = leaf.width if isinstance(leaf, UnorderedWindow) else 1
        return self.index.collection_window_count(leaf.terms, cf, ordered=isinstance(leaf, OrderedWindow), width=width)

    def corpus_prob(self, leaf: Leaf) -> float:
        """Collection probability of a leaf.

        A leaf unseen in its field's collection backs off to the whole-corpus
        estimate, and a leaf unseen anywhere gets the corpus floor.  Without
        the backoff a field type that is empty corpus-wide would hand every
        term a floor of 0.5.
        """
        if leaf in self._coll_cache:
            return self._coll_cache[leaf]
        stats = self.index.stats
        cf = self._collection_field(leaf.field)
        count = self._collection_count(leaf, cf)
        if count > 0:
            prob = count / stats.total(cf)
        else:
            corpus_count = self._collection_count(leaf, None) if cf is not None else 0
            total = stats.total(None)
            prob = corpus_count / total if corpus_count > 0 else unseen_floor(total)
        self._coll_cache[leaf] = prob
        return prob

    def leaf_count(self, leaf: Leaf, table_id: str) -> int:
        if isinstance(leaf, Term):
            return self.index.term_count(table_id, leaf.stem, leaf.field)
        if isinstance(leaf, OrderedWindow):
            return self.index.window_count(table_id, leaf.terms, leaf.field, ordered=True)
        return self.index.window_count(table_id, leaf.terms, leaf.field, ordered=False, width=leaf.width)

    def leaf_prob(self, leaf: Leaf, table_id: str) -> float:
        smoothing = self.params.fulltext if leaf.field is None else self.params.fielded
        return smoothed_term_prob(
            self.leaf_count(leaf, table_id),
            self.index.field_length(table_id, leaf.field),
            self.corpus_prob(leaf),
            smoothing,
        )

    def evaluate(self, node: QueryNode, table_id: str) -> float:
        """Log belief of ``node`` for one table."""
        if isinstance(node, (Term, OrderedWindow, UnorderedWindow)):
            return math.log(self.leaf_prob(node, table_id))
        if isinstance(node, And):
            if not node.children:
                raise EvaluationError("#and with no children")
            return sum(self.evaluate(c, table_id) for c in node.children) / len(node.children)
        if isinstance(node, Max):
            if not node.children:
                raise EvaluationError("#max with no children")
            return max(self.evaluate(c, table_id) for c in node.children)
        if isinstance(node, WAnd):
            if not node.children:
                raise EvaluationError("#wand with no children")
            total = sum(w for w, _ in node.children)
            return sum(w / total * self.evaluate(c, table_id) for w, c in node.children)
        if isinstance(node, WSum):
            if not node.children:
                raise EvaluationError("#wsum with no children")
            total = sum(w for w, _ in node.children)
            logs = [(w / total, self.evaluate(c, table_id)) for w, c in node.children]
            top = max(lv for _, lv in logs)
            return top + math.log(sum(w * math.exp(lv - top) for w, lv in logs))
        raise EvaluationError(f"unknown query node {node!r}")

    def term_mixture_prob(self, term: str, table_id: str, field_weights: Mapping[FieldKey, float]) -> float:
        return sum(w * self.leaf_prob(Term(term, f), table_id) for f, w in field_weights.items() if w > 0)


def evaluate(node: QueryNode, table_id: str, index: Index, params: ModelParams) -> float:
    return Scorer(index, params).evaluate(node, table_id)


def term_mixture_prob(term: str, table_id: str, index: Index, field_weights: Mapping[FieldKey, float],
                      params: ModelParams) -> float:
    return Scorer(index, params).term_mixture_prob(term, table_id, field_weights)


def log_prior(numeric_cell_count: int, total_cell_count: int) -> float:
    """Laplace-smoothed numeric-content prior, so cell-less tables stay retrievable."""
    return math.log((numeric_cell_count + 1) / (total_cell_count + 2))


# -- query builders ---------------------------------------------------------

def _single(node_type, items):
    items = tuple(items)
    return items[0] if len(items) == 1 else node_type(items)


def build_query_terms(tokens: Sequence[str], field_weights: Mapping[FieldKey, float]) -> QueryNode:
    if not tokens:
        raise QueryBuildError("empty query: no indexable terms")
    fields = [(w, f) for f, w in field_weights.items() if w > 0]
    if not fields:
        raise QueryBuildError("no field has positive weight")
    return And(tuple(WSum(tuple((w, Term(tok, f)) for w, f in fields)) for tok in tokens))


def _bigrams(tokens: Sequence[str]) -> List[Tuple[str, str]]:
    return [(tokens[i], tokens[i + 1]) for i in range(len(tokens) - 1)]


def build_concept_node(tokens: Sequence[str], sdm_weights: Sequence[float] = SDM_WEIGHTS,
                       fields: Sequence[FieldKey] = tuple(FieldType)) -> QueryNode:
    """Sequential-dependence match of one concept in each field, keeping the best field."""
    tokens = tuple(tokens)
    if not tokens:
        raise QueryBuildError("empty concept")
    if not fields:
        raise QueryBuildError("no fields to match against")
    if len(tokens) == 1:
        return _single(Max, (Term(tokens[0], f) for f in fields))
    w_uni, w_ord, w_unord = sdm_weights
    per_field = []
    for f in fields:
        bigrams = _bigrams(tokens)
        parts = [
            (w_uni, And(tuple(Term(t, f) for t in tokens))),
            (w_ord, _single(And, (OrderedWindow(b, f) for b in bigrams))),
            (w_unord, _single(And, (UnorderedWindow(b, 8, f) for b in bigrams))),
        ]
        per_field.append(WAnd(tuple((w, n) for w, n in parts if w > 0)))
    return _single(Max, per_field)


def build_quantity_node(symbols: Sequence[str], fields: Sequence[FieldKey] = tuple(FieldType)) -> QueryNode:
    """Bag of unit symbols matched in each field, keeping the best field."""
    symbols = tuple(dict.fromkeys(symbols))
    if not symbols:
        raise QueryBuildError("quantity without unit symbols")
    return _single(Max, (_single(And, (Term(s, f) for s in symbols)) for f in fields))


def build_full_query(analyzed: AnalyzedQuery, params: ModelParams) -> QueryNode:
    terms_node = build_query_terms(analyzed.tokens, params.field_weights)
    fields = params.fields
    concepts = [(c.weight, build_concept_node(c.tokens, params.sdm_weights, fields))
                for c in analyzed.concepts if c.tokens and c.weight > 0]
    quantities = [(q.weight, build_quantity_node(q.symbols, fields))
                  for q in analyzed.quantities if q.symbols and q.weight > 0]

    branches = []
    if params.alpha > 0 and concepts:
        branches.append((params.alpha, WAnd(tuple(concepts))))
    if params.beta > 0 and quantities:
        branches.append((params.beta, WAnd(tuple(quantities))))
    terms_weight = 1.0 - params.alpha - params.beta
    if not branches:
        return terms_node
    if terms_weight > 1e-12:
        branches.insert(0, (terms_weight, terms_node))
    return WAnd(tuple(branches))


# -- ranking ----------------------------------------------------------------

def rank(index: Index, node: QueryNode, params: ModelParams, k: int = 100,
         candidates: Optional[Iterable[str]] = None) -> List[Tuple[str, float]]:
    """Score tables matching at least one query term; best first, ties by table id."""
    if k <= 0:
        return []
    scorer = Scorer(index, params)
    pool = sorted(candidates) if candidates is not None else index.tables_containing(leaf_terms(node))
    scored = []
    for tid in pool:
        score = scorer.evaluate(node, tid)
        if params.prior_enabled:
            entry = index.entry(tid)
            score += log_prior(entry.numeric_cell_count, entry.total_cell_count)
        scored.append((tid, score))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]
