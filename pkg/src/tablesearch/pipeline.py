"""End-to-end retrieval for one query: analysis, query construction, ranking."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .analysis import stems
from .baselines import BASELINES, run_baseline
from .config import Config
from .corpus import read_records
from .evaluation import Run, Topic
from .index import Index
from .query import QueryNode
from .queryintel.analyze import QueryAnalyzer
from .queryintel.types import AnalyzedQuery
from .ranker import QueryBuildError, build_full_query, build_query_terms, rank


def record_text_units(records_path) -> List[str]:
    """Every text unit of every field, in record order."""
    return [unit for rec in read_records(records_path) for units in rec.fields.values() for unit in units]


def analyzer_from_config(config: Config, index: Optional[Index] = None) -> QueryAnalyzer:
    p = config.path
    units = None
    if p("text_units"):
        units = [l for l in Path(p("text_units")).read_text("utf-8").splitlines() if l.strip()]
    return QueryAnalyzer.load(
        mode=config.concept_mode, index=index, gazetteer=p("gazetteer"), lexicon=p("lexicon"),
        ontology=p("ontology"), classifier=p("classifier"), keyness_model=p("keyness_model"),
        text_units=units, threshold=config.threshold,
    )


def build_query(analyzed: AnalyzedQuery, config: Config) -> QueryNode:
    if config.ranker == "terms":
        return build_query_terms(analyzed.tokens, config.model.field_weights)
    return build_full_query(analyzed, config.model)


def search(query: str, index: Index, config: Config, analyzer: Optional[QueryAnalyzer] = None,
           k: Optional[int] = None) -> List[Tuple[str, float]]:
    k = config.k if k is None else k
    if config.ranker in BASELINES:
        tokens = stems(query)
        if not tokens:
            raise QueryBuildError("empty query: no indexable terms")
        return run_baseline(config.ranker, tokens, index, k, bm25=config.bm25,
                            field_weights=config.model.field_weights, params=_union_params(config))
    analyzer = analyzer or analyzer_from_config(config, index)
    node = build_query(analyzer.analyze(query), config)
    return rank(index, node, config.model, k)


def _union_params(config: Config):
    return config.model.with_(field_weights={None: 1.0}, alpha=0.0, beta=0.0, prior_enabled=False)


def search_topics(topics: Sequence[Topic], index: Index, config: Config,
                  analyzer: Optional[QueryAnalyzer] = None) -> Run:
    if config.ranker not in BASELINES and analyzer is None:
        analyzer = analyzer_from_config(config, index)
    return {t.qid: search(t.title, index, config, analyzer) for t in topics}
