import dataclasses

import pytest

from tablesearch.queryintel import AnalyzedQuery, ConceptSource
from tablesearch.queryintel.analyze import QueryAnalyzer, analyze_query

EXAMPLE_QUERY = "gravitational forces in newtonian gravity versus bimetric gravity"


@pytest.fixture(scope="module")
def np_analyzer(analyzer, index):
    return dataclasses.replace(analyzer, mode="noun_phrase", index=index)


def test_example_query_entity_analysis(analyzer):
    a = analyze_query(EXAMPLE_QUERY, analyzer)
    assert a.tokens == ("gravitational", "force", "newtonian", "gravity", "versus", "bimetric", "gravity")
    assert {c.text for c in a.concepts} == {"gravitational force", "newtonian gravity", "versus"}
    assert all(c.source is ConceptSource.ENTITY for c in a.concepts)
    assert sum(c.weight for c in a.concepts) == pytest.approx(1.0)
    assert {q.name: q.weight for q in a.quantities} == {"Force": 0.5, "Acceleration": 0.5}


def test_example_query_noun_phrase_analysis(np_analyzer):
    a = np_analyzer.analyze(EXAMPLE_QUERY)
    assert [c.text for c in a.concepts] == ["gravitational forces", "newtonian gravity", "bimetric gravity"]
    assert all(c.source is ConceptSource.NOUN_PHRASE for c in a.concepts)
    assert sum(c.weight for c in a.concepts) == pytest.approx(1.0)


def test_xray_query_expands_to_energy_units(analyzer):
    a = analyzer.analyze("x-ray emission spectra")
    [q] = a.quantities
    assert q.name == "Energy"
    assert {"ev", "kev", "j"} <= set(q.symbols)


def test_dimensionless_query_has_no_quantities(analyzer):
    a = analyzer.analyze("earth-like planet")
    assert a.quantities == ()
    assert all(t == "dimensionless" for _, t in a.concept_types)


def test_unknown_words_give_tokens_only(analyzer):
    a = analyzer.analyze("zzz qqq")
    assert a.tokens == ("zzz", "qqq")
    assert a.concepts == () and a.quantities == ()


def test_both_modes_share_schema(analyzer, np_analyzer):
    a, b = analyzer.analyze(EXAMPLE_QUERY), np_analyzer.analyze(EXAMPLE_QUERY)
    assert type(a) is type(b) is AnalyzedQuery
    assert [f.name for f in dataclasses.fields(a)] == [f.name for f in dataclasses.fields(b)]


def test_noun_phrase_mode_without_index_is_uniform(analyzer):
    a = dataclasses.replace(analyzer, mode="noun_phrase").analyze(EXAMPLE_QUERY)
    assert [c.weight for c in a.concepts] == pytest.approx([1 / 3] * 3)


def test_unknown_mode_rejected(analyzer):
    with pytest.raises(ValueError):
        dataclasses.replace(analyzer, mode="both")


def test_threshold_override():
    strict = QueryAnalyzer.load(threshold=0.999)
    assert strict.analyze(EXAMPLE_QUERY).quantities == ()
