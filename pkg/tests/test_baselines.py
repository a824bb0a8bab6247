import math

import pytest
from hypothesis import given, settings, strategies as st

from tablesearch.corpus import FieldType, TableRecord
from tablesearch.index import build_index
from tablesearch.baselines import (
    BASELINES,
    UNION_PARAMS,
    BM25Params,
    bm25_idf,
    bm25_score,
    bm25f_score,
    cosine,
    indri_bow_query,
    run_baseline,
    tablerank_score,
)
from tablesearch.ranker import ModelParams, build_query_terms, rank

import oracle as brute

CAP = FieldType.CAPTION
QUERIES = [("meson", "mass"), ("gravitational", "force", "newtonian"), ("x-ray", "emission", "spectra", "kev")]


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    """Three tables, saved so the oracle can read them."""
    records = [
        TableRecord.build("a#0", "a", {"caption": ["meson mass and width"], "cell_value": ["1", "2"]}),
        TableRecord.build("b#0", "b", {"caption": ["mass of mass"], "row_header": ["meson"]}),
        TableRecord.build("c#0", "c", {"caption": ["orbital period"], "abstract": ["a long abstract about mass"]}),
    ]
    index = build_index(records)
    path = tmp_path_factory.mktemp("small")
    index.save(path)
    return index, brute.OracleIndex(path)


def test_bm25_matches_oracle_on_three_tables(small):
    index, ox = small
    for tid in index.table_ids:
        for q in [("meson", "mass"), ("mass", "mass", "period"), ("width",)]:
            assert bm25_score(q, tid, index) == pytest.approx(brute.bm25(ox, q, tid), abs=1e-9)


def test_bm25f_matches_oracle(index, index_dir):
    ox = brute.OracleIndex(index_dir)
    weights = {FieldType.CAPTION: 2.0, FieldType.ROW_HEADER: 1.5, FieldType.CELL_VALUE: 0.3}
    params = BM25Params(field_weights=weights)
    for tid in index.table_ids:
        for q in QUERIES:
            want = brute.bm25(ox, q, tid, field_weights={f.value: w for f, w in weights.items()})
            assert bm25f_score(q, tid, index, params) == pytest.approx(want, abs=1e-9)


def test_absent_term_contributes_nothing(small):
    index, _ = small
    assert bm25_score(("period",), "a#0", index) == 0.0
    assert bm25f_score(("period",), "a#0", index) == 0.0


def test_k1_zero_is_sum_of_idf(small):
    index, _ = small
    params = BM25Params(k1=0.0)
    expected = sum(bm25_idf(3, index.stats.term_df(t, None)) for t in ("meson", "mass"))
    assert bm25_score(("meson", "mass"), "a#0", index, params) == pytest.approx(expected, abs=1e-12)


def test_uniform_bm25f_equals_bm25(index):
    for b in (0.0, 0.3, 0.75, 1.0):
        params = BM25Params(b=b)
        for tid in index.table_ids:
            for q in QUERIES:
                assert abs(bm25f_score(q, tid, index, params) - bm25_score(q, tid, index, params)) <= 1e-12


def test_caption_only_weights(small):
    index, _ = small
    params = BM25Params(field_weights={CAP: 1.0})
    assert bm25f_score(("meson",), "b#0", index, params) == 0.0
    assert bm25f_score(("meson",), "a#0", index, params) > 0.0


def test_field_length_norm_option(index):
    params = BM25Params(length_norm="field")
    assert bm25f_score(("mass",), "mesons#light", index, params) > 0
    with pytest.raises(ValueError):
        BM25Params(length_norm="other")


def test_cosine_extremes():
    assert cosine({"a": 1.0, "b": 2.0}, {"a": 1.0, "b": 2.0}) == pytest.approx(1.0)
    assert cosine({"a": 1.0}, {"b": 1.0}) == 0.0
    assert cosine({}, {"a": 1.0}) == 0.0


def test_tablerank_prefers_repetitive_table(tablerank_index):
    q = ("meson", "mass")
    assert tablerank_score(q, "repeat", tablerank_index) > tablerank_score(q, "meson", tablerank_index)


def test_indri_bow_is_ranker_with_union_field(index):
    for q in QUERIES:
        direct = rank(index, build_query_terms(q, {None: 1.0}), UNION_PARAMS)
        assert run_baseline("indri-bow", q, index) == direct
        assert rank(index, indri_bow_query(q), UNION_PARAMS) == direct


def test_indri_sdm_differs_only_by_dependence(index):
    ranking = run_baseline("indri-sdm", ("newtonian", "gravity"), index)
    assert ranking and ranking[0][0].startswith("gravity#")


def test_run_baseline_edges(index):
    for name in BASELINES:
        assert run_baseline(name, ("mass",), index, k=0) == []
        assert run_baseline(name, (), index) == []
        ranking = run_baseline(name, ("mass",), index, k=3)
        assert len(ranking) <= 3
        assert [s for _, s in ranking] == sorted((s for _, s in ranking), reverse=True)
    with pytest.raises(ValueError):
        run_baseline("bm26", ("mass",), index)


@settings(max_examples=25, deadline=None)
@given(st.permutations(["gravitational", "force", "newtonian", "mass"]))
def test_baselines_ignore_query_token_order(index, order):
    base = ("gravitational", "force", "newtonian", "mass")
    for tid in ("gravity#forces", "mesons#light"):
        assert bm25_score(order, tid, index) == pytest.approx(bm25_score(base, tid, index), abs=1e-12)
        assert bm25f_score(order, tid, index) == pytest.approx(bm25f_score(base, tid, index), abs=1e-12)
        assert tablerank_score(order, tid, index) == pytest.approx(tablerank_score(base, tid, index), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from(["mass", "meson", "force", "kev", "gravity", "spectra"]), min_size=1, max_size=4),
       st.floats(0, 1))
def test_bm25f_degeneration_property(index, tokens, b):
    params = BM25Params(b=b)
    for tid in index.table_ids[::3]:
        assert abs(bm25f_score(tokens, tid, index, params) - bm25_score(tokens, tid, index, params)) <= 1e-12


def test_bm25_scores_are_finite(index):
    for tid in index.table_ids:
        assert math.isfinite(bm25_score(("mass",), tid, index))
