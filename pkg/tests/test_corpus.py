import json

import pytest
from hypothesis import given, strategies as st

from tablesearch.corpus import (
    FieldLevel,
    FieldType,
    RecordFormatError,
    TableParseError,
    TableRecord,
    is_numeric_cell,
    numeric_fraction,
    parse_table_xml,
    parse_xml_file,
    read_records,
    table_to_xml,
    write_records,
)

TWO_TABLES = b"""<document id="doc">
  <article-title>Shared title</article-title>
  <table><caption>first</caption></table>
  <table><caption>second</caption><article-title>own title</article-title></table>
</document>"""


def test_caption_headers_and_cells_table(fixtures_dir):
    [rec] = parse_xml_file(fixtures_dir / "corpus" / "a0535.xml")
    assert rec.table_id == "a0535#0"
    assert rec.units(FieldType.CAPTION)[0].startswith("Best-fit parameters of the phase-averaged spectra")
    assert rec.units(FieldType.COLUMN_HEADER) == ("Parameter", "Value")
    assert rec.units(FieldType.ROW_HEADER)[1] == "Iron line width (keV)"
    assert numeric_fraction(rec) == 1.0


def test_empty_table():
    [rec] = parse_table_xml(b"<table></table>")
    assert all(rec.fields[ft] == () for ft in FieldType)
    assert rec.total_cell_count == 0
    assert numeric_fraction(rec) == 0.0


def test_two_tables_get_ordinal_ids_and_inherit_document_fields():
    a, b = parse_table_xml(TWO_TABLES)
    assert (a.table_id, b.table_id) == ("doc#0", "doc#1")
    assert a.units(FieldType.ARTICLE_TITLE) == ("Shared title",)
    assert b.units(FieldType.ARTICLE_TITLE) == ("own title",)


def test_three_of_four_numeric():
    rec = TableRecord.build("t", "d", {"cell_value": ["1.5", "2", "n/a", "3e5"]})
    assert rec.numeric_cell_count == 3
    assert numeric_fraction(rec) == 0.75


def test_whitespace_normalized_and_unknown_elements_skipped(caplog):
    [rec] = parse_table_xml(b"<table><caption>  a \n  b </caption><bogus>x</bogus></table>")
    assert rec.units(FieldType.CAPTION) == ("a b",)
    assert "bogus" in caplog.text


def test_malformed_xml_reports_byte_offset():
    data = b"<table>\n<caption>ok</caption>\n<oops></table>"
    with pytest.raises(TableParseError) as info:
        parse_table_xml(data)
    assert info.value.offset == data.index(b"</table>") + 2
    assert "byte offset" in str(info.value)


def _numeric_cases(fixtures_dir):
    for line in (fixtures_dir / "numeric_cells.tsv").read_text("utf-8").splitlines():
        if line and not line.startswith("#"):
            text, label = line.rsplit("\t", 1)
            yield text, label == "1"


def test_numeric_matcher_reproduces_labelled_cases(fixtures_dir):
    cases = list(_numeric_cases(fixtures_dir))
    assert len(cases) == 40
    wrong = [text for text, label in cases if is_numeric_cell(text) != label]
    assert wrong == []


@pytest.mark.parametrize("text, expected", [
    ("0.16±0.01", True), ("Parameter", False), ("1.0-10.0 keV", True), ("", False), ("   ", False),
])
def test_numeric_examples(text, expected):
    assert is_numeric_cell(text) is expected


def test_field_levels():
    assert FieldType.ARTICLE_TITLE.level is FieldLevel.DOCUMENT
    assert FieldType.CELL_VALUE.level is FieldLevel.CELL


def test_record_invariants_are_enforced():
    fields = {ft: () for ft in FieldType}
    with pytest.raises(ValueError):
        TableRecord("t", "d", fields, numeric_cell_count=1, total_cell_count=0)
    with pytest.raises(ValueError):
        TableRecord("t", "d", {FieldType.CAPTION: ()}, 0, 0)


def test_record_file_round_trip(records, tmp_path):
    path = tmp_path / "r.jsonl"
    assert write_records(records, path) == len(records)
    assert list(read_records(path)) == records


def test_bad_record_line_is_a_format_error(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text('{"table_id": "x"}\n')
    with pytest.raises(RecordFormatError):
        list(read_records(path))


def test_ingest_directory_is_sorted_and_unique(records):
    ids = [r.table_id for r in records]
    assert len(ids) == len(set(ids)) == 17


def test_xml_round_trip_for_every_fixture_table(records):
    for rec in records:
        [again] = parse_table_xml(table_to_xml(rec), doc_id=rec.doc_id)
        assert again == rec


_unit_text = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=20).map(
    lambda s: " ".join(s.split())).filter(bool)


@given(st.dictionaries(st.sampled_from([ft.value for ft in FieldType]), st.lists(_unit_text, max_size=4)))
def test_serialize_parse_round_trip(fields):
    rec = TableRecord.build("doc#0", "doc", fields)
    [again] = parse_table_xml(table_to_xml(rec), doc_id="doc")
    assert again == rec
    assert TableRecord.from_dict(json.loads(json.dumps(rec.to_dict()))) == rec


@given(st.lists(st.sampled_from(["1", "2.5", "x", "n/a", "3±1", "cat"]), min_size=1, max_size=12), st.randoms())
def test_numeric_fraction_permutation_invariant(cells, rnd):
    shuffled = list(cells)
    rnd.shuffle(shuffled)
    a = TableRecord.build("t", "d", {"cell_value": cells})
    b = TableRecord.build("t", "d", {"cell_value": shuffled})
    assert numeric_fraction(a) == numeric_fraction(b)


@given(st.lists(st.sampled_from(["1", "2.5", "x", "3±1"]), min_size=1, max_size=12))
def test_appending_text_cell_lowers_positive_fraction(cells):
    before = numeric_fraction(TableRecord.build("t", "d", {"cell_value": cells}))
    after = numeric_fraction(TableRecord.build("t", "d", {"cell_value": cells + ["word"]}))
    if before > 0:
        assert after < before


@given(st.text(max_size=30))
def test_numeric_matcher_is_deterministic(text):
    assert is_numeric_cell(text) == is_numeric_cell(text)
