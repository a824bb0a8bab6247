from pathlib import Path

import pytest

from tablesearch.corpus import ingest_directory, write_records
from tablesearch.evaluation import read_qrels, read_topics
from tablesearch.index import Index, build_index
from tablesearch.queryintel.analyze import QueryAnalyzer
from tablesearch.queryintel.quantity import (
    CooccurrenceStats,
    QuantityFeatureExtractor,
    QuantityOntology,
    mine_unit_training_data,
    train_quantity_classifier,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def records():
    return ingest_directory(FIXTURES / "corpus")


@pytest.fixture(scope="session")
def records_file(records, tmp_path_factory):
    path = tmp_path_factory.mktemp("records") / "tables.jsonl"
    write_records(records, path)
    return path


@pytest.fixture(scope="session")
def index(records):
    return build_index(records)


@pytest.fixture(scope="session")
def index_dir(index, tmp_path_factory):
    path = tmp_path_factory.mktemp("index") / "idx"
    index.save(path)
    return path


@pytest.fixture(scope="session")
def tablerank_index():
    return build_index(ingest_directory(FIXTURES / "tablerank"))


@pytest.fixture(scope="session")
def topics():
    return read_topics(FIXTURES / "topics.txt")


@pytest.fixture(scope="session")
def qrels():
    return read_qrels(FIXTURES / "qrels.txt")


@pytest.fixture(scope="session")
def analyzer():
    return QueryAnalyzer.load()


@pytest.fixture(scope="session")
def ontology():
    return QuantityOntology.load()


@pytest.fixture(scope="session")
def corpus_units(records):
    return [u for rec in records for units in rec.fields.values() for u in units]


@pytest.fixture(scope="session")
def fixture_extractor(ontology, corpus_units):
    return QuantityFeatureExtractor(ontology, CooccurrenceStats(corpus_units, ontology))


@pytest.fixture(scope="session")
def fixture_pairs(ontology, corpus_units):
    return mine_unit_training_data(corpus_units, ontology)


@pytest.fixture(scope="session")
def fixture_classifier(fixture_pairs, fixture_extractor):
    return train_quantity_classifier(fixture_pairs, fixture_extractor)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""

    def check(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
