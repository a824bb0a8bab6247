import json
import shutil
import subprocess

import pytest

from tablesearch.cli import (
    EXIT_EMPTY_QUERY,
    EXIT_MALFORMED,
    EXIT_MISSING_FILE,
    EXIT_OK,
    EXIT_USAGE,
    main,
)
from tablesearch.config import Config
from tablesearch.evaluation import evaluate_run, format_run, read_run
from tablesearch.index import Index
from tablesearch.pipeline import search_topics


@pytest.fixture(scope="module")
def built(tmp_path_factory, fixtures_dir):
    root = tmp_path_factory.mktemp("cli")
    assert main(["ingest", str(fixtures_dir / "corpus"), "-o", str(root / "records.jsonl")]) == EXIT_OK
    assert main(["index", str(root / "records.jsonl"), "-o", str(root / "idx")]) == EXIT_OK
    return root


def _run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_stats_dump(built, capsys):
    code, out, _ = _run(["stats", "--index", str(built / "idx")], capsys)
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "term\tfield\tctf\tdf"
    assert any(l.startswith("kev\tall\t") for l in lines)


def test_explain_matches_listing_shape(capsys):
    code, out, _ = _run(["explain", "forces in newtonian gravity"], capsys)
    assert code == EXIT_OK
    body = [l for l in out.splitlines() if not l.startswith("# ")]
    assert body[0] == "#wand("
    assert body[1].strip() == "0.7 #and("
    assert any(l.strip() == "0.85 #and( newtonian gravity ).(caption)" for l in body)
    assert any(l.strip() == "0.1 #1( newtonian gravity ).(caption)" for l in body)
    assert any(l.strip().startswith("0.05 #uw8( newtonian gravity ).(caption)") for l in body)
    assert any(l.strip().startswith("0.1 #wand(") for l in body)
    assert "# quantity: Acceleration" in out


def test_explain_terms_ranker(capsys):
    code, out, _ = _run(["explain", "meson mass", "--ranker", "terms"], capsys)
    assert code == EXIT_OK
    assert [l for l in out.splitlines() if not l.startswith("# ")][0] == "#and("


def test_search_k_zero_is_empty(built, capsys):
    code, out, _ = _run(["search", "meson mass", "--index", str(built / "idx"), "-k", "0"], capsys)
    assert code == EXIT_OK and out == ""


def test_search_single_query(built, capsys):
    code, out, _ = _run(["search", "meson mass", "--index", str(built / "idx"), "-k", "3", "--qid", "q2"], capsys)
    lines = out.splitlines()
    assert code == EXIT_OK and len(lines) == 3
    qid, q0, tid, rank, score, tag = lines[0].split()
    assert (qid, q0, rank, tag) == ("q2", "Q0", "1", "full")


@pytest.mark.parametrize("ranker", ["full", "terms", "bm25f", "tablerank", "indri-sdm"])
def test_search_then_eval_equals_in_process(built, fixtures_dir, tmp_path, capsys, ranker):
    run_path = tmp_path / "run.txt"
    code = main(["search", "--index", str(built / "idx"), "--topics", str(fixtures_dir / "topics.txt"),
                 "--ranker", ranker, "-o", str(run_path)])
    assert code == EXIT_OK
    cfg = Config.load()
    cfg.ranker = ranker
    from tablesearch.evaluation import read_qrels, read_topics
    in_process = search_topics(read_topics(fixtures_dir / "topics.txt"), Index.load(built / "idx"), cfg)
    assert run_path.read_text().splitlines() == format_run(in_process, ranker)
    qrels = read_qrels(fixtures_dir / "qrels.txt")
    code, out, _ = _run(["eval", str(run_path), str(fixtures_dir / "qrels.txt")], capsys)
    assert code == EXIT_OK
    expected = evaluate_run(read_run(run_path), qrels)
    assert out.splitlines() == [f"{m}\t{v:.4f}" for m, v in expected.items()]


def test_eval_golden_values(tmp_path, capsys):
    (tmp_path / "qrels").write_text("1 0 a 1\n1 0 b 2\n1 0 c 3\n2 0 k 3\n2 0 m 1\n2 0 z 0\n")
    (tmp_path / "run").write_text(
        "1 Q0 a 1 5 t\n1 Q0 x 2 4 t\n1 Q0 b 3 3 t\n1 Q0 y 4 2 t\n1 Q0 c 5 1 t\n"
        "2 Q0 k 1 3 t\n2 Q0 z 2 2 t\n2 Q0 m 3 1 t\n"
    )
    code, out, _ = _run(["eval", str(tmp_path / "run"), str(tmp_path / "qrels")], capsys)
    assert code == EXIT_OK
    values = dict(line.split("\t") for line in out.splitlines())
    ap = ((1 + 2 / 3 + 3 / 5) / 3 + (1 + 2 / 3) / 2) / 2
    assert float(values["map@100"]) == pytest.approx(ap, abs=5e-5)
    assert float(values["map@100"]) == round(ap, 4)


def test_eval_compare(built, fixtures_dir, tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    topics = str(fixtures_dir / "topics.txt")
    main(["search", "--index", str(built / "idx"), "--topics", topics, "-o", str(a)])
    main(["search", "--index", str(built / "idx"), "--topics", topics, "--ranker", "bm25", "-o", str(b)])
    code, out, _ = _run(["eval", str(a), str(fixtures_dir / "qrels.txt"), "--compare", str(b)], capsys)
    assert code == EXIT_OK
    assert any(l.startswith("win/tie/loss\t") for l in out.splitlines())


def test_sweep(built, fixtures_dir, tmp_path, capsys):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"alpha": [0.0, 0.2], "prior_enabled": [False, True]}))
    folds = tmp_path / "folds.tsv"
    argv = ["sweep", "--index", str(built / "idx"), "--topics", str(fixtures_dir / "topics.txt"),
            "--qrels", str(fixtures_dir / "qrels.txt"), "--grid", str(grid), "--folds", "5",
            "--fold-file", str(folds)]
    code, out, _ = _run(argv, capsys)
    assert code == EXIT_OK
    assert out.splitlines()[-1].startswith("pooled map@100\t")
    assert folds.exists()
    code, again, _ = _run(argv, capsys)
    assert again == out


def test_sweep_rejects_unknown_parameter(built, fixtures_dir, tmp_path, capsys):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"k1": [1.0]}))
    code, _, err = _run(["sweep", "--index", str(built / "idx"), "--topics", str(fixtures_dir / "topics.txt"),
                         "--qrels", str(fixtures_dir / "qrels.txt"), "--grid", str(grid)], capsys)
    assert code == EXIT_MALFORMED and "k1" in err


def test_mine_and_train(built, tmp_path, capsys):
    pairs = tmp_path / "pairs.tsv"
    assert main(["mine-units", "--records", str(built / "records.jsonl"), "-o", str(pairs)]) == EXIT_OK
    lines = pairs.read_text().splitlines()
    assert "distance\tLength" in lines or any(l.endswith("\tLength") for l in lines)
    clf = tmp_path / "clf.txt"
    assert main(["train-quantity", str(pairs), "--records", str(built / "records.jsonl"), "-o", str(clf)]) == EXIT_OK
    assert clf.read_text().startswith("# tablesearch quantity classifier")


def test_exit_codes(built, tmp_path, capsys):
    code, _, err = _run(["search", "mass", "--index", str(tmp_path / "missing")], capsys)
    assert code == EXIT_MISSING_FILE and err.startswith("tablesearch: error:")
    code, _, err = _run(["search", "the of", "--index", str(built / "idx")], capsys)
    assert code == EXIT_EMPTY_QUERY
    code, _, _ = _run(["explain", "the of"], capsys)
    assert code == EXIT_EMPTY_QUERY
    bad = tmp_path / "bad.xml"
    bad.parent.mkdir(exist_ok=True)
    xml_dir = tmp_path / "xml"
    xml_dir.mkdir()
    (xml_dir / "bad.xml").write_text("<table><caption>x</table>")
    code, _, err = _run(["ingest", str(xml_dir), "-o", str(tmp_path / "r.jsonl")], capsys)
    assert code == EXIT_MALFORMED and "byte offset" in err
    (tmp_path / "cfg.json").write_text('{"unknown": 1}')
    code, _, _ = _run(["--config", str(tmp_path / "cfg.json"), "explain", "mass"], capsys)
    assert code == EXIT_MALFORMED
    (tmp_path / "run.txt").write_text("not a run\n")
    code, _, _ = _run(["eval", str(tmp_path / "run.txt"), str(tmp_path / "run.txt")], capsys)
    assert code == EXIT_MALFORMED
    code, _, _ = _run(["stats"], capsys)
    assert code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["search", "--index", str(built / "idx")])
    assert info.value.code == EXIT_USAGE


def test_commands_are_idempotent(built, tmp_path):
    for name in ("a", "b"):
        main(["index", str(built / "records.jsonl"), "-o", str(tmp_path / name)])
    for f in ("manifest.json", "tables.jsonl", "stats.tsv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


@pytest.mark.skipif(shutil.which("tablesearch") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["tablesearch", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("tablesearch ")
