"""Command-line entry point: ``tablesearch <command> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .analysis import stems
from .config import RANKERS, Config, ConfigError
from .corpus import RecordFormatError, TableParseError, ingest_directory, read_records, write_records
from .evaluation import (
    FormatError,
    cross_validate,
    evaluate_run,
    format_run,
    paired_t_test,
    read_qrels,
    read_run,
    read_topics,
    win_tie_loss,
)
from .index import Index, IndexFormatError, build_index
from .pipeline import analyzer_from_config, build_query, record_text_units, search, search_topics
from .query import format_query
from .queryintel.analyze import bundled_text_units
from .queryintel.quantity import (
    CooccurrenceStats,
    QuantityFeatureExtractor,
    QuantityOntology,
    TrainingError,
    mine_unit_training_data,
    train_quantity_classifier,
)
from .ranker import QueryBuildError

logger = logging.getLogger("tablesearch")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_MALFORMED = 4
EXIT_EMPTY_QUERY = 5


class UsageError(Exception):
    pass


def _require(path: Optional[str], what: str) -> Path:
    if not path:
        raise UsageError(f"no {what} given (pass it on the command line or set paths in the config)")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def _emit(lines: Sequence[str], output: Optional[str]) -> None:
    text = "".join(line + "\n" for line in lines)
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_config(args) -> Config:
    config = Config.load(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if getattr(args, "ranker", None):
        config.ranker = args.ranker
    if getattr(args, "k", None) is not None:
        config.k = args.k
    if getattr(args, "mode", None):
        config.concept_mode = args.mode
    return config


def _load_index(args, config: Config) -> Index:
    return Index.load(_require(args.index or config.path("index"), "index directory"))


# -- commands ---------------------------------------------------------------

def cmd_ingest(args, config: Config) -> int:
    xml_dir = _require(args.xml_dir, "XML directory")
    records = ingest_directory(xml_dir)
    n = write_records(records, args.output)
    logger.info("wrote %d table records to %s", n, args.output)
    return EXIT_OK


def cmd_index(args, config: Config) -> int:
    records = list(read_records(_require(args.records, "record file")))
    index = build_index(records)
    index.save(args.output)
    logger.info("indexed %d tables into %s", len(index), args.output)
    return EXIT_OK


def cmd_stats(args, config: Config) -> int:
    index = _load_index(args, config)
    rows = ["term\tfield\tctf\tdf"] + [f"{t}\t{f}\t{c}\t{d}" for t, f, c, d in index.stats_rows()]
    _emit(rows, args.output)
    return EXIT_OK


def cmd_search(args, config: Config) -> int:
    index = _load_index(args, config)
    if args.topics:
        run = search_topics(read_topics(_require(args.topics, "topics file")), index, config)
    else:
        run = {args.qid: search(args.query, index, config)}
    _emit(format_run(run, args.tag or config.ranker), args.output)
    return EXIT_OK


def cmd_explain(args, config: Config) -> int:
    index = Index.load(_require(args.index, "index directory")) if args.index else None
    if not stems(args.query):
        raise QueryBuildError("empty query: no indexable terms")
    analyzed = analyzer_from_config(config, index).analyze(args.query)
    lines = [f"# query: {args.query}", f"# tokens: {' '.join(analyzed.tokens)}"]
    for c in analyzed.concepts:
        lines.append(f"# concept: {c.text} ({c.source.value}) weight={c.weight:.4g}")
    for text, qtype in analyzed.concept_types:
        lines.append(f"# quantity type of {text}: {qtype}")
    for q in analyzed.quantities:
        lines.append(f"# quantity: {q.name} weight={q.weight:.4g} units={' '.join(q.symbols)}")
    lines.append(format_query(build_query(analyzed, config)))
    _emit(lines, args.output)
    return EXIT_OK


def _report(metrics: Dict[str, float]) -> List[str]:
    return [f"{name}\t{value:.4f}" for name, value in metrics.items()]


def cmd_eval(args, config: Config) -> int:
    run = read_run(_require(args.run, "run file"))
    qrels = read_qrels(_require(args.qrels or config.path("qrels"), "qrels file"))
    lines = _report(evaluate_run(run, qrels))
    if args.compare:
        other = read_run(_require(args.compare, "comparison run file"))
        w, t, l = win_tie_loss(run, other, qrels)
        stat, p = paired_t_test(run, other, qrels)
        lines.append(f"win/tie/loss\t{w}/{t}/{l}")
        lines.append(f"paired_t\t{stat:.4f}\tp={p:.4g}")
    _emit(lines, args.output)
    return EXIT_OK


_SWEEPABLE = {"alpha", "beta", "prior_enabled", "global_collection"}


def _grid(path: Path) -> List[Dict[str, Any]]:
    try:
        spec = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(spec, dict):
        keys = sorted(spec)
        grid = [dict(zip(keys, values)) for values in itertools.product(*(spec[k] for k in keys))]
    elif isinstance(spec, list):
        grid = spec
    else:
        raise ConfigError(f"{path}: grid must be an object of lists or a list of objects")
    for point in grid:
        unknown = set(point) - _SWEEPABLE
        if unknown:
            raise ConfigError(f"{path}: cannot sweep {', '.join(sorted(unknown))}")
    return grid


def cmd_sweep(args, config: Config) -> int:
    index = _load_index(args, config)
    topics = read_topics(_require(args.topics or config.path("topics"), "topics file"))
    qrels = read_qrels(_require(args.qrels or config.path("qrels"), "qrels file"))
    grid = _grid(_require(args.grid, "grid file"))
    analyzer = analyzer_from_config(config, index)
    by_id = {t.qid: t for t in topics}

    def run_fn(params, qids):
        cfg = dataclasses.replace(config, model=config.model.with_(**params))
        return search_topics([by_id[q] for q in qids], index, cfg, analyzer)

    result = cross_validate(sorted(by_id), grid, run_fn, qrels, folds=args.folds, metric=args.metric,
                            seed=config.seed, fold_file=args.fold_file or config.path("folds"))
    lines = [f"fold {i}\t{json.dumps(params, sort_keys=True)}" for i, params in enumerate(result.chosen)]
    lines.append(f"pooled {result.metric}\t{result.pooled:.4f}")
    _emit(lines, args.output)
    return EXIT_OK


def _text_units(args) -> List[str]:
    if args.records:
        return record_text_units(_require(args.records, "record file"))
    if args.text:
        return [l for l in _require(args.text, "text file").read_text("utf-8").splitlines() if l.strip()]
    return bundled_text_units()


def cmd_mine_units(args, config: Config) -> int:
    ontology = QuantityOntology.load(config.path("ontology"))
    pairs = mine_unit_training_data(_text_units(args), ontology)
    _emit([f"{phrase}\t{qtype}" for phrase, qtype in pairs], args.output)
    return EXIT_OK


def cmd_train_quantity(args, config: Config) -> int:
    ontology = QuantityOntology.load(config.path("ontology"))
    pairs = []
    for lineno, line in enumerate(_require(args.pairs, "pairs file").read_text("utf-8").splitlines(), 1):
        if line.strip():
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{args.pairs}:{lineno}: expected 'phrase<TAB>type'")
            pairs.append((parts[0], parts[1]))
    extractor = QuantityFeatureExtractor(ontology, CooccurrenceStats(_text_units(args), ontology))
    classifier = train_quantity_classifier(pairs, extractor, threshold=config.threshold)
    classifier.save(args.output)
    logger.info("trained %d quantity types into %s", len(classifier.models), args.output)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tablesearch", description="Quantity-aware search over scientific tables.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON config file (defaults are bundled)")
    parser.add_argument("--seed", type=int, help="seed for fold assignment and any other randomness")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse table XML into a record file")
    p.add_argument("xml_dir")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build an index directory from a record file")
    p.add_argument("records")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("stats", help="dump per-field term statistics as TSV")
    p.add_argument("--index")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("search", help="rank tables for a query or a topics file")
    p.add_argument("query", nargs="?")
    p.add_argument("--index")
    p.add_argument("--topics")
    p.add_argument("--qid", default="1")
    p.add_argument("--ranker", choices=RANKERS)
    p.add_argument("--mode", choices=("entity", "noun_phrase"))
    p.add_argument("-k", type=int)
    p.add_argument("--tag")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("explain", help="print the analyzed query and its structured form")
    p.add_argument("query")
    p.add_argument("--index", help="needed for noun-phrase keyness")
    p.add_argument("--mode", choices=("entity", "noun_phrase"))
    p.add_argument("--ranker", choices=("full", "terms"))
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("eval", help="score a run file against qrels")
    p.add_argument("run")
    p.add_argument("qrels", nargs="?")
    p.add_argument("--compare", help="second run for win/tie/loss and a paired t-test")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="cross-validated grid search over model weights")
    p.add_argument("--index")
    p.add_argument("--topics")
    p.add_argument("--qrels")
    p.add_argument("--grid", required=True, help="JSON: {param: [values]} or [{param: value}, ...]")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--metric", default="map@100", choices=("map@100", "ndcg@20", "err@20"))
    p.add_argument("--fold-file")
    p.add_argument("--mode", choices=("entity", "noun_phrase"))
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)

    for name, func, helptext in (
        ("mine-units", cmd_mine_units, "mine (phrase, quantity type) pairs from text"),
        ("train-quantity", cmd_train_quantity, "train the quantity-type classifier"),
    ):
        p = sub.add_parser(name, help=helptext)
        if name == "train-quantity":
            p.add_argument("pairs")
            p.add_argument("-o", "--output", required=True)
        else:
            p.add_argument("-o", "--output")
        src = p.add_mutually_exclusive_group()
        src.add_argument("--records", help="record file whose text units are used")
        src.add_argument("--text", help="plain text file, one text unit per line")
        p.set_defaults(func=func)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "search" and not (args.query or args.topics):
        parser.error("search needs a query or --topics")
    try:
        config = _load_config(args)
        return args.func(args, config)
    except FileNotFoundError as exc:
        msg, code = str(exc), EXIT_MISSING_FILE
    except (FormatError, TableParseError, RecordFormatError, IndexFormatError, ConfigError) as exc:
        msg, code = f"malformed input: {exc}", EXIT_MALFORMED
    except QueryBuildError as exc:
        msg, code = str(exc), EXIT_EMPTY_QUERY
    except UsageError as exc:
        msg, code = str(exc), EXIT_USAGE
    except (TrainingError, ValueError) as exc:
        msg, code = str(exc), EXIT_ERROR
    print(f"tablesearch: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
