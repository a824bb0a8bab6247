"""Positional, field-aware inverted index over table records.

Every text unit (one sentence, header or cell) is tokenized separately and
keeps its own position space, so window operators never match across unit
boundaries.  Collection statistics are kept per field type and for the whole
corpus; a field of ``None`` means the union of all eight fields.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .analysis import STEMMER_NAME, stems
from .corpus import FIELD_TYPES, FieldType, TableRecord

logger = logging.getLogger(__name__)

INDEX_FORMAT = "tablesearch-index"
INDEX_VERSION = 1
UNORDERED_WIDTH = 8

Unit = Tuple[str, ...]
FieldKey = Optional[FieldType]


class IndexFormatError(ValueError):
    pass


class DuplicateTableError(ValueError):
    pass


@dataclass(frozen=True)
class Posting:
    table_id: str
    field_type: FieldType
    unit_ordinal: int
    positions: Tuple[int, ...]


@dataclass
class TableEntry:
    table_id: str
    doc_id: str
    units: Dict[FieldType, List[Unit]]
    numeric_cell_count: int
    total_cell_count: int
    counts: Dict[FieldType, Counter] = field(default_factory=dict)
    lengths: Dict[FieldType, int] = field(default_factory=dict)

    def __post_init__(self):
        for ft in FIELD_TYPES:
            units = self.units.setdefault(ft, [])
            self.counts[ft] = Counter(tok for unit in units for tok in unit)
            self.lengths[ft] = sum(len(unit) for unit in units)

    @property
    def numeric_fraction(self) -> float:
        return self.numeric_cell_count / self.total_cell_count if self.total_cell_count else 0.0

    def count(self, term: str, field_type: FieldKey) -> int:
        if field_type is None:
            return sum(self.counts[ft][term] for ft in FIELD_TYPES)
        return self.counts[field_type][term]

    def length(self, field_type: FieldKey) -> int:
        if field_type is None:
            return sum(self.lengths.values())
        return self.lengths[field_type]

    def field_units(self, field_type: FieldKey) -> List[Unit]:
        if field_type is None:
            return [u for ft in FIELD_TYPES for u in self.units[ft]]
        return self.units[field_type]


@dataclass
class CollectionStats:
    num_tables: int = 0
    field_tokens: Dict[FieldType, int] = field(default_factory=lambda: {ft: 0 for ft in FIELD_TYPES})
    ctf: Dict[FieldType, Counter] = field(default_factory=lambda: {ft: Counter() for ft in FIELD_TYPES})
    df: Dict[FieldType, Counter] = field(default_factory=lambda: {ft: Counter() for ft in FIELD_TYPES})
    corpus_tokens: int = 0
    corpus_ctf: Counter = field(default_factory=Counter)
    corpus_df: Counter = field(default_factory=Counter)

    def total(self, field_type: FieldKey) -> int:
        return self.corpus_tokens if field_type is None else self.field_tokens[field_type]

    def term_ctf(self, term: str, field_type: FieldKey) -> int:
        return self.corpus_ctf[term] if field_type is None else self.ctf[field_type][term]

    def term_df(self, term: str, field_type: FieldKey) -> int:
        return self.corpus_df[term] if field_type is None else self.df[field_type][term]


def count_windows(units: Iterable[Unit], terms: Sequence[str], ordered: bool, width: int = UNORDERED_WIDTH) -> int:
    """Count window matches of ``terms`` inside each unit.

    Ordered: exact adjacent occurrences of the sequence.  Unordered: start
    positions ``p`` holding one of the terms such that ``unit[p:p+width]``
    contains every term (with multiplicity).  One term is plain frequency.
    """
    terms = tuple(terms)
    if not terms:
        raise ValueError("window needs at least one term")
    n = len(terms)
    total = 0
    if n == 1:
        return sum(unit.count(terms[0]) for unit in units)
    need = Counter(terms)
    for unit in units:
        if ordered:
            total += sum(1 for p in range(len(unit) - n + 1) if unit[p : p + n] == terms)
        else:
            for p, tok in enumerate(unit):
                if tok in need:
                    window = Counter(unit[p : p + width])
                    if all(window[t] >= c for t, c in need.items()):
                        total += 1
    return total


class Index:
    def __init__(self, entries: Iterable[TableEntry] = ()):
        self.tables: Dict[str, TableEntry] = {}
        self.postings: Dict[str, List[Posting]] = {}
        self.stats = CollectionStats()
        for entry in entries:
            if entry.table_id in self.tables:
                raise DuplicateTableError(f"duplicate table_id {entry.table_id!r}")
            self.tables[entry.table_id] = entry
        self.table_ids: List[str] = sorted(self.tables)
        self._build()

    def _build(self) -> None:
        st = self.stats
        st.num_tables = len(self.table_ids)
        postings: Dict[str, List[Posting]] = {}
        for tid in self.table_ids:
            entry = self.tables[tid]
            seen_anywhere = set()
            for ft in FIELD_TYPES:
                st.field_tokens[ft] += entry.lengths[ft]
                st.ctf[ft].update(entry.counts[ft])
                st.df[ft].update(entry.counts[ft].keys())
                seen_anywhere.update(entry.counts[ft].keys())
                for ordinal, unit in enumerate(entry.units[ft]):
                    positions: Dict[str, List[int]] = {}
                    for pos, tok in enumerate(unit):
                        positions.setdefault(tok, []).append(pos)
                    for tok, pos_list in positions.items():
                        postings.setdefault(tok, []).append(Posting(tid, ft, ordinal, tuple(pos_list)))
            st.corpus_df.update(seen_anywhere)
        for ft in FIELD_TYPES:
            st.corpus_ctf.update(st.ctf[ft])
        st.corpus_tokens = sum(st.field_tokens.values())
        self.postings = postings

    # -- lookups -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.table_ids)

    def __contains__(self, table_id: str) -> bool:
        return table_id in self.tables

    def entry(self, table_id: str) -> TableEntry:
        return self.tables[table_id]

    def postings_for(self, term: str, field_type: FieldKey = None) -> List[Posting]:
        plist = self.postings.get(term, [])
        if field_type is None:
            return list(plist)
        return [p for p in plist if p.field_type is field_type]

    def tables_containing(self, terms: Iterable[str]) -> List[str]:
        found = {p.table_id for t in terms for p in self.postings.get(t, ())}
        return sorted(found)

    def field_length(self, table_id: str, field_type: FieldKey) -> int:
        return self.tables[table_id].length(field_type)

    def term_count(self, table_id: str, term: str, field_type: FieldKey) -> int:
        return self.tables[table_id].count(term, field_type)

    def window_count(self, table_id: str, terms: Sequence[str], field_type: FieldKey, ordered: bool,
                     width: int = UNORDERED_WIDTH) -> int:
        return count_windows(self.tables[table_id].field_units(field_type), terms, ordered, width)

    def collection_window_count(self, terms: Sequence[str], field_type: FieldKey, ordered: bool,
                                width: int = UNORDERED_WIDTH) -> int:
        if len(terms) == 1:
            return self.stats.term_ctf(terms[0], field_type)
        candidates = set(self.tables_containing(terms[:1]))
        for t in terms[1:]:
            candidates &= set(self.tables_containing([t]))
        return sum(self.window_count(tid, terms, field_type, ordered, width) for tid in sorted(candidates))

    def vocabulary(self) -> List[str]:
        return sorted(self.postings)

    # -- persistence -------------------------------------------------------

    def stats_rows(self) -> Iterator[Tuple[str, str, int, int]]:
        """(term, field, ctf, df) rows; field ``all`` is the whole-table union."""
        st = self.stats
        for term in self.vocabulary():
            for ft in FIELD_TYPES:
                if st.ctf[ft][term]:
                    yield term, ft.value, st.ctf[ft][term], st.df[ft][term]
            yield term, "all", st.corpus_ctf[term], st.corpus_df[term]

    def dump_stats(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("term\tfield\tctf\tdf\n")
            for row in self.stats_rows():
                fh.write("\t".join(str(x) for x in row) + "\n")

    def save(self, directory: Union[str, Path]) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "stemmer": STEMMER_NAME,
            "num_tables": len(self),
            "corpus_tokens": self.stats.corpus_tokens,
        }
        with open(directory / "tables.jsonl", "w", encoding="utf-8") as fh:
            for tid in self.table_ids:
                e = self.tables[tid]
                row = {
                    "table_id": e.table_id,
                    "doc_id": e.doc_id,
                    "numeric_cell_count": e.numeric_cell_count,
                    "total_cell_count": e.total_cell_count,
                    "units": {ft.value: [list(u) for u in e.units[ft]] for ft in FIELD_TYPES},
                }
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        self.dump_stats(directory / "stats.tsv")
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "Index":
        directory = Path(directory)
        manifest_path = directory / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no index manifest in {directory}")
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise IndexFormatError(f"{manifest_path}: invalid JSON ({exc})") from None
        if manifest.get("format") != INDEX_FORMAT or manifest.get("version") != INDEX_VERSION:
            raise IndexFormatError(
                f"{directory}: unsupported index format {manifest.get('format')} v{manifest.get('version')}"
            )
        if manifest.get("stemmer") != STEMMER_NAME:
            raise IndexFormatError(f"{directory}: built with stemmer {manifest.get('stemmer')}, expected {STEMMER_NAME}")
        entries = []
        with open(directory / "tables.jsonl", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                try:
                    row = json.loads(line)
                    entries.append(TableEntry(
                        table_id=row["table_id"],
                        doc_id=row["doc_id"],
                        units={FieldType(k): [tuple(u) for u in v] for k, v in row["units"].items()},
                        numeric_cell_count=row["numeric_cell_count"],
                        total_cell_count=row["total_cell_count"],
                    ))
                except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                    raise IndexFormatError(f"{directory}/tables.jsonl:{lineno}: {exc}") from None
        return cls(entries)


def entry_from_record(record: TableRecord) -> TableEntry:
    return TableEntry(
        table_id=record.table_id,
        doc_id=record.doc_id,
        units={ft: [stems(text) for text in record.fields[ft]] for ft in FIELD_TYPES},
        numeric_cell_count=record.numeric_cell_count,
        total_cell_count=record.total_cell_count,
    )


def build_index(records: Iterable[TableRecord]) -> Index:
    entries = []
    seen = set()
    for rec in records:
        if rec.table_id in seen:
            raise DuplicateTableError(f"duplicate table_id {rec.table_id!r}")
        seen.add(rec.table_id)
        entries.append(entry_from_record(rec))
    index = Index(entries)
    logger.info("indexed %d tables, %d tokens", len(index), index.stats.corpus_tokens)
    return index


def window_count(index: Index, table_id: str, terms: Sequence[str], field_type: FieldKey,
                 ordered: bool, width: int = UNORDERED_WIDTH) -> int:
    return index.window_count(table_id, terms, field_type, ordered, width)
