"""Table records: the eight-field data model, XML ingestion and the numeric-content statistic."""

from __future__ import annotations

import json
import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

logger = logging.getLogger(__name__)


class FieldLevel(str, Enum):
    DOCUMENT = "document"
    TABLE = "table"
    CELL = "cell"


class FieldType(str, Enum):
    ARTICLE_TITLE = "article_title"
    ABSTRACT = "abstract"
    CAPTION = "caption"
    REFERRING_SENTENCE = "referring_sentence"
    FOOTNOTE = "footnote"
    ROW_HEADER = "row_header"
    COLUMN_HEADER = "column_header"
    CELL_VALUE = "cell_value"

    @property
    def level(self) -> FieldLevel:
        return _LEVELS[self]


_LEVELS = {
    FieldType.ARTICLE_TITLE: FieldLevel.DOCUMENT,
    FieldType.ABSTRACT: FieldLevel.DOCUMENT,
    FieldType.CAPTION: FieldLevel.TABLE,
    FieldType.REFERRING_SENTENCE: FieldLevel.TABLE,
    FieldType.FOOTNOTE: FieldLevel.TABLE,
    FieldType.ROW_HEADER: FieldLevel.CELL,
    FieldType.COLUMN_HEADER: FieldLevel.CELL,
    FieldType.CELL_VALUE: FieldLevel.CELL,
}

FIELD_TYPES: Tuple[FieldType, ...] = tuple(FieldType)


class NumericMatcher:
    """Regular-expression program deciding whether a cell string is numeric.

    A cell is numeric when the whole trimmed string (after light LaTeX
    normalisation) matches one of the named patterns.
    """

    _NUM = r"[+-]?(?:\d{1,3}(?:,\d{3})+(?:\.\d*)?|\d+(?:\.\d*)?|\.\d+)"
    _SCI = _NUM + r"(?:\s*[eE][+-]?\d+|\s*[x×*]\s*10\^\{?[+-]?\d+\}?)"
    _POW = r"10\^\{?[+-]?\d+\}?"
    _CORE = rf"(?:{_SCI}|{_POW}|{_NUM})"
    _UNSIGNED = r"(?:\d+(?:\.\d*)?|\.\d+)"
    _ASYM = rf"\^\{{?\+{_UNSIGNED}\}}?_\{{?-{_UNSIGNED}\}}?"
    _UNIT = r"[A-Za-z%°µμÅ'\"][^\s]{0,11}"

    PATTERNS: Tuple[Tuple[str, str], ...] = (
        ("integer", r"[+-]?(?:\d{1,3}(?:,\d{3})+|\d+)"),
        ("float", r"(?:\d{1,3}(?:,\d{3})+\.\d*|\d+\.\d*|\.\d+)"),
        ("signed_float", r"[+-]\s?(?:\d+(?:\.\d*)?|\.\d+)"),
        ("scientific", rf"(?:{_SCI}|{_POW})"),
        ("comparison", rf"(?:<|>|<=|>=|≤|≥|~|≈|≲|≳)\s*{_CORE}"),
        ("range", rf"{_CORE}\s*(?:-|to|~|\.\.)\s*{_CORE}"),
        ("accuracy", rf"{_CORE}\s*(?:±\s*{_CORE}|{_ASYM}|\(\d+\))"),
        (
            "value_with_unit",
            rf"(?:<|>|~|≈)?\s*{_CORE}(?:\s*(?:-|to|±)\s*{_CORE})?\s?{_UNIT}",
        ),
    )

    _LATEX_SUBS = (
        (re.compile(r"\$"), ""),
        (re.compile(r"\\pm|\+/-|\+-"), "±"),
        (re.compile(r"\\times"), "×"),
        (re.compile(r"\\(?:sim|approx)"), "~"),
        (re.compile(r"\\(?:,|;|!|quad)"), ""),
        (re.compile(r"[−–—]"), "-"),
    )

    def __init__(self, patterns: Optional[Sequence[Tuple[str, str]]] = None):
        self.patterns = tuple(patterns or self.PATTERNS)
        self._compiled = [(name, re.compile(rf"^(?:{rx})$")) for name, rx in self.patterns]

    def normalize(self, text: str) -> str:
        out = text.strip()
        for rx, repl in self._LATEX_SUBS:
            out = rx.sub(repl, out)
        out = re.sub(r"\s*±\s*", "±", out)
        return " ".join(out.split())

    def match(self, text: str) -> Optional[str]:
        """Name of the first matching pattern, or None."""
        norm = self.normalize(text)
        if not norm:
            return None
        for name, rx in self._compiled:
            if rx.match(norm):
                return name
        return None

    def __call__(self, text: str) -> bool:
        return self.match(text) is not None


DEFAULT_MATCHER = NumericMatcher()


def is_numeric_cell(text: str, matcher: NumericMatcher = DEFAULT_MATCHER) -> bool:
    return matcher(text)


@dataclass(frozen=True)
class TableRecord:
    table_id: str
    doc_id: str
    fields: Mapping[FieldType, Tuple[str, ...]]
    numeric_cell_count: int
    total_cell_count: int

    def __post_init__(self):
        missing = [ft for ft in FieldType if ft not in self.fields]
        if missing:
            raise ValueError(f"table {self.table_id}: missing field lists {missing}")
        if self.total_cell_count != len(self.fields[FieldType.CELL_VALUE]):
            raise ValueError(f"table {self.table_id}: total_cell_count disagrees with cell_value units")
        if not 0 <= self.numeric_cell_count <= self.total_cell_count:
            raise ValueError(f"table {self.table_id}: numeric_cell_count out of range")

    @classmethod
    def build(
        cls,
        table_id: str,
        doc_id: str,
        fields: Mapping[Union[FieldType, str], Iterable[str]],
        matcher: NumericMatcher = DEFAULT_MATCHER,
    ) -> "TableRecord":
        """Construct a record, filling absent fields and counting numeric cells."""
        normalized: Dict[FieldType, Tuple[str, ...]] = {ft: () for ft in FieldType}
        for key, units in fields.items():
            normalized[FieldType(key)] = tuple(units)
        cells = normalized[FieldType.CELL_VALUE]
        return cls(
            table_id=table_id,
            doc_id=doc_id,
            fields=normalized,
            numeric_cell_count=sum(1 for c in cells if matcher(c)),
            total_cell_count=len(cells),
        )

    def units(self, field_type: FieldType) -> Tuple[str, ...]:
        return self.fields[field_type]

    def to_dict(self) -> dict:
        return {
            "table_id": self.table_id,
            "doc_id": self.doc_id,
            "fields": {ft.value: list(self.fields[ft]) for ft in FieldType},
            "numeric_cell_count": self.numeric_cell_count,
            "total_cell_count": self.total_cell_count,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TableRecord":
        return cls(
            table_id=data["table_id"],
            doc_id=data["doc_id"],
            fields={FieldType(k): tuple(v) for k, v in data["fields"].items()},
            numeric_cell_count=int(data["numeric_cell_count"]),
            total_cell_count=int(data["total_cell_count"]),
        )


def numeric_fraction(record: TableRecord) -> float:
    if record.total_cell_count == 0:
        return 0.0
    return record.numeric_cell_count / record.total_cell_count


# --- XML ingestion ---------------------------------------------------------

class TableParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


# leaf element -> field
_LEAF_TAGS: Dict[str, FieldType] = {
    "article-title": FieldType.ARTICLE_TITLE,
    "abstract": FieldType.ABSTRACT,
    "caption": FieldType.CAPTION,
    "sentence": FieldType.REFERRING_SENTENCE,
    "footnote": FieldType.FOOTNOTE,
    "row_header": FieldType.ROW_HEADER,
    "column_header": FieldType.COLUMN_HEADER,
    "cell_value": FieldType.CELL_VALUE,
}
_CONTAINERS = {
    "referring-sentences": "sentence",
    "footnotes": "footnote",
    "row_headers": "row_header",
    "column_headers": "column_header",
    "cell_values": "cell_value",
}
_DOCUMENT_FIELDS = (FieldType.ARTICLE_TITLE, FieldType.ABSTRACT)


def _text(elem: ET.Element) -> str:
    return " ".join("".join(elem.itertext()).split())


def _byte_offset(data: bytes, line: int, column: int) -> int:
    lines = data.split(b"\n")
    return sum(len(l) + 1 for l in lines[: max(line - 1, 0)]) + column


def _collect(table: ET.Element, table_label: str) -> Dict[FieldType, List[str]]:
    fields: Dict[FieldType, List[str]] = {ft: [] for ft in FieldType}
    for child in table:
        tag = child.tag
        if not isinstance(tag, str):
            continue
        if tag in _CONTAINERS:
            expected = _CONTAINERS[tag]
            for item in child:
                if item.tag == expected:
                    fields[_LEAF_TAGS[expected]].append(_text(item))
                else:
                    logger.warning("%s: skipping unknown element <%s> in <%s>", table_label, item.tag, tag)
        elif tag in ("article-title", "abstract", "caption"):
            fields[_LEAF_TAGS[tag]].append(_text(child))
        else:
            logger.warning("%s: skipping unknown element <%s>", table_label, tag)
    return fields


def parse_table_xml(
    document: bytes,
    doc_id: Optional[str] = None,
    matcher: NumericMatcher = DEFAULT_MATCHER,
) -> List[TableRecord]:
    """Parse one XML document into table records.

    The root is either a single ``<table>`` or a wrapper element holding any
    number of ``<table>`` children.  A wrapper may carry document-level
    ``<article-title>``/``<abstract>`` which every table inherits unless it
    declares its own.  ``doc_id`` falls back to the root's ``doc_id``/``id``
    attribute, then to ``"doc"``.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line, column = exc.position
        raise TableParseError(f"malformed XML: {exc}", _byte_offset(document, line, column)) from None

    doc_id = doc_id or root.get("doc_id") or root.get("id") or "doc"
    if root.tag == "table":
        tables = [root]
        inherited: Dict[FieldType, List[str]] = {}
    else:
        tables = [el for el in root if el.tag == "table"]
        inherited = {ft: [] for ft in _DOCUMENT_FIELDS}
        for child in root:
            if child.tag in ("article-title", "abstract"):
                inherited[_LEAF_TAGS[child.tag]].append(_text(child))
            elif child.tag != "table":
                logger.warning("%s: skipping unknown element <%s>", doc_id, child.tag)

    records = []
    for ordinal, table in enumerate(tables):
        table_id = table.get("id") or f"{doc_id}#{ordinal}"
        fields = _collect(table, table_id)
        for ft, units in inherited.items():
            if not fields[ft]:
                fields[ft] = list(units)
        records.append(TableRecord.build(table_id, doc_id, fields, matcher))
    return records


def parse_xml_file(path: Union[str, Path], matcher: NumericMatcher = DEFAULT_MATCHER) -> List[TableRecord]:
    """Like :func:`parse_table_xml`; the file stem is the doc id unless the root names one."""
    path = Path(path)
    data = path.read_bytes()
    try:
        root = ET.fromstring(data)
        root_id = root.get("doc_id") or root.get("id") if root.tag != "table" else None
    except ET.ParseError:
        root_id = None
    return parse_table_xml(data, doc_id=root_id or path.stem, matcher=matcher)


def table_to_xml(record: TableRecord) -> bytes:
    """Serialize a record back to the XML vocabulary accepted by :func:`parse_table_xml`."""
    table = ET.Element("table", {"id": record.table_id})
    for tag in ("article-title", "abstract", "caption"):
        for unit in record.fields[_LEAF_TAGS[tag]]:
            ET.SubElement(table, tag).text = unit
    for container, leaf in _CONTAINERS.items():
        units = record.fields[_LEAF_TAGS[leaf]]
        if units:
            parent = ET.SubElement(table, container)
            for unit in units:
                ET.SubElement(parent, leaf).text = unit
    root = ET.Element("document", {"doc_id": record.doc_id})
    root.append(table)
    return ET.tostring(root, encoding="utf-8")


# --- record files (one JSON object per line) -------------------------------

class RecordFormatError(ValueError):
    pass


def write_records(records: Iterable[TableRecord], path: Union[str, Path]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
            n += 1
    return n


def read_records(path: Union[str, Path]) -> Iterator[TableRecord]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield TableRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise RecordFormatError(f"{path}:{lineno}: bad record: {exc}") from None


def ingest_directory(xml_dir: Union[str, Path], matcher: NumericMatcher = DEFAULT_MATCHER) -> List[TableRecord]:
    """Parse every ``*.xml`` file below ``xml_dir`` in sorted path order."""
    records: List[TableRecord] = []
    for path in sorted(Path(xml_dir).rglob("*.xml")):
        records.extend(parse_xml_file(path, matcher))
    return records
