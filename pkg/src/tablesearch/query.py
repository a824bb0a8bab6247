"""Structured query trees over probabilistic operators, plus an Indri-style printer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple, Union

from .corpus import FieldType

FieldKey = Optional[FieldType]


@dataclass(frozen=True)
class Term:
    stem: str
    field: FieldKey = None


@dataclass(frozen=True)
class OrderedWindow:
    terms: Tuple[str, ...]
    field: FieldKey = None


@dataclass(frozen=True)
class UnorderedWindow:
    terms: Tuple[str, ...]
    width: int = 8
    field: FieldKey = None


@dataclass(frozen=True)
class And:
    children: Tuple["QueryNode", ...]


@dataclass(frozen=True)
class WAnd:
    children: Tuple[Tuple[float, "QueryNode"], ...]

    def __post_init__(self):
        if any(w <= 0 for w, _ in self.children):
            raise ValueError("#wand weights must be positive")


@dataclass(frozen=True)
class WSum:
    children: Tuple[Tuple[float, "QueryNode"], ...]

    def __post_init__(self):
        if any(w <= 0 for w, _ in self.children):
            raise ValueError("#wsum weights must be positive")


@dataclass(frozen=True)
class Max:
    children: Tuple["QueryNode", ...]


Leaf = Union[Term, OrderedWindow, UnorderedWindow]
QueryNode = Union[Term, OrderedWindow, UnorderedWindow, And, WAnd, WSum, Max]
LEAF_TYPES = (Term, OrderedWindow, UnorderedWindow)


def children(node: QueryNode) -> Tuple[QueryNode, ...]:
    if isinstance(node, (And, Max)):
        return node.children
    if isinstance(node, (WAnd, WSum)):
        return tuple(child for _, child in node.children)
    return ()


def leaves(node: QueryNode) -> Iterator[Leaf]:
    if isinstance(node, LEAF_TYPES):
        yield node
        return
    for child in children(node):
        yield from leaves(child)


def leaf_terms(node: QueryNode) -> Tuple[str, ...]:
    out = []
    for leaf in leaves(node):
        out.extend([leaf.stem] if isinstance(leaf, Term) else leaf.terms)
    return tuple(dict.fromkeys(out))


def count_leaves(node: QueryNode) -> int:
    return sum(1 for _ in leaves(node))


# -- printing ---------------------------------------------------------------

def _suffix(field: FieldKey) -> str:
    return "" if field is None else f".({field.value})"


def _weight(w: float) -> str:
    return f"{w:.4g}"


def _common_field(nodes: Sequence[QueryNode]) -> Tuple[bool, FieldKey]:
    if nodes and all(isinstance(n, Term) for n in nodes):
        fields = {n.field for n in nodes}
        if len(fields) == 1:
            return True, fields.pop()
    return False, None


def format_query(node: QueryNode, indent: int = 0, step: int = 2) -> str:
    """Pretty-print a tree in Indri query syntax, one operator per line."""
    pad = " " * indent
    if isinstance(node, Term):
        return f"{pad}{node.stem}{_suffix(node.field)}"
    if isinstance(node, OrderedWindow):
        return f"{pad}#1( {' '.join(node.terms)} ){_suffix(node.field)}"
    if isinstance(node, UnorderedWindow):
        return f"{pad}#uw{node.width}( {' '.join(node.terms)} ){_suffix(node.field)}"
    if isinstance(node, And):
        flat, field = _common_field(node.children)
        if flat:
            return f"{pad}#and( {' '.join(c.stem for c in node.children)} ){_suffix(field)}"
        body = "\n".join(format_query(c, indent + step, step) for c in node.children)
        return f"{pad}#and(\n{body} )"
    if isinstance(node, Max):
        body = "\n".join(format_query(c, indent + step, step) for c in node.children)
        return f"{pad}#max(\n{body} )"
    name = "#wand" if isinstance(node, WAnd) else "#wsum"
    lines = []
    for w, child in node.children:
        text = format_query(child, indent + step, step)
        head = " " * (indent + step)
        lines.append(f"{head}{_weight(w)} {text.lstrip()}")
    return f"{pad}{name}(\n" + "\n".join(lines) + " )"
