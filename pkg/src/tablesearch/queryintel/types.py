from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple


class ConceptSource(str, Enum):
    ENTITY = "entity"
    NOUN_PHRASE = "noun_phrase"


@dataclass(frozen=True)
class Concept:
    text: str
    tokens: Tuple[str, ...]
    weight: float = 0.0
    source: ConceptSource = ConceptSource.ENTITY
    raw_score: float = 0.0


@dataclass(frozen=True)
class QuantityTarget:
    """An inferred quantity type and the unit-symbol stems it expands to."""

    name: str
    symbols: Tuple[str, ...]
    weight: float


@dataclass(frozen=True)
class AnalyzedQuery:
    text: str
    tokens: Tuple[str, ...]
    concepts: Tuple[Concept, ...] = ()
    quantities: Tuple[QuantityTarget, ...] = ()
    concept_types: Tuple[Tuple[str, str], ...] = field(default=())
