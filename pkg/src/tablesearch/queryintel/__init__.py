"""Query understanding: key concepts, their weights, and the quantities they call for."""

from .types import AnalyzedQuery, Concept, ConceptSource, QuantityTarget

__all__ = ["AnalyzedQuery", "Concept", "ConceptSource", "QuantityTarget"]
