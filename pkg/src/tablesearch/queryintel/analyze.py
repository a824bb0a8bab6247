"""Turn a keyword query into weighted concepts and target quantities."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, List, Optional, Union

from ..analysis import stems
from ..index import Index
from .concepts import (
    Gazetteer,
    KeynessModel,
    Lexicon,
    extract_noun_phrases,
    link_entities,
    noun_phrase_keyness,
    normalize_weights,
)
from .quantity import (
    DIMENSIONLESS,
    CooccurrenceStats,
    QuantityClassifier,
    QuantityFeatureExtractor,
    QuantityOntology,
)
from .types import AnalyzedQuery, Concept, ConceptSource, QuantityTarget

logger = logging.getLogger(__name__)

CONCEPT_MODES = ("entity", "noun_phrase")


def bundled_text_units() -> List[str]:
    """Text units shipped with the package for unit mining and cooccurrence counts."""
    text = resources.files("tablesearch.data").joinpath("snippets.txt").read_text("utf-8")
    return [line for line in text.splitlines() if line.strip() and not line.startswith("#")]


@dataclass
class QueryAnalyzer:
    gazetteer: Gazetteer
    lexicon: Lexicon
    ontology: QuantityOntology
    classifier: QuantityClassifier
    extractor: QuantityFeatureExtractor
    mode: str = "entity"
    index: Optional[Index] = None
    keyness_model: Optional[KeynessModel] = None

    def __post_init__(self):
        if self.mode not in CONCEPT_MODES:
            raise ValueError(f"concept mode must be one of {CONCEPT_MODES}, got {self.mode!r}")

    @classmethod
    def load(cls, mode: str = "entity", index: Optional[Index] = None,
             gazetteer: Optional[Union[str, Path]] = None,
             lexicon: Optional[Union[str, Path]] = None,
             ontology: Optional[Union[str, Path]] = None,
             classifier: Optional[Union[str, Path]] = None,
             keyness_model: Optional[Union[str, Path]] = None,
             text_units: Optional[Iterable[str]] = None,
             threshold: Optional[float] = None) -> "QueryAnalyzer":
        """Load every resource, falling back to the bundled files for any path left unset."""
        onto = QuantityOntology.load(ontology)
        units = list(text_units) if text_units is not None else bundled_text_units()
        clf = QuantityClassifier.load(classifier)
        if threshold is not None:
            clf.threshold = threshold
        return cls(
            gazetteer=Gazetteer.load(gazetteer),
            lexicon=Lexicon.load(lexicon),
            ontology=onto,
            classifier=clf,
            extractor=QuantityFeatureExtractor(onto, CooccurrenceStats(units, onto)),
            mode=mode,
            index=index,
            keyness_model=KeynessModel.load(keyness_model) if keyness_model else None,
        )

    # -- concepts ----------------------------------------------------------

    def entity_concepts(self, query: str) -> List[Concept]:
        return normalize_weights(link_entities(query, self.gazetteer))

    def noun_phrase_concepts(self, query: str) -> List[Concept]:
        scored = []
        for phrase in extract_noun_phrases(query, self.lexicon):
            toks = stems(phrase)
            if not toks:
                continue
            h = noun_phrase_keyness(toks, self.index, self.keyness_model) if self.index is not None else 1.0
            scored.append((Concept(phrase.lower(), toks, source=ConceptSource.NOUN_PHRASE), h))
        return normalize_weights(scored)

    def concepts(self, query: str) -> List[Concept]:
        if self.mode == "entity":
            return self.entity_concepts(query)
        return self.noun_phrase_concepts(query)

    # -- quantities --------------------------------------------------------

    def classify(self, tokens) -> str:
        return self.classifier.predict(self.extractor.features(tuple(tokens)))

    def analyze(self, query: str) -> AnalyzedQuery:
        tokens = stems(query)
        concepts = self.concepts(query)
        concept_types = tuple((c.text, self.classify(c.tokens)) for c in concepts)
        targets = list(dict.fromkeys(t for _, t in concept_types if t != DIMENSIONLESS))
        quantities = tuple(
            QuantityTarget(name, self.ontology[name].symbol_stems, 1.0 / len(targets)) for name in targets
        )
        logger.debug("analyzed %r: concepts=%s quantities=%s", query, [c.text for c in concepts], targets)
        return AnalyzedQuery(query, tokens, tuple(concepts), quantities, concept_types)


def analyze_query(query: str, analyzer: QueryAnalyzer) -> AnalyzedQuery:
    return analyzer.analyze(query)
