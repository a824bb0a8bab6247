"""Quantity expansion: ontology lookup, unit-tagger training data, and the quantity-type classifier."""

from __future__ import annotations

import logging
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np

from ..analysis import stems, words
from .concepts import Lexicon, chunk_noun_phrases

logger = logging.getLogger(__name__)

DIMENSIONLESS = "dimensionless"
FEATURE_NAMES = ("reciprocal_rank", "lm_score", "cooccurrence", "name_overlap")
DEFAULT_THRESHOLD = 0.65


def _data_text(name: str) -> str:
    return resources.files("tablesearch.data").joinpath(name).read_text("utf-8")


# -- ontology ---------------------------------------------------------------

@dataclass(frozen=True)
class QuantityType:
    name: str
    symbols: Tuple[str, ...]
    description: str
    si: str = "derived"

    @property
    def symbol_stems(self) -> Tuple[str, ...]:
        out: List[str] = []
        for sym in self.symbols:
            out.extend(stems(sym))
        return tuple(dict.fromkeys(out))

    @property
    def name_stems(self) -> Tuple[str, ...]:
        return stems(self.name)


class QuantityOntology:
    def __init__(self, types: Sequence[QuantityType], background: str = ""):
        for qt in types:
            if not qt.symbols:
                raise ValueError(f"quantity type {qt.name} has no unit symbols")
            if qt.si not in ("base", "derived"):
                raise ValueError(f"quantity type {qt.name}: si must be base or derived, got {qt.si!r}")
        self.types: Dict[str, QuantityType] = {qt.name: qt for qt in types}
        self.background = background
        by_symbol: Dict[str, Set[str]] = defaultdict(set)
        for qt in types:
            for sym in qt.symbols:
                by_symbol[sym].add(qt.name)
        self._by_symbol = dict(by_symbol)

    def __contains__(self, name: str) -> bool:
        return name in self.types

    def __getitem__(self, name: str) -> QuantityType:
        return self.types[name]

    @property
    def names(self) -> List[str]:
        return sorted(self.types)

    def types_of_symbol(self, symbol: str) -> Set[str]:
        return self._by_symbol.get(symbol, set())

    def symbols(self) -> List[str]:
        return sorted(self._by_symbol, key=lambda s: (-len(s), s))

    def restrict(self, names: Iterable[str]) -> "QuantityOntology":
        keep = set(names)
        return QuantityOntology([qt for n, qt in self.types.items() if n in keep], self.background)

    @classmethod
    def parse(cls, text: str, background: str = "") -> "QuantityOntology":
        types = []
        for block in re.split(r"\n\s*\n", text):
            record: Dict[str, str] = {}
            key = None
            for line in block.splitlines():
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                if line[:1].isspace() and key:
                    record[key] += " " + line.strip()
                    continue
                key, _, value = line.partition(":")
                key = key.strip()
                record[key] = value.strip()
            if not record:
                continue
            try:
                types.append(QuantityType(
                    name=record["name"],
                    symbols=tuple(s.strip() for s in record["symbols"].split(",") if s.strip()),
                    description=record.get("description", ""),
                    si=record.get("si", "derived"),
                ))
            except KeyError as exc:
                raise ValueError(f"ontology record missing {exc}: {block[:60]!r}") from None
        return cls(types, background)

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None,
             background_path: Optional[Union[str, Path]] = None) -> "QuantityOntology":
        text = Path(path).read_text("utf-8") if path else _data_text("ontology.txt")
        bg = Path(background_path).read_text("utf-8") if background_path else _data_text("background.txt")
        bg = "\n".join(l for l in bg.splitlines() if not l.startswith("#"))
        return cls.parse(text, bg)


# -- training data from a unit tagger ---------------------------------------

_BOUNDARY = r"(?=$|[\s,.;:)\]])"
_NUMBER_RE = re.compile(r"[\d.]")


class UnitTagger:
    """High-precision regular-expression tagger for ``phrase -> quantity type`` pairs.

    Three shapes are recognised, each anchored on an ontology unit symbol
    (case-sensitive, unambiguous across types):

    * ``<noun phrase> (<unit>)`` or ``[<unit>]``, e.g. ``Iron line width (keV)``;
      comma-separated lists are accepted when every listed symbol agrees on
      one type.
    * ``<noun phrase> in|of <unit>``, e.g. ``distance in cm``; single-letter
      symbols are not trusted in running text.
    * a bare header ``<noun phrase> <unit>`` where the unit has 2+ characters.

    The noun phrase must end right before the anchor and must not be the
    object of a preposition (``distance to the source in kpc`` yields
    nothing rather than ``source``).
    """

    def __init__(self, ontology: QuantityOntology, lexicon: Lexicon):
        self.ontology = ontology
        self.lexicon = lexicon
        alts = "|".join(re.escape(s) for s in ontology.symbols())
        self._paren = re.compile(r"[(\[]\s*([^()\[\]]{1,40}?)\s*[)\]]")
        self._prep = re.compile(rf"\s(in|of)\s+({alts}){_BOUNDARY}")
        self._bare = re.compile(rf"^\s*([^\d()\[\]]+?)\s+({alts})\s*$")

    def _unit_type(self, symbols: Sequence[str]) -> Optional[str]:
        found: Set[str] = set()
        for sym in symbols:
            types = self.ontology.types_of_symbol(sym)
            if len(types) != 1:
                return None
            found |= types
        return found.pop() if len(found) == 1 else None

    def _phrase_before(self, text: str) -> Optional[str]:
        ws = words(text)
        if not ws or not text.rstrip() or not (text.rstrip()[-1].isalnum() or text.rstrip()[-1] in "_"):
            return None
        tagged = [(w, self.lexicon.tag(w)) for w in ws]
        spans = chunk_noun_phrases(tagged)
        if not spans or spans[-1][1] != len(ws):
            return None
        start = spans[-1][0]
        # participle modifiers belong to the compound: "melting point", "radiated power"
        while start > 0 and tagged[start - 1][1] == "VERB" and ws[start - 1].lower().endswith(("ing", "ed")):
            start -= 1
        j = start - 1
        while j >= 0 and tagged[j][1] == "DET":
            j -= 1
        if j >= 0 and tagged[j][1] == "PREP":
            return None
        phrase = ws[start:]
        if any(_NUMBER_RE.fullmatch(w[0]) for w in phrase):
            return None
        return " ".join(phrase).lower()

    def tag(self, text: str) -> List[Tuple[str, str]]:
        pairs: List[Tuple[str, str]] = []
        for m in self._paren.finditer(text):
            items = [s.strip() for s in re.split(r"[,;]", m.group(1))]
            if not items or any(not s for s in items):
                continue
            qtype = self._unit_type(items)
            if qtype is None:
                continue
            phrase = self._phrase_before(text[: m.start()])
            if phrase:
                pairs.append((phrase, qtype))
        for m in self._prep.finditer(text):
            symbol = m.group(2)
            if len(symbol) < 2:
                continue
            qtype = self._unit_type([symbol])
            phrase = self._phrase_before(text[: m.start()]) if qtype else None
            if phrase:
                pairs.append((phrase, qtype))
        m = self._bare.match(text)
        if m and len(m.group(2)) >= 2:
            qtype = self._unit_type([m.group(2)])
            head = m.group(1)
            phrase = self._phrase_before(head) if qtype else None
            if phrase and phrase == " ".join(words(head)).lower():
                pairs.append((phrase, qtype))
        return list(dict.fromkeys(pairs))


def mine_unit_training_data(corpus: Iterable[str], ontology: QuantityOntology,
                            lexicon: Optional[Lexicon] = None) -> List[Tuple[str, str]]:
    """Deduplicated (term sequence, quantity type) pairs, in first-seen order."""
    tagger = UnitTagger(ontology, lexicon or Lexicon.load())
    seen: Dict[Tuple[str, str], None] = {}
    for text in corpus:
        for pair in tagger.tag(text):
            seen.setdefault(pair, None)
    return list(seen)


# -- features ---------------------------------------------------------------

class QuantityLanguageModels:
    """One pseudo-document per quantity type (description + unit symbols) plus a background document."""

    def __init__(self, ontology: QuantityOntology, mu: float = 100.0):
        self.mu = mu
        self.docs: Dict[str, Counter] = {}
        for name, qt in ontology.types.items():
            self.docs[name] = Counter(stems(qt.description) + qt.symbol_stems)
        self.docs[DIMENSIONLESS] = Counter(stems(ontology.background))
        self.collection = Counter()
        for doc in self.docs.values():
            self.collection.update(doc)
        self.total = sum(self.collection.values())
        self.lengths = {name: sum(doc.values()) for name, doc in self.docs.items()}

    def _corpus_prob(self, term: str) -> float:
        c = self.collection[term]
        return c / self.total if c else 0.5 / (self.total + 1)

    def log_likelihood(self, name: str, tokens: Sequence[str]) -> float:
        doc, length = self.docs[name], self.lengths[name]
        return sum(math.log((doc[t] + self.mu * self._corpus_prob(t)) / (length + self.mu)) for t in tokens)

    def retrieve(self, tokens: Sequence[str]) -> Tuple[List[str], Dict[str, float]]:
        """Ranked candidate names (those matching a concept term) and the posterior of every candidate."""
        lls = {name: self.log_likelihood(name, tokens) for name in self.docs}
        top = max(lls.values())
        z = sum(math.exp(v - top) for v in lls.values())
        posterior = {name: math.exp(v - top) / z for name, v in lls.items()}
        matched = [name for name, doc in self.docs.items() if any(doc[t] for t in tokens)]
        matched.sort(key=lambda n: (-lls[n], n))
        return matched, posterior


class CooccurrenceStats:
    """Per-term counts of text units, and of units that also hold a symbol of each quantity type."""

    def __init__(self, units: Iterable[str], ontology: QuantityOntology):
        symbol_types: Dict[str, Set[str]] = defaultdict(set)
        for name, qt in ontology.types.items():
            for s in qt.symbol_stems:
                symbol_types[s].add(name)
        self.occurrences: Counter = Counter()
        self.cooccurrences: Dict[str, Counter] = defaultdict(Counter)
        for text in units:
            toks = set(stems(text))
            present = set().union(*(symbol_types.get(t, set()) for t in toks)) if toks else set()
            for t in toks:
                self.occurrences[t] += 1
                for name in present:
                    self.cooccurrences[t][name] += 1

    def rate(self, term: str, qtype: str) -> float:
        occ = self.occurrences[term]
        return self.cooccurrences[term][qtype] / occ if occ else 0.0

    def mean_rate(self, tokens: Sequence[str], qtype: str) -> float:
        if not tokens:
            return 0.0
        return sum(self.rate(t, qtype) for t in tokens) / len(tokens)


def _contains_sequence(tokens: Sequence[str], seq: Sequence[str]) -> bool:
    n = len(seq)
    return n > 0 and any(tuple(tokens[i : i + n]) == tuple(seq) for i in range(len(tokens) - n + 1))


class QuantityFeatureExtractor:
    def __init__(self, ontology: QuantityOntology, cooccurrence: CooccurrenceStats,
                 lms: Optional[QuantityLanguageModels] = None):
        self.ontology = ontology
        self.cooccurrence = cooccurrence
        self.lms = lms or QuantityLanguageModels(ontology)

    def features(self, tokens: Sequence[str]) -> Dict[str, np.ndarray]:
        """Feature vector for every candidate type, keyed by type name."""
        tokens = tuple(tokens)
        ranked, posterior = self.lms.retrieve(tokens)
        rank_of = {name: i + 1 for i, name in enumerate(ranked)}
        out = {}
        for name, qt in self.ontology.types.items():
            retrieved = name in rank_of
            overlap = _contains_sequence(tokens, qt.name_stems) or any(s in tokens for s in qt.symbol_stems)
            out[name] = np.array([
                1.0 / rank_of[name] if retrieved else 0.0,
                posterior[name] if retrieved else 0.0,
                self.cooccurrence.mean_rate(tokens, name),
                1.0 if overlap else 0.0,
            ])
        return out


def quantity_features(concept_tokens: Sequence[str], extractor: QuantityFeatureExtractor) -> Dict[str, np.ndarray]:
    return extractor.features(concept_tokens)


# -- logistic regression ----------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def logistic_loss(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean log loss plus (l2/2)||w||^2; ``params[0]`` is the unpenalized bias."""
    z = params[0] + X @ params[1:]
    # log(1 + e^z) - y z, written stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z)
    return float(loss + 0.5 * l2 * np.dot(params[1:], params[1:]))


def logistic_gradient(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> np.ndarray:
    residual = _sigmoid(params[0] + X @ params[1:]) - y
    grad = np.empty_like(params)
    grad[0] = residual.mean()
    grad[1:] = X.T @ residual / len(y) + l2 * params[1:]
    return grad


@dataclass
class FitResult:
    params: np.ndarray
    iterations: int
    loss: float
    converged: bool


def fit_logistic(X: np.ndarray, y: np.ndarray, l2: float = 1e-2, learning_rate: float = 1.0,
                 tol: float = 1e-6, max_iter: int = 10_000) -> FitResult:
    """Full-batch gradient descent from zero, stopping when the loss changes by less than ``tol``."""
    params = np.zeros(X.shape[1] + 1)
    loss = logistic_loss(params, X, y, l2)
    for it in range(1, max_iter + 1):
        params = params - learning_rate * logistic_gradient(params, X, y, l2)
        new_loss = logistic_loss(params, X, y, l2)
        if abs(loss - new_loss) < tol:
            return FitResult(params, it, new_loss, True)
        loss = new_loss
    logger.warning("logistic regression stopped after %d iterations without converging", max_iter)
    return FitResult(params, max_iter, loss, False)


class TrainingError(ValueError):
    pass


@dataclass
class QuantityClassifier:
    """One-vs-all logistic models keyed by quantity type, each ``[bias, w1..w4]``."""

    models: Dict[str, np.ndarray]
    threshold: float = DEFAULT_THRESHOLD

    @property
    def types(self) -> List[str]:
        return sorted(self.models)

    def confidences(self, features: Mapping[str, np.ndarray]) -> Dict[str, float]:
        out = {}
        for name in self.types:
            if name in features:
                p = self.models[name]
                out[name] = float(_sigmoid(np.array(p[0] + features[name] @ p[1:])))
        return out

    def predict(self, features: Mapping[str, np.ndarray]) -> str:
        conf = self.confidences(features)
        if not conf:
            return DIMENSIONLESS
        best = min(conf, key=lambda n: (-conf[n], n))
        return best if conf[best] > self.threshold else DIMENSIONLESS

    def save(self, path: Union[str, Path]) -> None:
        lines = [
            "# tablesearch quantity classifier",
            "version\t1",
            f"threshold\t{self.threshold!r}",
            "features\t" + "\t".join(FEATURE_NAMES),
        ]
        for name in self.types:
            lines.append("type\t" + name + "\t" + "\t".join(repr(float(v)) for v in self.models[name]))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def parse(cls, text: str) -> "QuantityClassifier":
        models: Dict[str, np.ndarray] = {}
        threshold = DEFAULT_THRESHOLD
        version = None
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            key, *rest = line.split("\t")
            if key == "version":
                version = rest[0]
            elif key == "threshold":
                threshold = float(rest[0])
            elif key == "features":
                if tuple(rest) != FEATURE_NAMES:
                    raise ValueError(f"classifier features {rest} do not match {FEATURE_NAMES}")
            elif key == "type":
                models[rest[0]] = np.array([float(v) for v in rest[1:]])
        if version != "1":
            raise ValueError(f"unsupported classifier version {version!r}")
        return cls(models, threshold)

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None) -> "QuantityClassifier":
        text = Path(path).read_text("utf-8") if path else _data_text("quantity_classifier.txt")
        return cls.parse(text)


def train_quantity_classifier(pairs: Sequence[Tuple[str, str]], extractor: QuantityFeatureExtractor,
                              threshold: float = DEFAULT_THRESHOLD, min_examples: int = 5,
                              l2: float = 1e-2) -> QuantityClassifier:
    """Fit one logistic model per quantity type that has enough mined examples."""
    counts = Counter(label for _, label in pairs if label in extractor.ontology)
    unknown = sorted({label for _, label in pairs if label not in extractor.ontology})
    if unknown:
        logger.warning("ignoring pairs labelled with unknown types: %s", ", ".join(unknown))
    kept = sorted(t for t, c in counts.items() if c >= min_examples)
    sparse = sorted(t for t, c in counts.items() if c < min_examples)
    if len(kept) < 2:
        detail = ", ".join(f"{t} ({counts[t]})" for t in sparse) or "none"
        raise TrainingError(f"need >= 2 quantity types with >= {min_examples} examples; too few for: {detail}")
    if sparse:
        logger.warning("discarding types with fewer than %d examples: %s", min_examples, ", ".join(sparse))
    examples = [(phrase, label) for phrase, label in pairs if label in kept]
    feats = [extractor.features(stems(phrase)) for phrase, _ in examples]
    models = {}
    for qtype in kept:
        X = np.array([f[qtype] for f in feats])
        y = np.array([1.0 if label == qtype else 0.0 for _, label in examples])
        models[qtype] = fit_logistic(X, y, l2=l2).params
    return QuantityClassifier(models, threshold)


def classify_quantity(concept_tokens: Sequence[str], classifier: QuantityClassifier,
                      extractor: QuantityFeatureExtractor) -> str:
    return classifier.predict(extractor.features(concept_tokens))
