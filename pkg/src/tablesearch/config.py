"""Run configuration: one JSON file, validated on load, with unknown keys rejected."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from .baselines import BASELINES, BM25Params
from .corpus import FieldType
from .ranker import ModelParams, SmoothingParams

RANKERS = ("full", "terms") + BASELINES
CONCEPT_MODES = ("entity", "noun_phrase")
PATH_KEYS = (
    "corpus", "records", "index", "ontology", "gazetteer", "lexicon", "classifier",
    "keyness_model", "text_units", "topics", "qrels", "folds",
)


class ConfigError(ValueError):
    pass


def default_config_dict() -> Dict[str, Any]:
    text = resources.files("tablesearch.data").joinpath("default_config.json").read_text("utf-8")
    return json.loads(text)


def _check_keys(section: Mapping, allowed, where: str) -> None:
    if not isinstance(section, Mapping):
        raise ConfigError(f"{where} must be an object")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _merge(base: Dict[str, Any], override: Mapping[str, Any], where: str = "config") -> Dict[str, Any]:
    _check_keys(override, base, where)
    out = copy.deepcopy(base)
    for key, value in override.items():
        # field weights are replaced wholesale so a partial mapping is an error, not a silent mix
        if isinstance(out[key], dict) and isinstance(value, Mapping) and key != "field_weights":
            out[key] = _merge(out[key], value, f"{where}.{key}")
        else:
            out[key] = value
    return out


def _smoothing(section: Mapping, where: str) -> SmoothingParams:
    _check_keys(section, ("lambda", "mu"), where)
    return SmoothingParams(lam=float(section["lambda"]), mu=float(section["mu"]))


@dataclass
class Config:
    concept_mode: str = "entity"
    ranker: str = "full"
    k: int = 100
    seed: int = 0
    model: ModelParams = field(default_factory=ModelParams)
    threshold: float = 0.65
    bm25: BM25Params = field(default_factory=BM25Params)
    paths: Dict[str, Optional[str]] = field(default_factory=lambda: {k: None for k in PATH_KEYS})

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Config":
        merged = _merge(default_config_dict(), data)
        if merged["concept_mode"] not in CONCEPT_MODES:
            raise ConfigError(f"concept_mode must be one of {CONCEPT_MODES}")
        if merged["ranker"] not in RANKERS:
            raise ConfigError(f"ranker must be one of {RANKERS}")
        if not isinstance(merged["k"], int) or merged["k"] < 0:
            raise ConfigError("k must be a nonnegative integer")
        m = merged["model"]
        try:
            weights = {FieldType(name): float(w) for name, w in m["field_weights"].items()}
        except ValueError as exc:
            raise ConfigError(f"model.field_weights: {exc}") from None
        sm = merged["smoothing"]
        _check_keys(sm, ("fulltext", "fielded"), "smoothing")
        threshold = float(merged["quantity"]["threshold"])
        if not 0.0 <= threshold <= 1.0:
            raise ConfigError("quantity.threshold must be in [0, 1]")
        try:
            model = ModelParams(
                field_weights=weights,
                alpha=float(m["alpha"]),
                beta=float(m["beta"]),
                sdm_weights=tuple(float(x) for x in m["sdm_weights"]),
                prior_enabled=bool(m["prior_enabled"]),
                fielded=_smoothing(sm["fielded"], "smoothing.fielded"),
                fulltext=_smoothing(sm["fulltext"], "smoothing.fulltext"),
                global_collection=bool(m["global_collection"]),
            )
            bm25 = BM25Params(k1=float(merged["bm25"]["k1"]), b=float(merged["bm25"]["b"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cls(merged["concept_mode"], merged["ranker"], merged["k"], int(merged["seed"]),
                   model, threshold, bm25, dict(merged["paths"]))

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None) -> "Config":
        if path is None:
            return cls.from_dict({})
        try:
            data = json.loads(Path(path).read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def path(self, key: str) -> Optional[str]:
        return self.paths.get(key)
