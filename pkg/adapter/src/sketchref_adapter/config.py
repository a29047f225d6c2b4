"""Adapter configuration: which backend produces which signal."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping


class AdapterError(ValueError):
    """Any adapter-level failure: bad config, bad input, bad output."""


# Builtin deterministic backends. The clip-* and rtmpose-* ids are
# aliases kept so configs written for hosted models resolve here too.
EMBEDDING_BACKENDS = ("pooled-grid-67", "clip-vit-b-32")
DETECTOR_BACKENDS = ("dark-regions", "builtin-detector")
POSE_BACKENDS = ("grid-centroid", "rtmpose-like")

# schema name -> point count; shared wire convention with the engine
SCHEMA_POINTS: Mapping[str, int] = MappingProxyType(
    {"coco17": 17, "face106": 106, "animal20": 20}
)
DOMAIN_SCHEMAS: Mapping[str, str] = MappingProxyType(
    {"Human": "coco17", "Face": "face106", "Animal": "animal20"}
)


def _default_pose_ids() -> Mapping[str, str]:
    return MappingProxyType({name: "grid-centroid" for name in SCHEMA_POINTS})


@dataclass(frozen=True)
class AdapterConfig:
    """Model selection plus the thresholds the protocol leaves open."""

    embedding_model_id: str = "clip-vit-b-32"
    pose_model_ids: Mapping[str, str] = field(default_factory=_default_pose_ids)
    detector_model_id: str = "dark-regions"
    device: str = "cpu"
    batch_size: int = 8
    detection_threshold: float = 0.3
    detection_top_k: int = 10
    prompt_template: str = "{label}"

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise AdapterError(f"batch size must be >= 1, got {self.batch_size}")
        if self.embedding_model_id not in EMBEDDING_BACKENDS:
            raise AdapterError(
                f"unknown embedding model: {self.embedding_model_id!r}"
            )
        if self.detector_model_id not in DETECTOR_BACKENDS:
            raise AdapterError(
                f"unknown detector model: {self.detector_model_id!r}"
            )
        pose_ids = dict(self.pose_model_ids)
        for schema, model_id in pose_ids.items():
            if schema not in SCHEMA_POINTS:
                raise AdapterError(f"unknown schema in pose model map: {schema!r}")
            if model_id not in POSE_BACKENDS:
                raise AdapterError(f"unknown pose model: {model_id!r}")
        object.__setattr__(self, "pose_model_ids", MappingProxyType(pose_ids))
        if not self.device:
            raise AdapterError("device must be non-empty")
        if not 0.0 <= self.detection_threshold <= 1.0:
            raise AdapterError(
                f"detection threshold must be in [0, 1], "
                f"got {self.detection_threshold}"
            )
        if self.detection_top_k < 1:
            raise AdapterError(f"top-k must be >= 1, got {self.detection_top_k}")
        if "{label}" not in self.prompt_template:
            raise AdapterError("prompt template must contain {label}")

    def pose_model_for(self, schema: str) -> str:
        try:
            return self.pose_model_ids[schema]
        except KeyError:
            raise AdapterError(f"no pose model configured for {schema!r}") from None


def config_from_dict(payload: Mapping[str, Any]) -> AdapterConfig:
    known = {f.name for f in fields(AdapterConfig)}
    unknown = set(payload) - known
    if unknown:
        raise AdapterError(f"unknown config fields: {sorted(unknown)}")
    kwargs = dict(payload)
    if "pose_model_ids" in kwargs:
        kwargs["pose_model_ids"] = dict(kwargs["pose_model_ids"])
    return AdapterConfig(**kwargs)


def load_config(path: str | Path) -> AdapterConfig:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise AdapterError(f"config must be a JSON object: {path}")
    return config_from_dict(payload)
