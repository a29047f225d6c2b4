"""Wire-format plumbing shared by both adapter commands.

Payload shapes here mirror the metric engine's loaders exactly; every
payload is validated in-process before anything is written, and writes
are atomic (temp file + rename) so a concurrent reader never sees a
partial file.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .config import DOMAIN_SCHEMAS, SCHEMA_POINTS, AdapterError

_TASKS = ("Structure", "Category")


def image_id_for(path: str | Path) -> str:
    # shared convention: an image is addressed by its file stem
    return Path(path).stem


def label_is_path_safe(label: str) -> bool:
    return bool(label) and not any(ch in label for ch in "/\\\0") and \
        label not in (".", "..")


@dataclass(frozen=True)
class ManifestItem:
    id: str
    task: str
    domain: str
    ref: Path
    sketch: Path
    class_label: str | None

    @property
    def schema(self) -> str | None:
        if self.task != "Structure":
            return None
        return DOMAIN_SCHEMAS[self.domain]


def read_manifest(path: str | Path) -> list[ManifestItem]:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise AdapterError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise AdapterError(f"manifest is not valid JSON: {path}: {exc}") from exc
    raw_items = payload.get("items") if isinstance(payload, dict) else None
    if not isinstance(raw_items, list) or not raw_items:
        raise AdapterError(f"manifest has no items: {path}")
    items = []
    seen = set()
    for raw in raw_items:
        try:
            item_id = raw["id"]
            task = raw["task"]
            domain = raw["domain"]
            ref = (path.parent / raw["ref_path"]).resolve()
            sketch = (path.parent / raw["sketch_path"]).resolve()
        except (KeyError, TypeError) as exc:
            raise AdapterError(f"malformed manifest item: {raw!r}") from exc
        if item_id in seen:
            raise AdapterError(f"duplicate item id: {item_id}")
        seen.add(item_id)
        if task not in _TASKS:
            raise AdapterError(f"unknown task for {item_id}: {task!r}")
        if task == "Structure" and domain not in DOMAIN_SCHEMAS:
            raise AdapterError(
                f"no keypoint schema for structure domain {domain!r}"
            )
        label = raw.get("class_label")
        if task == "Category":
            if not label or not label_is_path_safe(str(label)):
                raise AdapterError(
                    f"category item {item_id} needs a path-safe class label"
                )
            label = str(label)
        items.append(ManifestItem(
            id=str(item_id), task=task, domain=str(domain),
            ref=ref, sketch=sketch,
            class_label=label if task == "Category" else None,
        ))
    return items


def validate_embedding_payload(payload: Mapping[str, Any]) -> None:
    for key in ("key", "kind", "model_id", "dim", "values"):
        if key not in payload:
            raise AdapterError(f"embedding payload missing {key!r}")
    if payload["kind"] not in ("image", "text"):
        raise AdapterError(f"bad embedding kind: {payload['kind']!r}")
    values = payload["values"]
    if payload["dim"] != len(values):
        raise AdapterError(
            f"embedding dim {payload['dim']} != {len(values)} values"
        )
    if not any(v != 0.0 for v in values):
        raise AdapterError("embedding is the zero vector")


def validate_prediction_payload(payload: Mapping[str, Any]) -> None:
    for key in ("image_id", "schema", "targets"):
        if key not in payload:
            raise AdapterError(f"prediction payload missing {key!r}")
    schema = payload["schema"]
    if schema not in SCHEMA_POINTS:
        raise AdapterError(f"unknown schema: {schema!r}")
    expected = SCHEMA_POINTS[schema]
    for target in payload["targets"]:
        x, y, w, h = target["bbox"]
        if w <= 0 or h <= 0:
            raise AdapterError(f"degenerate target bbox: {target['bbox']}")
        if len(target["keypoints"]) != expected:
            raise AdapterError(
                f"{schema} target has {len(target['keypoints'])} points, "
                f"wants {expected}"
            )
        for px, py, conf in target["keypoints"]:
            if not 0.0 <= conf <= 1.0:
                raise AdapterError(f"point confidence out of range: {conf}")
            if px < 0 or py < 0:
                raise AdapterError(f"negative point coordinate: ({px}, {py})")


def atomic_write_json(path: str | Path, payload: Mapping[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
