"""The two adapter operations: embed and detect-and-pose.

Both return fully validated wire payloads; callers decide where the
files land. The adapter computes no metrics.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Sequence

from .backends import make_detector, make_embedder, make_pose_model
from .config import SCHEMA_POINTS, AdapterConfig, AdapterError
from .images import GrayImage, load_grayscale
from .wire import (
    image_id_for,
    validate_embedding_payload,
    validate_prediction_payload,
)


def _chunks(seq: Sequence, size: int):
    for start in range(0, len(seq), size):
        yield seq[start:start + size]


def embed_inputs(
    image_paths: Sequence[str | Path],
    labels: Sequence[str],
    config: AdapterConfig,
) -> list[dict[str, Any]]:
    """One embedding record per image path and per class label.

    Image records are keyed by file stem, text records by the label
    itself; the prompt handed to the text backend is the label run
    through the configured template.
    """
    embedder = make_embedder(config.embedding_model_id)
    records: list[dict[str, Any]] = []
    for batch in _chunks(list(image_paths), config.batch_size):
        for path in batch:
            img = load_grayscale(path)
            vector = embedder.embed_image(img)
            records.append({
                "key": img.id,
                "kind": "image",
                "model_id": embedder.model_id,
                "dim": embedder.dim,
                "values": [float(v) for v in vector],
            })
    for label in labels:
        if not label:
            raise AdapterError("class labels must be non-empty")
        prompt = config.prompt_template.format(label=label)
        vector = embedder.embed_text(prompt)
        records.append({
            "key": label,
            "kind": "text",
            "model_id": embedder.model_id,
            "dim": embedder.dim,
            "values": [float(v) for v in vector],
        })
    for record in records:
        validate_embedding_payload(record)
    return records


def _pose_targets(
    img: GrayImage,
    boxes,
    schema: str,
    config: AdapterConfig,
) -> list[dict[str, Any]]:
    pose = make_pose_model(config.pose_model_for(schema))
    n_points = SCHEMA_POINTS[schema]
    targets = []
    for det in boxes:
        points = pose.predict(img, det.bbox, n_points)
        targets.append({
            "bbox": list(det.bbox),
            "keypoints": [[x, y, conf] for x, y, conf in points],
            "score": det.score,
        })
    return targets


def detect_and_pose(
    ref_path: str | Path,
    sketch_path: str | Path,
    schema: str,
    config: AdapterConfig,
) -> tuple[dict[str, Any], dict[str, Any]]:
    """Detect on the reference, pose both sides inside the same boxes.

    The returned pair always has equal target counts in identical
    order; a reference with no detections yields two empty-target
    files (the engine reports that downstream as N = 0).
    """
    if schema not in SCHEMA_POINTS:
        raise AdapterError(f"unknown schema: {schema!r}")
    ref = load_grayscale(ref_path)
    sketch = load_grayscale(sketch_path)
    if (ref.width, ref.height) != (sketch.width, sketch.height):
        raise AdapterError(
            f"size mismatch: {ref.id} is {ref.width}x{ref.height}, "
            f"{sketch.id} is {sketch.width}x{sketch.height}"
        )
    detector = make_detector(config.detector_model_id)
    boxes = detector.detect(
        ref, config.detection_threshold, config.detection_top_k
    )
    ref_payload = {
        "image_id": image_id_for(ref_path),
        "schema": schema,
        "targets": _pose_targets(ref, boxes, schema, config),
    }
    sketch_payload = {
        "image_id": image_id_for(sketch_path),
        "schema": schema,
        "targets": _pose_targets(sketch, boxes, schema, config),
    }
    validate_prediction_payload(ref_payload)
    validate_prediction_payload(sketch_payload)
    if len(ref_payload["targets"]) != len(sketch_payload["targets"]):
        raise AdapterError("target counts diverged between ref and sketch")
    return ref_payload, sketch_payload
