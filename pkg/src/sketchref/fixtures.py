"""Bundled synthetic fixtures: drawn images, a mock keypoint predictor,
and a miniature on-disk dataset.

Real evaluations consume model outputs, but the test surface and the
erasure experiment need inputs whose correct scores are knowable. This
module draws deterministic images (a 17-joint stick figure, simple
object shapes, noise and pattern images), provides a pixel-level joint
predictor that re-detects drawn joints, and materializes a 6-item
dataset with prediction and embedding files in the wire formats.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from sketchref.core import (
    Domain,
    EvalItem,
    ImageRecord,
    TargetKeypoints,
    Task,
    image_from_array,
)
from sketchref.recognizability import OksParams, oks_single_target

SIZE = 224


# ---------------------------------------------------------------------------
# Primitive images
# ---------------------------------------------------------------------------


def constant_image(value: int, image_id: str = "constant",
                   width: int = SIZE, height: int = SIZE) -> ImageRecord:
    return image_from_array(
        image_id, np.full((height, width), value, dtype=np.uint8)
    )


def noise_image(seed: int, image_id: str = "noise",
                width: int = SIZE, height: int = SIZE) -> ImageRecord:
    rng = np.random.Generator(np.random.PCG64(seed))
    arr = rng.integers(0, 256, size=(height, width), dtype=np.uint8)
    return image_from_array(image_id, arr)


def checkerboard_image(image_id: str = "checker",
                       width: int = SIZE, height: int = SIZE) -> ImageRecord:
    yy, xx = np.indices((height, width))
    arr = np.where((xx + yy) % 2 == 0, 0, 255).astype(np.uint8)
    return image_from_array(image_id, arr)


def bilevel_half_image(image_id: str = "bilevel",
                       width: int = SIZE, height: int = SIZE) -> ImageRecord:
    arr = np.zeros((height, width), dtype=np.uint8)
    arr[height // 2 :, :] = 255
    return image_from_array(image_id, arr)


def white_square_on_black(image_id: str = "square", side: int = 80,
                          width: int = SIZE, height: int = SIZE) -> ImageRecord:
    arr = np.zeros((height, width), dtype=np.uint8)
    y0 = (height - side) // 2
    x0 = (width - side) // 2
    arr[y0 : y0 + side, x0 : x0 + side] = 255
    return image_from_array(image_id, arr)


# ---------------------------------------------------------------------------
# Drawing helpers
# ---------------------------------------------------------------------------


def _draw_line(arr: np.ndarray, p0: tuple[float, float],
               p1: tuple[float, float], value: int = 0) -> None:
    h, w = arr.shape
    steps = int(max(abs(p1[0] - p0[0]), abs(p1[1] - p0[1]))) * 2 + 1
    xs = np.clip(np.round(np.linspace(p0[0], p1[0], steps)).astype(int), 0, w - 1)
    ys = np.clip(np.round(np.linspace(p0[1], p1[1], steps)).astype(int), 0, h - 1)
    arr[ys, xs] = value


def _draw_disk(arr: np.ndarray, center: tuple[float, float],
               radius: float, value: int = 0) -> None:
    h, w = arr.shape
    yy, xx = np.ogrid[:h, :w]
    mask = (xx - center[0]) ** 2 + (yy - center[1]) ** 2 <= radius * radius
    arr[mask] = value


def _draw_circle(arr: np.ndarray, center: tuple[float, float],
                 radius: float, value: int = 0) -> None:
    h, w = arr.shape
    yy, xx = np.ogrid[:h, :w]
    d2 = (xx - center[0]) ** 2 + (yy - center[1]) ** 2
    mask = (d2 <= (radius + 1) ** 2) & (d2 >= (radius - 1) ** 2)
    arr[mask] = value


# ---------------------------------------------------------------------------
# The stick figure
# ---------------------------------------------------------------------------

#: 17 joints in the conventional body order: nose, eyes, ears,
#: shoulders, elbows, wrists, hips, knees, ankles (left before right).
#: Every pair is > 22 px apart, so a 10x10 erasure around one joint
#: never touches another joint's detection window.
STICK_FIGURE_JOINTS: tuple[tuple[float, float], ...] = (
    (112, 40),            # nose
    (96, 24), (128, 24),  # eyes
    (72, 40), (152, 40),  # ears
    (80, 76), (144, 76),  # shoulders
    (56, 112), (168, 112),  # elbows
    (40, 148), (184, 148),  # wrists
    (92, 140), (132, 140),  # hips
    (88, 176), (136, 176),  # knees
    (84, 208), (140, 208),  # ankles
)

_SKELETON_EDGES = (
    (0, 1), (0, 2), (1, 3), (2, 4),
    (5, 7), (7, 9), (6, 8), (8, 10),
    (11, 13), (13, 15), (12, 14), (14, 16),
    (5, 6), (11, 12), (5, 11), (6, 12),
)

#: Tight box around the joints: x 40..184, y 24..208.
STICK_FIGURE_BBOX: tuple[float, float, float, float] = (40.0, 24.0, 144.0, 184.0)

_JOINT_RADIUS = 3


def draw_stick_figure(image_id: str = "figure") -> ImageRecord:
    """Dark stick figure on white: skeleton lines plus a radius-3 disk
    at every joint, so joints are re-detectable from pixels alone."""
    arr = np.full((SIZE, SIZE), 255, dtype=np.uint8)
    for a, b in _SKELETON_EDGES:
        _draw_line(arr, STICK_FIGURE_JOINTS[a], STICK_FIGURE_JOINTS[b], value=40)
    for joint in STICK_FIGURE_JOINTS:
        _draw_disk(arr, joint, _JOINT_RADIUS, value=0)
    return image_from_array(image_id, arr)


def stick_figure_target(offset: tuple[float, float] = (0.0, 0.0),
                        confidence: float = 1.0) -> TargetKeypoints:
    """The figure's ground-truth keypoints, optionally displaced."""
    dx, dy = offset
    return TargetKeypoints(
        bbox=STICK_FIGURE_BBOX,
        points=tuple((x + dx, y + dy, confidence) for x, y in STICK_FIGURE_JOINTS),
        visibility=tuple(2 for _ in STICK_FIGURE_JOINTS),
    )


# ---------------------------------------------------------------------------
# Mock joint predictor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MockJointPredictor:
    """Re-detects drawn joints from pixels.

    For each ground-truth joint it inspects a small window around the
    joint location: if dark stroke pixels remain, the prediction is
    their centroid (on an intact drawing, exactly the joint center);
    if the strokes were erased, it falls back to the box corner, far
    enough from any joint that the OKS term vanishes.
    """

    window_radius: int = 2
    dark_threshold: int = 128

    def predict(self, img: ImageRecord, gt: TargetKeypoints) -> TargetKeypoints:
        arr = img.array
        r = self.window_radius
        points = []
        for x, y, _ in gt.points:
            cx, cy = int(math.floor(x + 0.5)), int(math.floor(y + 0.5))
            x0, x1 = max(cx - r, 0), min(cx + r + 1, img.width)
            y0, y1 = max(cy - r, 0), min(cy + r + 1, img.height)
            window = arr[y0:y1, x0:x1]
            ys, xs = np.nonzero(window < self.dark_threshold)
            if len(xs) > 0:
                points.append(
                    (float(x0 + xs.mean()), float(y0 + ys.mean()), 0.95)
                )
            else:
                points.append((gt.bbox[0], gt.bbox[1], 0.05))
        return TargetKeypoints(bbox=gt.bbox, points=tuple(points))


@dataclass(frozen=True)
class MockStructureEvaluator:
    """Erasure-sweep evaluator: OKS of mock-predicted joints against gt."""

    gt: TargetKeypoints
    params: OksParams
    predictor: MockJointPredictor = MockJointPredictor()
    name: str = "r_s"

    def __call__(self, sketch: ImageRecord) -> float:
        pred = self.predictor.predict(sketch, self.gt)
        return oks_single_target(self.gt, pred, self.params)


# ---------------------------------------------------------------------------
# Other fixture drawings
# ---------------------------------------------------------------------------


def grid_points(n: int, bbox: tuple[float, float, float, float]
                ) -> tuple[tuple[float, float], ...]:
    """n points at the cell centers of the smallest square-ish grid
    covering bbox; deterministic stand-in keypoint layouts."""
    bx, by, bw, bh = bbox
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    pts = []
    for i in range(n):
        r, c = divmod(i, cols)
        pts.append(
            (bx + (c + 0.5) * bw / cols, by + (r + 0.5) * bh / rows)
        )
    return tuple(pts)


def _draw_face(arr: np.ndarray) -> None:
    _draw_circle(arr, (112, 112), 60, value=0)
    _draw_disk(arr, (90, 95), 4, value=0)
    _draw_disk(arr, (134, 95), 4, value=0)
    _draw_line(arr, (92, 138), (132, 138), value=0)
    _draw_line(arr, (112, 105), (112, 125), value=40)


def _draw_animal(arr: np.ndarray) -> None:
    _draw_circle(arr, (130, 120), 45, value=0)   # body
    _draw_circle(arr, (70, 90), 22, value=0)     # head
    for x in (100, 120, 140, 160):
        _draw_line(arr, (x, 160), (x, 195), value=0)
    _draw_line(arr, (172, 105), (200, 85), value=0)  # tail


def _draw_bag(arr: np.ndarray) -> None:
    for t in range(3):
        _draw_line(arr, (70, 90 + t), (154, 90 + t), value=0)
        _draw_line(arr, (70, 180 - t), (154, 180 - t), value=0)
        _draw_line(arr, (70 + t, 90), (70 + t, 180), value=0)
        _draw_line(arr, (154 - t, 90), (154 - t, 180), value=0)
    _draw_circle(arr, (112, 90), 26, value=0)    # handle


def _draw_car(arr: np.ndarray) -> None:
    _draw_line(arr, (50, 150), (174, 150), value=0)
    _draw_line(arr, (50, 120), (174, 120), value=0)
    _draw_line(arr, (50, 120), (50, 150), value=0)
    _draw_line(arr, (174, 120), (174, 150), value=0)
    _draw_line(arr, (80, 120), (95, 95), value=0)
    _draw_line(arr, (95, 95), (140, 95), value=0)
    _draw_line(arr, (140, 95), (155, 120), value=0)
    _draw_circle(arr, (80, 155), 12, value=0)
    _draw_circle(arr, (146, 155), 12, value=0)


_DRAWINGS = {
    "face": _draw_face,
    "animal": _draw_animal,
    "bag": _draw_bag,
    "car": _draw_car,
}


def _textured(arr: np.ndarray, seed: int) -> np.ndarray:
    """Mix a drawing with seeded noise: the photo-like complex version."""
    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.integers(0, 256, size=arr.shape, dtype=np.uint8)
    return (arr.astype(np.uint16) // 2 + noise // 2).astype(np.uint8)


# ---------------------------------------------------------------------------
# Miniature on-disk dataset
# ---------------------------------------------------------------------------

EMBED_DIM = 16
EMBED_MODEL_ID = "fixture-hash-16"


def pseudo_embedding_values(key: str, kind: str,
                            dim: int = EMBED_DIM) -> list[float]:
    """Deterministic unit-free vector derived from a hash of the key."""
    digest = hashlib.blake2b(f"{kind}:{key}".encode(), digest_size=dim).digest()
    values = [b / 127.5 - 1.0 for b in digest]
    if all(v == 0.0 for v in values):
        values[0] = 1.0
    return values


def _save_png(img: ImageRecord, path: Path) -> None:
    Image.fromarray(img.array, mode="L").save(path)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _prediction_payload(image_id: str, schema: str,
                        bbox: tuple[float, float, float, float],
                        points: Sequence[tuple[float, float]],
                        conf: float, score: float = 1.0) -> dict:
    return {
        "image_id": image_id,
        "schema": schema,
        "targets": [
            {
                "bbox": list(bbox),
                "score": score,
                "keypoints": [[float(x), float(y), conf] for x, y in points],
            }
        ],
    }


def _embedding_payload(key: str, kind: str) -> dict:
    return {
        "key": key,
        "kind": kind,
        "model_id": EMBED_MODEL_ID,
        "dim": EMBED_DIM,
        "values": pseudo_embedding_values(key, kind),
    }


_FIXTURE_ITEMS = (
    # (id, domain, task, class_label, method, drawing)
    ("ani01", Domain.ANIMAL, Task.STRUCTURE, None, "mock-a", "animal"),
    ("ani02", Domain.ANIMAL, Task.CATEGORY, "cat", "mock-a", "animal"),
    ("fac01", Domain.FACE, Task.STRUCTURE, None, "mock-a", "face"),
    ("hum01", Domain.HUMAN, Task.STRUCTURE, None, "mock-a", "figure"),
    ("thg01", Domain.THINGS, Task.CATEGORY, "bag", "mock-a", "bag"),
    ("thg02", Domain.THINGS, Task.CATEGORY, "car", "mock-b", "car"),
)

_STRUCTURE_LAYOUTS: dict[str, tuple[str, tuple[float, float, float, float], int]] = {
    # item id -> (schema name, bbox, point count)
    "hum01": ("coco17", STICK_FIGURE_BBOX, 17),
    "fac01": ("face106", (64.0, 64.0, 96.0, 96.0), 106),
    "ani01": ("animal20", (48.0, 72.0, 150.0, 110.0), 20),
}

#: Sketch-side predictions are displaced by this much, giving an OKS
#: strictly inside (0, 1) on every structure item.
_SKETCH_OFFSET = (2.0, 1.0)


def build_mini_fixture(root: Path | str) -> dict[str, Path]:
    """Materialize the 6-item dataset under ``root``.

    Layout: images/, predictions/<image_id>.json,
    embeddings/images/<image_id>.json, embeddings/text/<label>.json,
    and manifest.json tying it together. Returns the key paths.
    """
    root = Path(root)
    images_dir = root / "images"
    predictions_dir = root / "predictions"
    emb_images_dir = root / "embeddings" / "images"
    emb_text_dir = root / "embeddings" / "text"
    for d in (images_dir, predictions_dir, emb_images_dir, emb_text_dir):
        d.mkdir(parents=True, exist_ok=True)

    manifest_items = []
    for seed, (item_id, domain, task, label, method, drawing) in enumerate(
        _FIXTURE_ITEMS, start=11
    ):
        if drawing == "figure":
            sketch = draw_stick_figure(image_id=f"{item_id}_skt").array
        else:
            sketch = np.full((SIZE, SIZE), 255, dtype=np.uint8)
            _DRAWINGS[drawing](sketch)
        ref = _textured(sketch, seed=seed)

        ref_path = images_dir / f"{item_id}_ref.png"
        skt_path = images_dir / f"{item_id}_skt.png"
        _save_png(image_from_array(f"{item_id}_ref", ref), ref_path)
        _save_png(image_from_array(f"{item_id}_skt", sketch), skt_path)

        entry = {
            "id": item_id,
            "domain": domain.value,
            "task": task.value,
            "ref_path": f"images/{ref_path.name}",
            "sketch_path": f"images/{skt_path.name}",
            "method": method,
        }
        if label is not None:
            entry["class_label"] = label
        manifest_items.append(entry)

        if task is Task.STRUCTURE:
            schema, bbox, n_points = _STRUCTURE_LAYOUTS[item_id]
            if item_id == "hum01":
                pts = STICK_FIGURE_JOINTS
            else:
                pts = grid_points(n_points, bbox)
            dx, dy = _SKETCH_OFFSET
            _write_json(
                predictions_dir / f"{item_id}_ref.json",
                _prediction_payload(f"{item_id}_ref", schema, bbox, pts, conf=1.0),
            )
            _write_json(
                predictions_dir / f"{item_id}_skt.json",
                _prediction_payload(
                    f"{item_id}_skt", schema, bbox,
                    [(x + dx, y + dy) for x, y in pts], conf=0.9,
                ),
            )
        else:
            _write_json(
                emb_images_dir / f"{item_id}_skt.json",
                _embedding_payload(f"{item_id}_skt", "image"),
            )
            _write_json(
                emb_text_dir / f"{label}.json",
                _embedding_payload(label, "text"),
            )

    manifest_path = root / "manifest.json"
    _write_json(manifest_path, {"version": "1", "items": manifest_items})
    return {
        "root": root,
        "manifest": manifest_path,
        "images_dir": images_dir,
        "predictions_dir": predictions_dir,
        "embeddings_dir": root / "embeddings",
    }


def stick_figure_item(item_id: str = "fig01", seed: int = 7) -> EvalItem:
    """In-memory stick-figure pair: textured reference, clean sketch."""
    sketch = draw_stick_figure(image_id=f"{item_id}_skt")
    ref = image_from_array(f"{item_id}_ref", _textured(sketch.array, seed=seed))
    return EvalItem(
        id=item_id, domain=Domain.HUMAN, task=Task.STRUCTURE,
        ref=ref, sketch=sketch, method="mock-a",
    )
