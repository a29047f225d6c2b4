"""Builtin deterministic backends.

These stand in for hosted embedding/detection/pose models: pixel
statistics instead of learned features, but the exact wire behavior a
real backend must honor (fixed dims, normalized vectors, full-image
coordinates, positional pairing). Everything here is integer or fixed
float arithmetic, so repeat runs are byte-identical.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .config import AdapterError
from .images import GrayImage

_DARK_THRESHOLD = 128
EMBED_DIM = 67  # 8x8 pooled grid + mean + spread + dark fraction


def _normalized(values: np.ndarray) -> np.ndarray:
    norm = float(np.sqrt(np.dot(values, values)))
    if norm < 1e-12:
        values = values.copy()
        values[0] = 1.0
        norm = 1.0
    return values / norm


def _hash_floats(text: str, n: int) -> np.ndarray:
    raw = bytearray()
    block = 0
    while len(raw) < n:
        digest = hashlib.blake2b(
            text.encode("utf-8") + bytes([block]), digest_size=64
        ).digest()
        raw.extend(digest)
        block += 1
    b = np.frombuffer(bytes(raw[:n]), dtype=np.uint8).astype(np.float64)
    return b / 127.5 - 1.0


@dataclass(frozen=True)
class PooledGridEmbedder:
    """Image side: 8x8 block means plus global statistics, L2-normalized.

    Text side: a label-keyed hash vector in the same 67-dim space.
    Identical inputs give identical vectors; that is the only semantic
    contract downstream cosine math relies on.
    """

    model_id: str
    grid: int = 8

    @property
    def dim(self) -> int:
        return self.grid * self.grid + 3

    def embed_image(self, img: GrayImage) -> np.ndarray:
        arr = img.array.astype(np.float64) / 255.0
        h, w = arr.shape
        if h < self.grid or w < self.grid:
            raise AdapterError(
                f"image {img.id} too small to embed: {w}x{h}"
            )
        rows = [(i * h) // self.grid for i in range(self.grid + 1)]
        cols = [(j * w) // self.grid for j in range(self.grid + 1)]
        cells = [
            arr[rows[i]:rows[i + 1], cols[j]:cols[j + 1]].mean()
            for i in range(self.grid)
            for j in range(self.grid)
        ]
        dark = float((img.array < _DARK_THRESHOLD).mean())
        features = np.array(
            cells + [arr.mean(), arr.std(), dark], dtype=np.float64
        )
        return _normalized(features)

    def embed_text(self, prompt: str) -> np.ndarray:
        return _normalized(_hash_floats(prompt, self.dim))


def make_embedder(model_id: str) -> PooledGridEmbedder:
    # every registered id currently resolves to the builtin
    return PooledGridEmbedder(model_id=model_id)


@dataclass(frozen=True)
class Detection:
    bbox: tuple[float, float, float, float]
    score: float


@dataclass(frozen=True)
class DarkRegionDetector:
    """Connected components of dark pixels, scored by relative area.

    The largest region scores 1.0 and the rest proportionally, so the
    confidence threshold selects regions by fraction of the dominant
    subject. Ties and ordering are resolved by (score desc, y, x).
    """

    model_id: str
    dark_threshold: int = _DARK_THRESHOLD
    margin: int = 2

    def detect(self, img: GrayImage, threshold: float,
               top_k: int) -> list[Detection]:
        mask = img.array < self.dark_threshold
        labels, count = ndimage.label(mask, structure=np.ones((3, 3), bool))
        if count == 0:
            return []
        areas = ndimage.sum_labels(mask, labels, index=np.arange(1, count + 1))
        max_area = float(areas.max())
        slices = ndimage.find_objects(labels)
        detections = []
        for area, span in zip(areas, slices):
            score = float(area) / max_area
            if score < threshold:
                continue
            ys, xs = span
            x0 = max(0, xs.start - self.margin)
            y0 = max(0, ys.start - self.margin)
            x1 = min(img.width, xs.stop + self.margin)
            y1 = min(img.height, ys.stop + self.margin)
            detections.append(Detection(
                bbox=(float(x0), float(y0), float(x1 - x0), float(y1 - y0)),
                score=round(score, 6),
            ))
        detections.sort(key=lambda d: (-d.score, d.bbox[1], d.bbox[0]))
        return detections[:top_k]


def make_detector(model_id: str) -> DarkRegionDetector:
    return DarkRegionDetector(model_id=model_id)


@dataclass(frozen=True)
class GridCentroidPose:
    """Keypoints on a regular grid over the box, snapped to strokes.

    The box is tiled ceil(sqrt(n)) per side; each of the first n cells
    emits one point. A cell containing dark pixels yields their centroid
    at high confidence; an empty cell yields its center at confidence
    0.05, so blank crops still produce a full, pairable point set.
    """

    model_id: str
    dark_threshold: int = _DARK_THRESHOLD
    dark_confidence: float = 0.9
    empty_confidence: float = 0.05

    def predict(self, img: GrayImage,
                bbox: tuple[float, float, float, float],
                n_points: int) -> list[tuple[float, float, float]]:
        if n_points < 1:
            raise AdapterError(f"point count must be >= 1, got {n_points}")
        x0, y0, w, h = bbox
        if w <= 0 or h <= 0:
            raise AdapterError(f"degenerate box: {bbox}")
        arr = img.array
        side = math.ceil(math.sqrt(n_points))
        points: list[tuple[float, float, float]] = []
        for index in range(n_points):
            row, col = divmod(index, side)
            cx0 = x0 + col * w / side
            cx1 = x0 + (col + 1) * w / side
            cy0 = y0 + row * h / side
            cy1 = y0 + (row + 1) * h / side
            # pixel window of the cell, at least 1px, clipped to frame
            px0 = min(max(int(cx0), 0), img.width - 1)
            py0 = min(max(int(cy0), 0), img.height - 1)
            px1 = min(max(int(math.ceil(cx1)), px0 + 1), img.width)
            py1 = min(max(int(math.ceil(cy1)), py0 + 1), img.height)
            cell = arr[py0:py1, px0:px1]
            dark_rows, dark_cols = np.nonzero(cell < self.dark_threshold)
            if dark_rows.size:
                x = px0 + float(dark_cols.mean())
                y = py0 + float(dark_rows.mean())
                conf = self.dark_confidence
            else:
                x = (cx0 + cx1) / 2.0
                y = (cy0 + cy1) / 2.0
                conf = self.empty_confidence
            x = min(max(x, 0.0), img.width - 1.0)
            y = min(max(y, 0.0), img.height - 1.0)
            points.append((x, y, conf))
        return points


def make_pose_model(model_id: str) -> GridCentroidPose:
    return GridCentroidPose(model_id=model_id)
