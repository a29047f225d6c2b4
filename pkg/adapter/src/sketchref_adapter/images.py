"""Deterministic grayscale loading.

Uses the same integer-only conversion as the metric engine so both
sides of the wire see identical pixel values: BT.601 luma with
round-half-up, alpha composited over white.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .config import AdapterError


@dataclass(frozen=True)
class GrayImage:
    id: str
    width: int
    height: int
    pixels: bytes

    @property
    def array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width
        )


def _to_grayscale(img: Image.Image) -> np.ndarray:
    if img.mode == "L":
        return np.asarray(img, dtype=np.uint8)
    rgba = np.asarray(img.convert("RGBA"), dtype=np.uint32)
    alpha = rgba[..., 3]
    rgb = (rgba[..., :3] * alpha[..., None] + 255 * (255 - alpha[..., None])
           + 127) // 255
    luma = (299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2]
            + 500) // 1000
    return luma.astype(np.uint8)


def load_grayscale(path: str | Path) -> GrayImage:
    path = Path(path)
    try:
        with Image.open(path) as img:
            arr = _to_grayscale(img)
    except FileNotFoundError:
        raise AdapterError(f"image not found: {path}") from None
    except Exception as exc:
        raise AdapterError(f"cannot decode image {path}: {exc}") from exc
    height, width = arr.shape
    return GrayImage(
        id=path.stem, width=width, height=height,
        pixels=np.ascontiguousarray(arr).tobytes(),
    )
