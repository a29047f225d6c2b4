"""Image-complexity estimators C(.) and the relative Simplicity Ratio.

Five estimators are provided: deflate compression ratio, 1-d histogram
entropy, 2-d joint entropy, and Harris/FAST corner densities. The
Simplicity Ratio of a (reference, sketch) pair is C(ref) / C(sketch):
a value above 1 means the sketch carries less visual information than
the photo it abstracts.

All estimators run on the full grayscale buffer (backgrounds in this
benchmark are blank and contribute near-zero complexity on both sides)
and are bit-deterministic: identical buffers give identical values on
every platform.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

import numpy as np
from scipy import ndimage

from sketchref.core import ImageRecord, SketchRefError

# Fixed codec settings for the compression estimator. Raw buffer in,
# no image container, no filters: container headers and encoder filter
# heuristics vary across libraries and would break reproducibility.
_DEFLATE_LEVEL = 6

# Fixed corner-detector settings. Exposed as params on ComplexityMethod
# but these defaults define the benchmark configuration.
HARRIS_DEFAULTS: dict[str, float] = {
    "k": 0.04,
    "sigma": 1.0,
    "rel_threshold": 0.01,
}
FAST_DEFAULTS: dict[str, float] = {
    "threshold": 20,
    "arc_length": 9,
}


class ComplexityName(str, Enum):
    COMPRESSION_RATIO = "compression_ratio"
    ENTROPY_1D = "entropy_1d"
    ENTROPY_2D = "entropy_2d"
    HARRIS_DENSITY = "harris_density"
    FAST_DENSITY = "fast_density"


@dataclass(frozen=True)
class ComplexityMethod:
    """A named estimator plus its (validated) parameter overrides."""

    name: ComplexityName
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        allowed: dict[ComplexityName, dict[str, float]] = {
            ComplexityName.HARRIS_DENSITY: HARRIS_DEFAULTS,
            ComplexityName.FAST_DENSITY: FAST_DEFAULTS,
        }
        defaults = allowed.get(self.name, {})
        for key, value in self.params.items():
            if key not in defaults:
                raise SketchRefError(
                    f"method {self.name.value!r} has no parameter {key!r}"
                )
            if value <= 0:
                raise SketchRefError(
                    f"method {self.name.value!r}: {key} must be > 0, got {value}"
                )
        if self.name is ComplexityName.FAST_DENSITY:
            arc = self.params.get("arc_length", FAST_DEFAULTS["arc_length"])
            if not 1 <= arc <= 16:
                raise SketchRefError(f"fast arc_length must be in [1, 16], got {arc}")

    def value_of(self, key: str) -> float:
        defaults = (
            HARRIS_DEFAULTS
            if self.name is ComplexityName.HARRIS_DENSITY
            else FAST_DEFAULTS
        )
        return self.params.get(key, defaults[key])


def method_from_name(
    name: str, params: Mapping[str, float] | None = None
) -> ComplexityMethod:
    try:
        cname = ComplexityName(name)
    except ValueError:
        raise SketchRefError(
            f"unknown complexity method {name!r}; expected one of "
            f"{[m.value for m in ComplexityName]}"
        ) from None
    return ComplexityMethod(name=cname, params=dict(params or {}))


@dataclass(frozen=True)
class SimplicityResult:
    """C(ref), C(sketch), and their ratio for one image pair."""

    sr: float
    c_ref: float
    c_sketch: float
    method: str

    def __post_init__(self) -> None:
        if self.sr <= 0:
            raise SketchRefError(f"simplicity ratio must be > 0, got {self.sr}")
        if abs(self.sr - self.c_ref / self.c_sketch) > 1e-12 * max(1.0, self.sr):
            raise SketchRefError("sr inconsistent with c_ref / c_sketch")


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def complexity_cr(img: ImageRecord) -> float:
    """Compression ratio: deflated size over raw size of the pixel buffer."""
    raw = img.pixels
    compressed = zlib.compress(raw, level=_DEFLATE_LEVEL)
    return len(compressed) / len(raw)


def entropy_1d(img: ImageRecord) -> float:
    """Shannon entropy of the 256-bin intensity histogram, in bits."""
    counts = np.bincount(
        np.frombuffer(img.pixels, dtype=np.uint8), minlength=256
    )
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


def entropy_2d(img: ImageRecord) -> float:
    """Joint entropy of (pixel value, rounded 8-neighborhood mean), in bits.

    Only interior pixels have a full 8-neighborhood, so borders are
    excluded. The neighbor mean is rounded half-up to the nearest
    integer, giving a 256 x 256 joint histogram and a [0, 16]-bit range.
    """
    if img.width < 3 or img.height < 3:
        raise SketchRefError(
            f"entropy_2d needs at least 3x3 pixels, got {img.width}x{img.height}"
        )
    a = img.array.astype(np.uint32)
    # Sum of the 8 neighbors of each interior pixel via shifted slices.
    nsum = (
        a[:-2, :-2] + a[:-2, 1:-1] + a[:-2, 2:]
        + a[1:-1, :-2] + a[1:-1, 2:]
        + a[2:, :-2] + a[2:, 1:-1] + a[2:, 2:]
    )
    nmean = (nsum + 4) // 8  # round-half-up for non-negative integers
    joint = a[1:-1, 1:-1] * 256 + nmean
    counts = np.bincount(joint.ravel(), minlength=65536)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


def harris_corners(
    img: ImageRecord,
    k: float = HARRIS_DEFAULTS["k"],
    sigma: float = HARRIS_DEFAULTS["sigma"],
    rel_threshold: float = HARRIS_DEFAULTS["rel_threshold"],
) -> np.ndarray:
    """Harris corner coordinates as an (n, 2) array of (y, x).

    Sobel gradients, Gaussian structure-tensor window, response
    R = det(M) - k trace(M)^2, thresholded at rel_threshold * max(R),
    3x3 non-maximum suppression.
    """
    a = img.array.astype(np.float64)
    gx = ndimage.sobel(a, axis=1, mode="nearest")
    gy = ndimage.sobel(a, axis=0, mode="nearest")
    ixx = ndimage.gaussian_filter(gx * gx, sigma=sigma, mode="nearest")
    iyy = ndimage.gaussian_filter(gy * gy, sigma=sigma, mode="nearest")
    ixy = ndimage.gaussian_filter(gx * gy, sigma=sigma, mode="nearest")
    response = (ixx * iyy - ixy * ixy) - k * (ixx + iyy) ** 2
    peak = response.max()
    if peak <= 0:
        return np.empty((0, 2), dtype=np.int64)
    threshold = rel_threshold * peak
    local_max = response == ndimage.maximum_filter(response, size=3, mode="nearest")
    ys, xs = np.nonzero((response > threshold) & local_max)
    return np.stack([ys, xs], axis=1)


# Bresenham circle of radius 3: the 16 (dy, dx) offsets in contiguous
# ring order, starting straight right and going counter-clockwise.
_FAST_RING = (
    (0, 3), (1, 3), (2, 2), (3, 1), (3, 0), (3, -1), (2, -2), (1, -3),
    (0, -3), (-1, -3), (-2, -2), (-3, -1), (-3, 0), (-3, 1), (-2, 2), (-1, 3),
)


def fast_corners(
    img: ImageRecord,
    threshold: float = FAST_DEFAULTS["threshold"],
    arc_length: int = int(FAST_DEFAULTS["arc_length"]),
) -> np.ndarray:
    """FAST corner coordinates as an (n, 2) array of (y, x).

    Segment test on the 16-pixel Bresenham circle: a pixel is a corner
    if at least ``arc_length`` contiguous ring pixels are all brighter
    than center + threshold or all darker than center - threshold.
    Non-maximum suppression uses the sum-of-absolute-differences score.
    """
    a = img.array.astype(np.int32)
    h, w = a.shape
    if h < 7 or w < 7:
        return np.empty((0, 2), dtype=np.int64)
    center = a[3 : h - 3, 3 : w - 3]
    ring = np.stack(
        [a[3 + dy : h - 3 + dy, 3 + dx : w - 3 + dx] for dy, dx in _FAST_RING],
        axis=0,
    )
    bright = ring > (center + threshold)
    dark = ring < (center - threshold)

    def has_arc(mask: np.ndarray) -> np.ndarray:
        # Wrap-around arcs: extend the ring by arc_length - 1 and look
        # for a window of arc_length consecutive True values.
        ext = np.concatenate([mask, mask[: arc_length - 1]], axis=0).astype(np.int32)
        csum = np.cumsum(ext, axis=0)
        windows = csum[arc_length - 1 :].copy()
        windows[1:] -= csum[: windows.shape[0] - 1]
        return (windows == arc_length).any(axis=0)

    is_corner = has_arc(bright) | has_arc(dark)
    if not is_corner.any():
        return np.empty((0, 2), dtype=np.int64)

    diff = ring - center
    score_bright = np.where(bright, diff - threshold, 0).sum(axis=0)
    score_dark = np.where(dark, -diff - threshold, 0).sum(axis=0)
    score = np.where(is_corner, np.maximum(score_bright, score_dark), 0)

    full = np.zeros(a.shape, dtype=np.float64)
    full[3 : h - 3, 3 : w - 3] = score
    local_max = full == ndimage.maximum_filter(full, size=3, mode="constant", cval=0)
    ys, xs = np.nonzero((full > 0) & local_max)
    return np.stack([ys, xs], axis=1)


def corner_density(img: ImageRecord, detector: str, **params: float) -> float:
    """Detected corners per pixel under the fixed detector settings."""
    if detector == "harris":
        corners = harris_corners(img, **params)
    elif detector == "fast":
        corners = fast_corners(img, **params)  # type: ignore[arg-type]
    else:
        raise SketchRefError(
            f"unknown corner detector {detector!r}; expected 'harris' or 'fast'"
        )
    return corners.shape[0] / (img.width * img.height)


def compute_complexity(img: ImageRecord, method: ComplexityMethod) -> float:
    """Dispatch to the estimator named by ``method``."""
    name = method.name
    if name is ComplexityName.COMPRESSION_RATIO:
        return complexity_cr(img)
    if name is ComplexityName.ENTROPY_1D:
        return entropy_1d(img)
    if name is ComplexityName.ENTROPY_2D:
        return entropy_2d(img)
    if name is ComplexityName.HARRIS_DENSITY:
        return corner_density(
            img, "harris",
            k=method.value_of("k"),
            sigma=method.value_of("sigma"),
            rel_threshold=method.value_of("rel_threshold"),
        )
    if name is ComplexityName.FAST_DENSITY:
        return corner_density(
            img, "fast",
            threshold=method.value_of("threshold"),
            arc_length=int(method.value_of("arc_length")),
        )
    raise SketchRefError(f"unhandled complexity method {name!r}")


def simplicity_ratio(
    ref: ImageRecord, sketch: ImageRecord, method: ComplexityMethod
) -> SimplicityResult:
    """SR = C(ref) / C(sketch); > 1 means the sketch is the simpler image."""
    if (ref.width, ref.height) != (sketch.width, sketch.height):
        raise SketchRefError(
            f"dimension mismatch: reference {ref.width}x{ref.height} vs "
            f"sketch {sketch.width}x{sketch.height}"
        )
    c_ref = compute_complexity(ref, method)
    c_sketch = compute_complexity(sketch, method)
    if c_sketch == 0.0 or c_ref == 0.0:
        # Possible for corner/entropy estimators on degenerate images;
        # the ratio is undefined rather than zero or infinite.
        raise SketchRefError(
            f"degenerate complexity under {method.name.value!r}: "
            f"C(ref)={c_ref}, C(sketch)={c_sketch}"
        )
    return SimplicityResult(
        sr=c_ref / c_sketch, c_ref=c_ref, c_sketch=c_sketch,
        method=method.name.value,
    )


def result_to_dict(res: SimplicityResult) -> dict[str, Any]:
    return {
        "method": res.method,
        "sr": res.sr,
        "c_ref": res.c_ref,
        "c_sketch": res.c_sketch,
    }
