"""Essential-region erasure: the metric-sensitivity experiment.

Strokes near keypoints carry the structural meaning of a sketch.
Erasing square regions centered on randomly chosen keypoints and
re-scoring the damaged sketch shows which metrics actually respond to
structural loss. Region choice is seeded and nested: the set erased at
count k is always a subset of the set at count k+1, so deltas are
comparable across k.

Randomness comes from a small splitmix-style generator implemented
here, not the platform RNG, so sweeps replicate bit-for-bit everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from sketchref.core import EvalItem, ImageRecord, SketchRefError, TargetKeypoints, image_from_array

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    """One step of splitmix64; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def permuted_indices(n: int, seed: int) -> list[int]:
    """Seeded Fisher-Yates permutation of range(n).

    Taking the first k entries yields nested subsets across k, which is
    what makes erasure sweeps comparable between counts.
    """
    order = list(range(n))
    state = seed & _MASK64
    for i in range(n - 1, 0, -1):
        state, z = _splitmix64(state)
        j = z % (i + 1)
        order[i], order[j] = order[j], order[i]
    return order


@dataclass(frozen=True)
class ErasureSpec:
    """How much to erase and how to choose where."""

    count: int
    seed: int
    region_size: int = 10
    fill_value: int = 255

    def __post_init__(self) -> None:
        if self.region_size <= 0:
            raise SketchRefError(f"region_size must be > 0, got {self.region_size}")
        if self.count < 0:
            raise SketchRefError(f"count must be >= 0, got {self.count}")
        if not 0 <= self.fill_value <= 255:
            raise SketchRefError(
                f"fill_value must be an 8-bit intensity, got {self.fill_value}"
            )
        if self.seed < 0:
            raise SketchRefError(f"seed must be unsigned, got {self.seed}")


def erase_regions(
    img: ImageRecord, keypoints: TargetKeypoints, spec: ErasureSpec
) -> ImageRecord:
    """Return a copy of ``img`` with square regions blanked around
    ``spec.count`` seed-chosen keypoints.

    A region around center (cx, cy) covers x in [cx - floor(s/2),
    cx + ceil(s/2) - 1], y likewise, clipped to the image.
    """
    n_points = len(keypoints.points)
    if spec.count > n_points:
        raise SketchRefError(
            f"cannot erase {spec.count} regions with only {n_points} keypoints"
        )
    for i, (x, y, _) in enumerate(keypoints.points):
        if not (0 <= x < img.width and 0 <= y < img.height):
            raise SketchRefError(
                f"keypoint {i} at ({x}, {y}) outside image "
                f"{img.width}x{img.height}"
            )
    if spec.count == 0:
        return img

    chosen = permuted_indices(n_points, spec.seed)[: spec.count]
    s = spec.region_size
    lo, hi = s // 2, (s + 1) // 2
    out = img.array.copy()
    for idx in chosen:
        x, y, _ = keypoints.points[idx]
        cx, cy = math.floor(x + 0.5), math.floor(y + 0.5)
        x0, x1 = max(cx - lo, 0), min(cx + hi, img.width)
        y0, y1 = max(cy - lo, 0), min(cy + hi, img.height)
        out[y0:y1, x0:x1] = spec.fill_value
    return image_from_array(img.id, out, path=img.path)


class MetricEvaluator(Protocol):
    """Anything that can score a (possibly erased) sketch image."""

    @property
    def name(self) -> str: ...

    def __call__(self, sketch: ImageRecord) -> float: ...


@dataclass(frozen=True)
class FunctionEvaluator:
    """Adapts a plain callable to the evaluator contract."""

    name: str
    fn: Callable[[ImageRecord], float]

    def __call__(self, sketch: ImageRecord) -> float:
        return self.fn(sketch)


@dataclass(frozen=True)
class SweepResult:
    """Raw baseline scores and per-k normalized deltas."""

    baseline: dict[str, float]
    per_k: dict[int, dict[str, float]]

    def __post_init__(self) -> None:
        zero = self.per_k.get(0)
        if zero is not None and any(v != 0.0 for v in zero.values()):
            raise SketchRefError("per_k[0] deltas must all be zero")


def erasure_sweep(
    item: EvalItem,
    keypoints: TargetKeypoints,
    ks: Sequence[int],
    metrics: Sequence[MetricEvaluator],
    spec: ErasureSpec,
) -> SweepResult:
    """Score every metric on the k-erased sketch for each k.

    Deltas are normalized by subtracting the unerased score, so
    per_k[0] is identically zero and negative values mean the metric
    dropped as regions disappeared.
    """
    if not ks:
        raise SketchRefError("ks must be non-empty")
    if 0 not in ks:
        raise SketchRefError("ks must include 0 (the unerased baseline)")
    if len(set(ks)) != len(ks):
        raise SketchRefError("ks must not repeat values")
    if max(ks) > len(keypoints.points):
        raise SketchRefError(
            f"max k {max(ks)} exceeds keypoint count {len(keypoints.points)}"
        )
    if not metrics:
        raise SketchRefError("at least one metric evaluator is required")

    baseline = {m.name: m(item.sketch) for m in metrics}
    per_k: dict[int, dict[str, float]] = {}
    for k in sorted(ks):
        if k == 0:
            per_k[0] = {m.name: 0.0 for m in metrics}
            continue
        erased = erase_regions(
            item.sketch, keypoints,
            ErasureSpec(
                count=k, seed=spec.seed,
                region_size=spec.region_size, fill_value=spec.fill_value,
            ),
        )
        per_k[k] = {m.name: m(erased) - baseline[m.name] for m in metrics}
    return SweepResult(baseline=baseline, per_k=per_k)


def sweep_to_dict(result: SweepResult) -> dict[str, Any]:
    return {
        "baseline": dict(sorted(result.baseline.items())),
        "per_k": {
            str(k): dict(sorted(deltas.items()))
            for k, deltas in sorted(result.per_k.items())
        },
    }


def sweep_to_csv(result: SweepResult) -> str:
    """k vs delta per metric, one row per k: plot-ready long-form CSV."""
    names = sorted(result.baseline)
    lines = ["k," + ",".join(names)]
    for k in sorted(result.per_k):
        deltas = result.per_k[k]
        lines.append(f"{k}," + ",".join(repr(deltas[n]) for n in names))
    return "\n".join(lines) + "\n"
