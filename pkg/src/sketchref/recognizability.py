"""Recognizability metrics: category-level R_c and structure-level R_s.

R_c is the cosine similarity between the sketch's image embedding and
the text embedding of its class label. R_s is the mean object-keypoint
similarity (OKS) over positionally paired targets: target i of the
reference prediction file is scored against target i of the sketch
prediction file, because detection runs once on the reference and the
same regions are posed on both images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from sketchref.core import (
    EmbeddingKind,
    EmbeddingRecord,
    KeypointSchema,
    PairingError,
    PredictionFile,
    SketchRefError,
    TargetKeypoints,
)


# ---------------------------------------------------------------------------
# Category-level recognizability
# ---------------------------------------------------------------------------


def cosine_similarity(a: EmbeddingRecord, b: EmbeddingRecord) -> float:
    """dot(a, b) / (|a| |b|), clamped to [-1, 1] against rounding spill."""
    if a.dim != b.dim:
        raise SketchRefError(
            f"embedding dim mismatch: {a.key!r} has {a.dim}, {b.key!r} has {b.dim}"
        )
    va, vb = a.vector, b.vector
    dot_ab = float(va @ vb)
    dot_aa = float(va @ va)
    dot_bb = float(vb @ vb)
    if dot_aa == 0.0 or dot_bb == 0.0:
        raise SketchRefError("cosine undefined for a zero-norm embedding")
    # sqrt(dot_aa * dot_bb) rather than sqrt(dot_aa)*sqrt(dot_bb): for
    # identical vectors the product is dot_ab^2 and IEEE sqrt returns
    # exactly |dot_ab|, so self-similarity is exactly 1.0.
    value = dot_ab / math.sqrt(dot_aa * dot_bb)
    return min(1.0, max(-1.0, value))


def category_recognizability(
    sketch_emb: EmbeddingRecord, class_emb: EmbeddingRecord
) -> float:
    """R_c = cos(text embedding of the class, image embedding of the sketch)."""
    if sketch_emb.kind is not EmbeddingKind.IMAGE:
        raise SketchRefError(
            f"sketch embedding {sketch_emb.key!r} has kind "
            f"{sketch_emb.kind.value!r}, expected 'image'"
        )
    if class_emb.kind is not EmbeddingKind.TEXT:
        raise SketchRefError(
            f"class embedding {class_emb.key!r} has kind "
            f"{class_emb.kind.value!r}, expected 'text'"
        )
    return cosine_similarity(sketch_emb, class_emb)


# ---------------------------------------------------------------------------
# Structure-level recognizability (OKS)
# ---------------------------------------------------------------------------


class VisibilityRule(str, Enum):
    # Count every point. The right rule when the reference side holds
    # model predictions, which carry no visibility flags.
    ALL_POINTS = "all_points"
    # Count only ground-truth points with visibility > 0.
    GT_VISIBLE_ONLY = "gt_visible_only"


class ScaleMode(str, Enum):
    BBOX_AREA = "bbox_area"


@dataclass(frozen=True)
class OksParams:
    schema: KeypointSchema
    scale_mode: ScaleMode = ScaleMode.BBOX_AREA
    visibility_rule: VisibilityRule = VisibilityRule.ALL_POINTS


@dataclass(frozen=True)
class StructureScore:
    r_s: float
    per_target: tuple[tuple[int, float], ...]
    n_targets: int

    def __post_init__(self) -> None:
        if self.n_targets < 1 or len(self.per_target) != self.n_targets:
            raise SketchRefError("per-target list must cover all targets")
        mean = sum(v for _, v in self.per_target) / self.n_targets
        if abs(self.r_s - mean) > 1e-12:
            raise SketchRefError("r_s inconsistent with per-target mean")


def _check_conforms(t: TargetKeypoints, schema: KeypointSchema, side: str) -> None:
    if len(t.points) != schema.point_count:
        raise SketchRefError(
            f"{side} target has {len(t.points)} points, schema "
            f"{schema.name!r} requires {schema.point_count}"
        )


def oks_single_target(
    gt: TargetKeypoints, pred: TargetKeypoints, params: OksParams
) -> float:
    """Gaussian-falloff keypoint similarity for one paired target.

    sum_i exp(-d_i^2 / (2 s^2 k_i^2)) / n over the counted points, with
    d_i the Euclidean gt-pred distance, s^2 the gt bbox area, and k_i
    the schema's per-point falloff constant.
    """
    schema = params.schema
    _check_conforms(gt, schema, "gt")
    _check_conforms(pred, schema, "pred")

    _, _, w, h = gt.bbox
    s2 = w * h
    if s2 <= 0:
        raise SketchRefError(f"gt bbox area must be positive, got {s2}")

    gt_pts = np.asarray([(x, y) for x, y, _ in gt.points], dtype=np.float64)
    pred_pts = np.asarray([(x, y) for x, y, _ in pred.points], dtype=np.float64)
    sigmas = np.asarray(schema.sigmas, dtype=np.float64)

    if params.visibility_rule is VisibilityRule.GT_VISIBLE_ONLY:
        if gt.visibility is not None:
            counted = np.asarray(gt.visibility) > 0
        else:
            # Prediction-as-gt carries no flags; treat all as visible.
            counted = np.ones(len(gt.points), dtype=bool)
    else:
        counted = np.ones(len(gt.points), dtype=bool)

    n = int(counted.sum())
    if n == 0:
        raise SketchRefError("no counted keypoints (all marked invisible)")

    d2 = ((gt_pts - pred_pts) ** 2).sum(axis=1)
    e = np.exp(-d2[counted] / (2.0 * s2 * sigmas[counted] ** 2))
    return float(e.sum() / n)


def structure_recognizability(
    ref_preds: PredictionFile, sketch_preds: PredictionFile, params: OksParams
) -> StructureScore:
    """R_s = mean OKS over positionally paired targets."""
    if ref_preds.schema != sketch_preds.schema:
        raise PairingError(
            f"schema mismatch: reference {ref_preds.schema!r} vs "
            f"sketch {sketch_preds.schema!r}"
        )
    n_ref, n_skt = ref_preds.n_targets, sketch_preds.n_targets
    if n_ref != n_skt:
        raise PairingError(
            f"target count mismatch: reference has {n_ref}, sketch has {n_skt} "
            f"(positional pairing requires equal counts)"
        )
    if n_ref == 0:
        raise PairingError("no detected targets (N = 0)")

    per_target = tuple(
        (i, oks_single_target(ref_preds.targets[i], sketch_preds.targets[i], params))
        for i in range(n_ref)
    )
    r_s = sum(v for _, v in per_target) / n_ref
    return StructureScore(r_s=r_s, per_target=per_target, n_targets=n_ref)


def structure_score_to_dict(score: StructureScore) -> dict[str, Any]:
    return {
        "r_s": score.r_s,
        "n_targets": score.n_targets,
        "per_target": [{"index": i, "oks": v} for i, v in score.per_target],
    }
