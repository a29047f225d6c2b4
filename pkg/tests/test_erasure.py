from __future__ import annotations

import json

import numpy as np
import pytest

from sketchref.core import SketchRefError, TargetKeypoints, get_schema
from sketchref.erasure import (
    ErasureSpec,
    FunctionEvaluator,
    SweepResult,
    erase_regions,
    erasure_sweep,
    permuted_indices,
    sweep_to_csv,
    sweep_to_dict,
)
from sketchref.fixtures import (
    MockStructureEvaluator,
    constant_image,
    draw_stick_figure,
    stick_figure_item,
    stick_figure_target,
)
from sketchref.recognizability import OksParams


def _points(coords):
    return TargetKeypoints(
        bbox=(0.0, 0.0, 224.0, 224.0),
        points=tuple((float(x), float(y), 1.0) for x, y in coords),
    )


# ---------------------------------------------------------------------------
# Seeded permutation
# ---------------------------------------------------------------------------


def test_permutation_is_a_permutation():
    for n in (1, 2, 5, 17, 100):
        order = permuted_indices(n, seed=42)
        assert sorted(order) == list(range(n))


def test_permutation_deterministic_and_seed_sensitive():
    assert permuted_indices(17, 42) == permuted_indices(17, 42)
    assert permuted_indices(17, 42) != permuted_indices(17, 43)


def test_permutation_prefix_nesting():
    order = permuted_indices(17, seed=7)
    for k in range(16):
        assert set(order[:k]) <= set(order[: k + 1])


# ---------------------------------------------------------------------------
# erase_regions
# ---------------------------------------------------------------------------


def test_erase_count_zero_is_identity():
    img = draw_stick_figure()
    out = erase_regions(img, stick_figure_target(), ErasureSpec(count=0, seed=1))
    assert out.pixels == img.pixels


def test_erase_interior_region_is_exactly_100_pixels():
    img = constant_image(0)
    kp = _points([(112, 112)])
    out = erase_regions(img, kp, ErasureSpec(count=1, seed=1))
    diff = out.array != img.array
    assert int(diff.sum()) == 100
    ys, xs = np.nonzero(diff)
    # window x in [cx - 5, cx + 4], same for y
    assert (xs.min(), xs.max()) == (107, 116)
    assert (ys.min(), ys.max()) == (107, 116)
    assert (out.array[diff] == 255).all()


def test_erase_corner_region_clips_to_25_pixels():
    img = constant_image(0)
    kp = _points([(0, 0)])
    out = erase_regions(img, kp, ErasureSpec(count=1, seed=1))
    assert int((out.array != img.array).sum()) == 25


def test_erase_respects_fill_value():
    img = constant_image(0)
    kp = _points([(50, 50)])
    out = erase_regions(img, kp, ErasureSpec(count=1, seed=1, fill_value=7))
    changed = out.array[out.array != img.array]
    assert (changed == 7).all()


def test_erase_input_unmodified():
    img = constant_image(0)
    before = bytes(img.pixels)
    erase_regions(img, _points([(50, 50)]), ErasureSpec(count=1, seed=1))
    assert img.pixels == before


def test_erase_deterministic():
    img = draw_stick_figure()
    kp = stick_figure_target()
    spec = ErasureSpec(count=5, seed=99)
    assert erase_regions(img, kp, spec).pixels == erase_regions(img, kp, spec).pixels


def test_erase_pixel_accounting_matches_window_union():
    # build the expected union with the documented window formula
    img = constant_image(0)
    coords = [(10, 10), (14, 12), (200, 100), (3, 220)]
    kp = _points(coords)
    spec = ErasureSpec(count=4, seed=5, region_size=10)
    out = erase_regions(img, kp, spec)
    union = set()
    for cx, cy in coords:
        for x in range(max(cx - 5, 0), min(cx + 5, 224)):
            for y in range(max(cy - 5, 0), min(cy + 5, 224)):
                union.add((x, y))
    assert int((out.array != img.array).sum()) == len(union)


def test_erase_nesting_across_counts():
    img = constant_image(0)
    kp = stick_figure_target()
    previous = set()
    for count in range(6):
        out = erase_regions(img, kp, ErasureSpec(count=count, seed=42))
        ys, xs = np.nonzero(out.array != img.array)
        current = set(zip(xs.tolist(), ys.tolist()))
        assert previous <= current
        previous = current


def test_erase_validation_errors():
    img = constant_image(0)
    with pytest.raises(SketchRefError, match="only"):
        erase_regions(img, _points([(10, 10)]), ErasureSpec(count=2, seed=1))
    with pytest.raises(SketchRefError, match="outside"):
        erase_regions(img, _points([(500, 10)]), ErasureSpec(count=1, seed=1))
    with pytest.raises(SketchRefError):
        ErasureSpec(count=1, seed=1, region_size=0)
    with pytest.raises(SketchRefError):
        ErasureSpec(count=1, seed=1, fill_value=300)
    with pytest.raises(SketchRefError):
        ErasureSpec(count=-1, seed=1)


# ---------------------------------------------------------------------------
# erasure_sweep
# ---------------------------------------------------------------------------


def _sweep_fixture(ks=(0, 1, 2, 3, 4, 5)):
    item = stick_figure_item()
    gt = stick_figure_target()
    evaluator = MockStructureEvaluator(
        gt=gt, params=OksParams(schema=get_schema("coco17"))
    )
    spec = ErasureSpec(count=0, seed=42)
    return erasure_sweep(item, gt, list(ks), [evaluator], spec)


def test_sweep_zero_k_deltas_are_zero():
    result = _sweep_fixture(ks=(0,))
    assert result.per_k[0] == {"r_s": 0.0}


def test_sweep_baseline_is_raw_score():
    result = _sweep_fixture()
    # intact drawing: the mock predictor recovers every joint exactly
    assert result.baseline["r_s"] == 1.0


def test_sweep_rs_deltas_non_increasing():
    result = _sweep_fixture()
    deltas = [result.per_k[k]["r_s"] for k in range(6)]
    assert all(deltas[i + 1] <= deltas[i] for i in range(5))
    assert deltas[5] < 0.0


def test_sweep_deterministic_json():
    a = json.dumps(sweep_to_dict(_sweep_fixture()), sort_keys=True)
    b = json.dumps(sweep_to_dict(_sweep_fixture()), sort_keys=True)
    assert a == b


def test_sweep_multiple_metrics():
    item = stick_figure_item()
    gt = stick_figure_target()
    rs = MockStructureEvaluator(gt=gt, params=OksParams(schema=get_schema("coco17")))
    from sketchref.complexity import complexity_cr

    cr = FunctionEvaluator(name="cr", fn=complexity_cr)
    result = erasure_sweep(item, gt, [0, 3], [rs, cr],
                           ErasureSpec(count=0, seed=42))
    assert set(result.baseline) == {"r_s", "cr"}
    assert set(result.per_k[3]) == {"r_s", "cr"}
    # erasing strokes makes the sketch more compressible too
    assert result.per_k[3]["cr"] <= 0.0


def test_sweep_validation():
    item = stick_figure_item()
    gt = stick_figure_target()
    ev = MockStructureEvaluator(gt=gt, params=OksParams(schema=get_schema("coco17")))
    spec = ErasureSpec(count=0, seed=42)
    with pytest.raises(SketchRefError, match="include 0"):
        erasure_sweep(item, gt, [1, 2], [ev], spec)
    with pytest.raises(SketchRefError):
        erasure_sweep(item, gt, [], [ev], spec)
    with pytest.raises(SketchRefError, match="exceeds"):
        erasure_sweep(item, gt, [0, 18], [ev], spec)
    with pytest.raises(SketchRefError, match="repeat"):
        erasure_sweep(item, gt, [0, 1, 1], [ev], spec)
    with pytest.raises(SketchRefError):
        erasure_sweep(item, gt, [0], [], spec)


def test_sweep_result_invariant():
    with pytest.raises(SketchRefError):
        SweepResult(baseline={"m": 1.0}, per_k={0: {"m": 0.5}})


def test_sweep_csv_shape():
    csv_text = sweep_to_csv(_sweep_fixture())
    lines = csv_text.strip().splitlines()
    assert lines[0] == "k,r_s"
    assert len(lines) == 7
    assert lines[1].startswith("0,")
