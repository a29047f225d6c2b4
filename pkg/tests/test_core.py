from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from oracles import composite_over_white, integer_luma
from sketchref.core import (
    Domain,
    EmbeddingKind,
    EmbeddingRecord,
    EvalItem,
    KeypointSchema,
    LoadError,
    PredictionFile,
    SketchRefError,
    TargetKeypoints,
    Task,
    embedding_to_dict,
    get_schema,
    image_from_array,
    load_embedding,
    load_image,
    load_manifest,
    load_predictions,
    load_sigma_overrides,
    manifest_to_dict,
    prediction_to_dict,
)
from sketchref.fixtures import build_mini_fixture, constant_image


# ---------------------------------------------------------------------------
# Images and grayscale conversion
# ---------------------------------------------------------------------------


def test_image_record_invariants():
    with pytest.raises(SketchRefError):
        image_from_array("", np.zeros((4, 4), dtype=np.uint8))
    rec = constant_image(128, width=5, height=3)
    assert rec.width == 5 and rec.height == 3
    assert len(rec.pixels) == 15
    assert rec.array.shape == (3, 5)


def test_buffer_length_mismatch_rejected():
    from sketchref.core import ImageRecord

    with pytest.raises(SketchRefError):
        ImageRecord(id="x", path=None, width=4, height=4, pixels=b"\x00" * 15)


def test_grayscale_rgb_matches_integer_luma_oracle(tmp_path):
    rng = np.random.Generator(np.random.PCG64(3))
    rgb = rng.integers(0, 256, size=(9, 7, 3), dtype=np.uint8)
    path = tmp_path / "rgb.png"
    Image.fromarray(rgb, mode="RGB").save(path)
    rec = load_image(path)
    for y in range(9):
        for x in range(7):
            r, g, b = (int(v) for v in rgb[y, x])
            assert rec.array[y, x] == integer_luma(r, g, b)


def test_grayscale_alpha_composites_over_white(tmp_path):
    rng = np.random.Generator(np.random.PCG64(4))
    rgba = rng.integers(0, 256, size=(6, 6, 4), dtype=np.uint8)
    path = tmp_path / "rgba.png"
    Image.fromarray(rgba, mode="RGBA").save(path)
    rec = load_image(path)
    for y in range(6):
        for x in range(6):
            r, g, b, a = (int(v) for v in rgba[y, x])
            expected = integer_luma(
                composite_over_white(r, a),
                composite_over_white(g, a),
                composite_over_white(b, a),
            )
            assert rec.array[y, x] == expected


def test_grayscale_deterministic_across_loads(tmp_path):
    rng = np.random.Generator(np.random.PCG64(5))
    rgb = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
    path = tmp_path / "img.png"
    Image.fromarray(rgb, mode="RGB").save(path)
    assert load_image(path).pixels == load_image(path).pixels


def test_load_image_missing_file(tmp_path):
    with pytest.raises(LoadError):
        load_image(tmp_path / "missing.png")


# ---------------------------------------------------------------------------
# Keypoint schemas
# ---------------------------------------------------------------------------


def test_builtin_schemas_have_expected_point_counts():
    assert get_schema("coco17").point_count == 17
    assert get_schema("face106").point_count == 106
    assert get_schema("animal20").point_count == 20
    for name in ("coco17", "face106", "animal20"):
        schema = get_schema(name)
        assert len(schema.sigmas) == schema.point_count
        assert all(s > 0 for s in schema.sigmas)


def test_unknown_schema_rejected():
    with pytest.raises(SketchRefError):
        get_schema("coco18")


def test_schema_invariant_violations():
    with pytest.raises(SketchRefError):
        KeypointSchema(name="coco17", point_count=16, sigmas=(0.05,) * 16)
    with pytest.raises(SketchRefError):
        KeypointSchema(name="coco17", point_count=17, sigmas=(0.05,) * 16)
    with pytest.raises(SketchRefError):
        KeypointSchema(name="animal20", point_count=20, sigmas=(0.0,) * 20)


def test_sigma_overrides(tmp_path):
    override_path = tmp_path / "sigmas.json"
    override_path.write_text(json.dumps({"animal20": [0.08] * 20}))
    overrides = load_sigma_overrides(override_path)
    schema = get_schema("animal20", overrides)
    assert schema.sigmas == (0.08,) * 20
    # unrelated schemas keep their defaults
    assert get_schema("face106", overrides).sigmas == (0.05,) * 106


def test_sigma_overrides_wrong_length(tmp_path):
    override_path = tmp_path / "sigmas.json"
    override_path.write_text(json.dumps({"animal20": [0.08] * 19}))
    with pytest.raises(SketchRefError):
        get_schema("animal20", load_sigma_overrides(override_path))


# ---------------------------------------------------------------------------
# Targets and prediction files
# ---------------------------------------------------------------------------


def _target(n_points: int, conf: float = 1.0) -> dict:
    return {
        "bbox": [10.0, 10.0, 50.0, 80.0],
        "score": 0.9,
        "keypoints": [[10.0 + i, 20.0 + i, conf] for i in range(n_points)],
    }


def _write_predictions(path: Path, image_id: str, schema: str, targets: list) -> None:
    path.write_text(json.dumps(
        {"image_id": image_id, "schema": schema, "targets": targets}
    ))


def test_load_predictions_two_targets(tmp_path):
    path = tmp_path / "p.json"
    _write_predictions(path, "img1", "coco17", [_target(17), _target(17)])
    pf = load_predictions(path, get_schema("coco17"))
    assert pf.n_targets == 2
    assert pf.image_id == "img1"
    assert all(len(t.points) == 17 for t in pf.targets)


def test_load_predictions_wrong_point_count(tmp_path):
    path = tmp_path / "p.json"
    _write_predictions(path, "img1", "coco17", [_target(18)])
    with pytest.raises(LoadError):
        load_predictions(path, get_schema("coco17"))


def test_load_predictions_schema_mismatch(tmp_path):
    path = tmp_path / "p.json"
    _write_predictions(path, "img1", "face106", [_target(106)])
    with pytest.raises(LoadError):
        load_predictions(path, get_schema("coco17"))


def test_load_predictions_negative_bbox(tmp_path):
    path = tmp_path / "p.json"
    bad = _target(17)
    bad["bbox"] = [0.0, 0.0, -5.0, 10.0]
    _write_predictions(path, "img1", "coco17", [bad])
    with pytest.raises(LoadError):
        load_predictions(path, get_schema("coco17"))


def test_target_visibility_validation():
    points = tuple((float(i), float(i), 1.0) for i in range(3))
    with pytest.raises(SketchRefError):
        TargetKeypoints(bbox=(0, 0, 10, 10), points=points, visibility=(0, 1))
    with pytest.raises(SketchRefError):
        TargetKeypoints(bbox=(0, 0, 10, 10), points=points, visibility=(0, 1, 3))
    t = TargetKeypoints(bbox=(0, 0, 10, 10), points=points, visibility=(0, 1, 2))
    assert t.visibility == (0, 1, 2)


def test_target_confidence_range():
    with pytest.raises(SketchRefError):
        TargetKeypoints(bbox=(0, 0, 10, 10), points=((1.0, 1.0, 1.5),))


def test_prediction_round_trip(tmp_path):
    path = tmp_path / "p.json"
    targets = [_target(17), _target(17, conf=0.25)]
    targets[0]["visibility"] = [2] * 17
    _write_predictions(path, "img1", "coco17", targets)
    pf = load_predictions(path, get_schema("coco17"))

    path2 = tmp_path / "p2.json"
    path2.write_text(json.dumps(prediction_to_dict(pf)))
    pf2 = load_predictions(path2, get_schema("coco17"))
    assert pf == pf2


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


def _write_embedding(path: Path, dim: int, values: list) -> None:
    path.write_text(json.dumps({
        "key": "img1", "kind": "image", "model_id": "m", "dim": dim,
        "values": values,
    }))


def test_load_embedding_valid(tmp_path):
    path = tmp_path / "e.json"
    _write_embedding(path, 512, [0.01] * 512)
    rec = load_embedding(path)
    assert rec.dim == 512
    assert len(rec.values) == 512
    assert rec.kind is EmbeddingKind.IMAGE


def test_load_embedding_dim_mismatch(tmp_path):
    path = tmp_path / "e.json"
    _write_embedding(path, 512, [0.01] * 511)
    with pytest.raises(LoadError):
        load_embedding(path)


def test_load_embedding_zero_vector(tmp_path):
    path = tmp_path / "e.json"
    _write_embedding(path, 4, [0.0, 0.0, 0.0, 0.0])
    with pytest.raises(LoadError):
        load_embedding(path)


def test_embedding_round_trip(tmp_path):
    rec = EmbeddingRecord(
        key="cat", kind=EmbeddingKind.TEXT, model_id="m", dim=3,
        values=(0.5, -0.25, 0.125),
    )
    path = tmp_path / "e.json"
    path.write_text(json.dumps(embedding_to_dict(rec)))
    assert load_embedding(path) == rec


# ---------------------------------------------------------------------------
# EvalItem and the manifest
# ---------------------------------------------------------------------------


def test_eval_item_task_domain_rules():
    ref = constant_image(200, image_id="r1")
    skt = constant_image(250, image_id="s1")
    # Category needs a class label
    with pytest.raises(SketchRefError):
        EvalItem(id="a", domain=Domain.ANIMAL, task=Task.CATEGORY,
                 ref=ref, sketch=skt, method="m")
    # Category only for Animal/Things
    with pytest.raises(SketchRefError):
        EvalItem(id="a", domain=Domain.HUMAN, task=Task.CATEGORY,
                 ref=ref, sketch=skt, method="m", class_label="person")
    # Structure only for Human/Face/Animal
    with pytest.raises(SketchRefError):
        EvalItem(id="a", domain=Domain.THINGS, task=Task.STRUCTURE,
                 ref=ref, sketch=skt, method="m")
    item = EvalItem(id="a", domain=Domain.THINGS, task=Task.CATEGORY,
                    ref=ref, sketch=skt, method="m", class_label="bag")
    assert item.class_label == "bag"


def test_eval_item_dimension_mismatch():
    ref = constant_image(200, image_id="r1", width=224, height=224)
    skt = constant_image(250, image_id="s1", width=128, height=224)
    with pytest.raises(SketchRefError):
        EvalItem(id="a", domain=Domain.HUMAN, task=Task.STRUCTURE,
                 ref=ref, sketch=skt, method="m")


def test_load_manifest_mini_fixture(mini_fixture):
    items = load_manifest(mini_fixture["manifest"])
    assert len(items) == 6
    assert {i.id for i in items} == {
        "ani01", "ani02", "fac01", "hum01", "thg01", "thg02",
    }
    for item in items:
        assert (item.ref.width, item.ref.height) == (224, 224)
        if item.task is Task.CATEGORY:
            assert item.class_label


def _tiny_png(path: Path, value: int = 255) -> None:
    Image.fromarray(np.full((8, 8), value, dtype=np.uint8), mode="L").save(path)


def _manifest_entry(item_id: str, ref: str, skt: str) -> dict:
    return {
        "id": item_id, "domain": "Human", "task": "Structure",
        "ref_path": ref, "sketch_path": skt, "method": "m",
    }


def test_load_manifest_duplicate_id(tmp_path):
    _tiny_png(tmp_path / "a.png")
    _tiny_png(tmp_path / "b.png")
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"version": "1", "items": [
        _manifest_entry("h001", "a.png", "b.png"),
        _manifest_entry("h001", "a.png", "b.png"),
    ]}))
    with pytest.raises(LoadError, match="duplicate"):
        load_manifest(manifest)


def test_load_manifest_category_missing_label(tmp_path):
    _tiny_png(tmp_path / "a.png")
    _tiny_png(tmp_path / "b.png")
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"version": "1", "items": [{
        "id": "c1", "domain": "Things", "task": "Category",
        "ref_path": "a.png", "sketch_path": "b.png", "method": "m",
        "class_label": "",
    }]}))
    with pytest.raises(LoadError):
        load_manifest(manifest)


def test_load_manifest_dangling_reference(tmp_path):
    _tiny_png(tmp_path / "a.png")
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"version": "1", "items": [
        _manifest_entry("h001", "a.png", "gone.png"),
    ]}))
    with pytest.raises(LoadError):
        load_manifest(manifest)


def test_load_manifest_stem_collision(tmp_path):
    (tmp_path / "d1").mkdir()
    (tmp_path / "d2").mkdir()
    _tiny_png(tmp_path / "d1" / "a.png", value=255)
    _tiny_png(tmp_path / "d2" / "a.png", value=0)
    _tiny_png(tmp_path / "b.png")
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"version": "1", "items": [
        _manifest_entry("h001", "d1/a.png", "b.png"),
        _manifest_entry("h002", "d2/a.png", "b.png"),
    ]}))
    with pytest.raises(LoadError, match="maps to both"):
        load_manifest(manifest)


def test_load_manifest_parse_failure(tmp_path):
    manifest = tmp_path / "manifest.json"
    manifest.write_text("{not json")
    with pytest.raises(LoadError):
        load_manifest(manifest)


def test_manifest_round_trip(mini_fixture, tmp_path):
    items = load_manifest(mini_fixture["manifest"])
    out = tmp_path / "again.json"
    out.write_text(json.dumps(manifest_to_dict(items)))
    again = load_manifest(out)
    assert [i.id for i in again] == [i.id for i in items]
    for a, b in zip(again, items):
        assert (a.domain, a.task, a.method, a.class_label) == (
            b.domain, b.task, b.method, b.class_label,
        )
        assert a.ref.pixels == b.ref.pixels
        assert a.sketch.pixels == b.sketch.pixels
