from __future__ import annotations

import json
from pathlib import Path

import pytest

from sketchref.aggregation import load_metric_records
from sketchref.cli import main
from sketchref.core import LoadError, SketchRefError, Task
from sketchref.fixtures import build_mini_fixture
from sketchref.pipeline import (
    EvalConfig,
    config_echo,
    config_from_dict,
    run_evaluate,
    with_output_dir,
)


def _config(fix, out_dir, **overrides):
    config = EvalConfig(
        manifest_path=str(fix["manifest"]),
        predictions_dir=str(fix["predictions_dir"]),
        embeddings_dir=str(fix["embeddings_dir"]),
        **overrides,
    )
    return with_output_dir(config, out_dir)


# ---------------------------------------------------------------------------
# run_evaluate
# ---------------------------------------------------------------------------


def test_evaluate_mini_fixture(mini_fixture, tmp_path):
    run = run_evaluate(_config(mini_fixture, tmp_path / "out"))
    assert len(run.records) == 6
    assert not run.errors
    assert run.metrics_path.exists()
    assert run.report_path.exists()
    by_id = {r.item_id: r for r in run.records}
    for rec in run.records:
        assert rec.sr > 0
        if rec.task is Task.STRUCTURE:
            assert 0.0 <= rec.r <= 1.0
        else:
            assert -1.0 <= rec.r <= 1.0
    # refs are textured, sketches clean: every sketch is simpler
    assert all(r.sr > 1 for r in run.records)
    assert by_id["hum01"].method == "mock-a"
    assert by_id["thg02"].method == "mock-b"


def test_evaluate_deterministic_across_worker_counts(mini_fixture, tmp_path):
    outputs = {}
    for jobs in (1, 8):
        out = tmp_path / f"out{jobs}"
        run_evaluate(_config(mini_fixture, out, jobs=jobs))
        outputs[jobs] = (
            (out / "metrics.jsonl").read_bytes(),
            (out / "report.json").read_bytes(),
        )
    assert outputs[1] == outputs[8]


def test_evaluate_repeated_runs_byte_identical(mini_fixture, tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    run_evaluate(_config(mini_fixture, a))
    run_evaluate(_config(mini_fixture, b))
    assert (a / "metrics.jsonl").read_bytes() == (b / "metrics.jsonl").read_bytes()
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_evaluate_records_sorted_by_item_id(mini_fixture, tmp_path):
    run = run_evaluate(_config(mini_fixture, tmp_path / "out"))
    ids = [r.item_id for r in run.records]
    assert ids == sorted(ids)


def test_evaluate_missing_prediction_file_degrades(tmp_path):
    fix = build_mini_fixture(tmp_path / "data")
    (fix["predictions_dir"] / "fac01_ref.json").unlink()
    run = run_evaluate(_config(fix, tmp_path / "out"))
    assert len(run.records) == 5
    assert len(run.errors) == 1
    assert run.errors[0].item_id == "fac01"
    assert run.errors[0].stage == "structure"
    # ledger lands in report metadata; failed item absent from rows
    report = json.loads(run.report_path.read_text())
    assert len(report["metadata"]["errors"]) == 1
    assert "Structure:Face" not in report["rows"].get("mock-a", {})
    lines = run.metrics_path.read_text().splitlines()
    assert len(lines) == 5


def test_evaluate_error_isolation(tmp_path):
    # a broken item leaves every other record untouched
    fix_ok = build_mini_fixture(tmp_path / "ok")
    fix_bad = build_mini_fixture(tmp_path / "bad")
    (fix_bad["predictions_dir"] / "fac01_ref.json").unlink()
    run_ok = run_evaluate(_config(fix_ok, tmp_path / "out_ok"))
    run_bad = run_evaluate(_config(fix_bad, tmp_path / "out_bad"))
    ok_by_id = {r.item_id: r for r in run_ok.records}
    for rec in run_bad.records:
        assert rec == ok_by_id[rec.item_id]


def test_evaluate_alpha_subset_leaves_other_columns_unchanged(mini_fixture, tmp_path):
    run_a = run_evaluate(_config(mini_fixture, tmp_path / "a", alphas=(0.0,)))
    run_b = run_evaluate(_config(mini_fixture, tmp_path / "b", alphas=(0.0, 1.5)))
    rep_a = json.loads(run_a.report_path.read_text())
    rep_b = json.loads(run_b.report_path.read_text())
    for method, cells in rep_a["rows"].items():
        for cell, per_alpha in cells.items():
            assert per_alpha["0.0"] == rep_b["rows"][method][cell]["0.0"]


def test_evaluate_config_round_trip(mini_fixture, tmp_path):
    run = run_evaluate(_config(mini_fixture, tmp_path / "a"))
    echoed = json.loads(run.report_path.read_text())["metadata"]["config"]
    config2 = with_output_dir(config_from_dict(echoed), tmp_path / "b")
    run2 = run_evaluate(config2)
    rep1 = json.loads(run.report_path.read_text())
    rep2 = json.loads(run2.report_path.read_text())
    assert rep1 == rep2


def test_evaluate_aborts_on_global_problems(mini_fixture, tmp_path):
    with pytest.raises(LoadError):
        run_evaluate(EvalConfig(manifest_path=str(tmp_path / "missing.json")))
    # structure items present but predictions dir absent
    with pytest.raises(SketchRefError):
        run_evaluate(
            EvalConfig(
                manifest_path=str(mini_fixture["manifest"]),
                predictions_dir=None,
                embeddings_dir=str(mini_fixture["embeddings_dir"]),
                metrics_path=str(tmp_path / "m.jsonl"),
                report_path=str(tmp_path / "r.json"),
            )
        )
    with pytest.raises(LoadError):
        run_evaluate(
            EvalConfig(
                manifest_path=str(mini_fixture["manifest"]),
                predictions_dir=str(tmp_path / "nowhere"),
                embeddings_dir=str(mini_fixture["embeddings_dir"]),
                metrics_path=str(tmp_path / "m.jsonl"),
                report_path=str(tmp_path / "r.json"),
            )
        )


def test_evaluate_all_items_failed_writes_shell_report(tmp_path):
    fix = build_mini_fixture(tmp_path / "data")
    for f in fix["predictions_dir"].glob("*.json"):
        f.unlink()
    for f in (fix["embeddings_dir"] / "images").glob("*.json"):
        f.unlink()
    run = run_evaluate(_config(fix, tmp_path / "out"))
    assert not run.records
    assert len(run.errors) == 6
    report = json.loads(run.report_path.read_text())
    assert report["rows"] == {}
    assert len(report["metadata"]["errors"]) == 6


def test_config_validation():
    with pytest.raises(SketchRefError):
        EvalConfig(manifest_path="m.json", jobs=0)
    with pytest.raises(SketchRefError):
        EvalConfig(manifest_path="m.json", alphas=(-1.0,))
    with pytest.raises(SketchRefError):
        EvalConfig(manifest_path="m.json", visibility_rule="sometimes")
    with pytest.raises(SketchRefError):
        config_from_dict({})
    with pytest.raises(SketchRefError, match="unknown config"):
        config_from_dict({"manifest_path": "m.json", "bogus": 1})


def test_config_echo_excludes_runtime_fields(mini_fixture):
    config = EvalConfig(
        manifest_path=str(mini_fixture["manifest"]), jobs=4,
        metrics_path="x.jsonl", report_path="y.json",
    )
    echo = config_echo(config)
    assert "jobs" not in echo
    assert "metrics_path" not in echo
    assert "report_path" not in echo


def test_metrics_file_feeds_report_command(mini_fixture, tmp_path):
    run = run_evaluate(_config(mini_fixture, tmp_path / "out"))
    records = load_metric_records(run.metrics_path)
    assert records == list(run.records)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def test_cli_evaluate_and_report(mini_fixture, tmp_path, capsys):
    out = tmp_path / "out"
    code = main([
        "evaluate",
        "--manifest", str(mini_fixture["manifest"]),
        "--predictions", str(mini_fixture["predictions_dir"]),
        "--embeddings", str(mini_fixture["embeddings_dir"]),
        "--out", str(out),
    ])
    assert code == 0
    assert "evaluated 6 of 6" in capsys.readouterr().out

    for fmt in ("md", "csv", "json"):
        code = main([
            "report", "--metrics", str(out / "metrics.jsonl"),
            "--alphas", "0,1.5", "--format", fmt,
        ])
        assert code == 0
        text = capsys.readouterr().out
        assert "mock-a" in text


def test_cli_evaluate_exit_1_on_item_failures(tmp_path, capsys):
    fix = build_mini_fixture(tmp_path / "data")
    (fix["predictions_dir"] / "hum01_ref.json").unlink()
    code = main([
        "evaluate",
        "--manifest", str(fix["manifest"]),
        "--predictions", str(fix["predictions_dir"]),
        "--embeddings", str(fix["embeddings_dir"]),
        "--out", str(tmp_path / "out"),
    ])
    captured = capsys.readouterr()
    assert code == 1
    assert "hum01" in captured.err


def test_cli_exit_2_on_invalid_inputs(tmp_path, capsys):
    code = main([
        "evaluate", "--manifest", str(tmp_path / "missing.json"),
        "--out", str(tmp_path / "out"),
    ])
    assert code == 2
    assert "error:" in capsys.readouterr().err

    code = main(["complexity", "--image", str(tmp_path / "nope.png"),
                 "--method", "entropy_1d"])
    assert code == 2
    capsys.readouterr()

    code = main(["complexity", "--image", str(tmp_path / "nope.png"),
                 "--method", "not_a_method"])
    assert code == 2
    capsys.readouterr()


def test_cli_config_file_with_flag_overrides(mini_fixture, tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({
        "manifest_path": str(mini_fixture["manifest"]),
        "predictions_dir": str(mini_fixture["predictions_dir"]),
        "embeddings_dir": str(mini_fixture["embeddings_dir"]),
        "alphas": [0.0],
    }))
    out = tmp_path / "out"
    code = main(["evaluate", "--config", str(config_path),
                 "--alphas", "0,1.5", "--out", str(out)])
    assert code == 0
    capsys.readouterr()
    report = json.loads((out / "report.json").read_text())
    assert report["alphas"] == [0.0, 1.5]


def test_cli_single_value_commands(mini_fixture, tmp_path, capsys):
    images = mini_fixture["images_dir"]
    preds = mini_fixture["predictions_dir"]
    embs = mini_fixture["embeddings_dir"]

    assert main(["complexity", "--image", str(images / "hum01_skt.png"),
                 "--method", "entropy_1d"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["method"] == "entropy_1d" and payload["value"] > 0

    assert main(["sr", "--ref", str(images / "hum01_ref.png"),
                 "--sketch", str(images / "hum01_skt.png"),
                 "--method", "compression_ratio"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["sr"] > 1

    assert main(["oks", "--ref-kpts", str(preds / "hum01_ref.json"),
                 "--sketch-kpts", str(preds / "hum01_skt.json"),
                 "--schema", "coco17"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert 0.0 <= payload["r_s"] <= 1.0
    assert payload["n_targets"] == 1

    assert main(["rc", "--sketch-emb", str(embs / "images" / "thg01_skt.json"),
                 "--class-emb", str(embs / "text" / "bag.json")]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert -1.0 <= payload["r_c"] <= 1.0


def test_cli_correlate(tmp_path, capsys):
    metric = tmp_path / "metric.csv"
    human = tmp_path / "human.csv"
    metric.write_text("sketch_id,score\na,0.1\nb,0.2\nc,0.3\n")
    human.write_text("sketch_id,score\na,1\nb,2\nc,3\n")
    assert main(["correlate", "--metric", str(metric),
                 "--human", str(human)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload == {"n": 3, "rho": 1.0, "tau": 1.0}

    responses = tmp_path / "responses.csv"
    responses.write_text(
        "sketch_id,mode,value\n"
        "a,rating,1\na,rating,1\na,rating,1\n"
        "b,rating,3\nb,rating,3\nb,rating,3\n"
        "c,rating,5\nc,rating,5\nc,rating,5\n"
    )
    assert main(["correlate", "--metric", str(metric),
                 "--human-responses", str(responses)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["rho"] == 1.0


def test_cli_erase_writes_image(mini_fixture, tmp_path, capsys):
    out = tmp_path / "erased.png"
    code = main([
        "erase",
        "--sketch", str(mini_fixture["images_dir"] / "hum01_skt.png"),
        "--keypoints", str(mini_fixture["predictions_dir"] / "hum01_ref.json"),
        "--count", "3", "--seed", "42", "--out", str(out),
    ])
    assert code == 0
    capsys.readouterr()
    from sketchref.core import load_image

    erased = load_image(out)
    original = load_image(mini_fixture["images_dir"] / "hum01_skt.png")
    assert erased.pixels != original.pixels


def test_cli_erase_sweep_deterministic(mini_fixture, tmp_path, capsys):
    payloads = []
    for name in ("s1.json", "s2.json"):
        out = tmp_path / name
        code = main([
            "erase-sweep",
            "--manifest", str(mini_fixture["manifest"]),
            "--predictions", str(mini_fixture["predictions_dir"]),
            "--ks", "0,1,2,3,4,5", "--seed", "42",
            "--out", str(out),
        ])
        assert code == 0
        capsys.readouterr()
        payloads.append(out.read_bytes())
    assert payloads[0] == payloads[1]
    sweep = json.loads(payloads[0])
    assert set(sweep["sweeps"]) == {"ani01", "fac01", "hum01"}
    hum = sweep["sweeps"]["hum01"]["per_k"]
    deltas = [hum[str(k)]["r_s"] for k in range(6)]
    assert all(deltas[i + 1] <= deltas[i] for i in range(5))


def test_cli_out_writes_json_file(mini_fixture, tmp_path, capsys):
    out = tmp_path / "value.json"
    assert main(["complexity",
                 "--image", str(mini_fixture["images_dir"] / "hum01_skt.png"),
                 "--method", "compression_ratio", "--out", str(out)]) == 0
    capsys.readouterr()
    assert json.loads(out.read_text())["method"] == "compression_ratio"
