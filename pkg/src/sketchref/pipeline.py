"""End-to-end evaluation: manifest in, metrics file and report out.

Each manifest item yields one MetricRecord: recognizability r (cosine
for Category items, mean OKS for Structure items) plus the simplicity
ratio under the configured complexity estimator. Items are evaluated
in a thread pool; results are sorted by item id before anything is
written, so outputs are byte-identical at any worker count.

A broken item (missing prediction file, malformed embedding) lands in
an error ledger instead of aborting the run; ledger entries are
excluded from aggregation and surface as a nonzero exit. Only global
problems (unreadable manifest, missing input directory, bad config)
abort up front.

On-disk layout conventions:
    predictions_dir/<image_id>.json
    embeddings_dir/images/<image_id>.json
    embeddings_dir/text/<class_label>.json
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from sketchref.aggregation import (
    BenchmarkReport,
    MetricRecord,
    build_report,
    record_to_dict,
    report_to_dict,
)
from sketchref.complexity import method_from_name, simplicity_ratio
from sketchref.core import (
    EvalItem,
    LoadError,
    SketchRefError,
    Task,
    get_schema,
    load_manifest,
    load_predictions,
    load_embedding,
    load_sigma_overrides,
    DOMAIN_SCHEMAS,
)
from sketchref.recognizability import (
    OksParams,
    VisibilityRule,
    category_recognizability,
    structure_recognizability,
)

DEFAULT_ALPHAS = (0.0, 1.5)


@dataclass(frozen=True)
class EvalConfig:
    manifest_path: str
    predictions_dir: str | None = None
    embeddings_dir: str | None = None
    complexity_method: str = "compression_ratio"
    complexity_params: dict[str, float] = field(default_factory=dict)
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    visibility_rule: str = VisibilityRule.ALL_POINTS.value
    sigma_overrides_path: str | None = None
    jobs: int = 1
    metrics_path: str = "metrics.jsonl"
    report_path: str = "report.json"

    def __post_init__(self) -> None:
        if self.jobs < 1:
            raise SketchRefError(f"worker count must be >= 1, got {self.jobs}")
        if not self.alphas:
            raise SketchRefError("at least one alpha is required")
        if any(a < 0 for a in self.alphas):
            raise SketchRefError("alphas must be non-negative")
        try:
            VisibilityRule(self.visibility_rule)
        except ValueError:
            raise SketchRefError(
                f"unknown visibility rule: {self.visibility_rule!r}"
            ) from None


def config_echo(config: EvalConfig) -> dict[str, Any]:
    """The semantic part of the config: what determines report content.

    Worker count and output paths are deliberately excluded so that
    runs at different parallelism produce byte-identical reports and
    the echo can be re-run as-is.
    """
    return {
        "manifest_path": config.manifest_path,
        "predictions_dir": config.predictions_dir,
        "embeddings_dir": config.embeddings_dir,
        "complexity_method": config.complexity_method,
        "complexity_params": dict(config.complexity_params),
        "alphas": list(config.alphas),
        "visibility_rule": config.visibility_rule,
        "sigma_overrides_path": config.sigma_overrides_path,
    }


def config_from_dict(d: dict[str, Any]) -> EvalConfig:
    if "manifest_path" not in d:
        raise SketchRefError("config requires manifest_path")
    known = {
        "manifest_path", "predictions_dir", "embeddings_dir",
        "complexity_method", "complexity_params", "alphas",
        "visibility_rule", "sigma_overrides_path", "jobs",
        "metrics_path", "report_path",
    }
    unknown = set(d) - known
    if unknown:
        raise SketchRefError(f"unknown config fields: {sorted(unknown)}")
    kwargs: dict[str, Any] = dict(d)
    if "alphas" in kwargs and kwargs["alphas"] is not None:
        kwargs["alphas"] = tuple(float(a) for a in kwargs["alphas"])
    for key in known:
        if key in kwargs and kwargs[key] is None and key != "manifest_path":
            # JSON null means "use the default" for optional dirs only.
            if key in ("predictions_dir", "embeddings_dir", "sigma_overrides_path"):
                continue
            del kwargs[key]
    return EvalConfig(**kwargs)


def load_config(path: Path | str) -> EvalConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise LoadError(f"config file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"cannot parse config {p}: {exc}") from exc
    if not isinstance(raw, dict):
        raise LoadError(f"config {p}: expected an object")
    return config_from_dict(raw)


@dataclass(frozen=True)
class ItemError:
    item_id: str
    stage: str
    error: str

    def to_dict(self) -> dict[str, str]:
        return {"item_id": self.item_id, "stage": self.stage, "error": self.error}


@dataclass(frozen=True)
class EvalRun:
    records: tuple[MetricRecord, ...]
    report: BenchmarkReport | None
    errors: tuple[ItemError, ...]
    metrics_path: Path
    report_path: Path


def _check_label_path_safe(label: str) -> None:
    if os.sep in label or (os.altsep and os.altsep in label) or label in (".", ".."):
        raise SketchRefError(
            f"class label {label!r} is not usable as an embedding filename"
        )


class _ItemFailure(Exception):
    """Wraps a per-item error with the stage it occurred in."""

    def __init__(self, stage: str, cause: SketchRefError) -> None:
        super().__init__(str(cause))
        self.stage = stage


def _evaluate_item(
    item: EvalItem,
    config: EvalConfig,
    sigma_overrides: dict[str, tuple[float, ...]] | None,
) -> MetricRecord:
    try:
        method = method_from_name(config.complexity_method, config.complexity_params)
        sr = simplicity_ratio(item.ref, item.sketch, method).sr
    except SketchRefError as exc:
        raise _ItemFailure("simplicity", exc) from exc

    if item.task is Task.STRUCTURE:
        assert config.predictions_dir is not None  # checked in run_evaluate
        try:
            schema = get_schema(DOMAIN_SCHEMAS[item.domain], sigma_overrides)
            pred_dir = Path(config.predictions_dir)
            ref_pf = load_predictions(pred_dir / f"{item.ref.id}.json", schema)
            skt_pf = load_predictions(pred_dir / f"{item.sketch.id}.json", schema)
            for pf, expected in ((ref_pf, item.ref.id), (skt_pf, item.sketch.id)):
                if pf.image_id != expected:
                    raise LoadError(
                        f"prediction file for {expected!r} declares "
                        f"image_id {pf.image_id!r}"
                    )
            params = OksParams(
                schema=schema,
                visibility_rule=VisibilityRule(config.visibility_rule),
            )
            r = structure_recognizability(ref_pf, skt_pf, params).r_s
        except SketchRefError as exc:
            raise _ItemFailure("structure", exc) from exc
    else:
        assert config.embeddings_dir is not None
        assert item.class_label is not None  # EvalItem invariant
        try:
            _check_label_path_safe(item.class_label)
            emb_dir = Path(config.embeddings_dir)
            sketch_emb = load_embedding(emb_dir / "images" / f"{item.sketch.id}.json")
            class_emb = load_embedding(emb_dir / "text" / f"{item.class_label}.json")
            if sketch_emb.key != item.sketch.id:
                raise LoadError(
                    f"embedding for {item.sketch.id!r} declares key {sketch_emb.key!r}"
                )
            if class_emb.key != item.class_label:
                raise LoadError(
                    f"embedding for {item.class_label!r} declares key {class_emb.key!r}"
                )
            r = category_recognizability(sketch_emb, class_emb)
        except SketchRefError as exc:
            raise _ItemFailure("category", exc) from exc

    return MetricRecord(
        item_id=item.id,
        method=item.method,
        domain=item.domain,
        task=item.task,
        r=r,
        sr=sr,
        complexity_method=config.complexity_method,
    )


def run_evaluate(config: EvalConfig) -> EvalRun:
    """Evaluate a manifest and write the metrics file and report."""
    items = load_manifest(config.manifest_path)
    if not items:
        raise SketchRefError(f"manifest {config.manifest_path} has no items")

    # Global preconditions: inputs whose absence dooms every item of a
    # task abort the run before any evaluation happens.
    method_from_name(config.complexity_method, config.complexity_params)
    needs_predictions = any(i.task is Task.STRUCTURE for i in items)
    needs_embeddings = any(i.task is Task.CATEGORY for i in items)
    if needs_predictions:
        if not config.predictions_dir:
            raise SketchRefError("manifest has Structure items but no predictions_dir")
        if not Path(config.predictions_dir).is_dir():
            raise LoadError(
                f"predictions_dir {config.predictions_dir} is not a directory"
            )
    if needs_embeddings:
        if not config.embeddings_dir:
            raise SketchRefError("manifest has Category items but no embeddings_dir")
        if not Path(config.embeddings_dir).is_dir():
            raise LoadError(
                f"embeddings_dir {config.embeddings_dir} is not a directory"
            )
    sigma_overrides = (
        load_sigma_overrides(config.sigma_overrides_path)
        if config.sigma_overrides_path
        else None
    )

    def worker(item: EvalItem) -> tuple[MetricRecord | None, ItemError | None]:
        try:
            return _evaluate_item(item, config, sigma_overrides), None
        except _ItemFailure as exc:
            return None, ItemError(item_id=item.id, stage=exc.stage, error=str(exc))

    if config.jobs == 1:
        outcomes = [worker(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(worker, items))

    records = tuple(
        sorted((r for r, _ in outcomes if r is not None), key=lambda r: r.item_id)
    )
    errors = tuple(
        sorted((e for _, e in outcomes if e is not None), key=lambda e: e.item_id)
    )

    metadata = {
        "config": config_echo(config),
        "errors": [e.to_dict() for e in errors],
        "n_items": len(items),
        "n_evaluated": len(records),
    }

    metrics_path = Path(config.metrics_path)
    report_path = Path(config.report_path)
    metrics_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.parent.mkdir(parents=True, exist_ok=True)

    lines = [json.dumps(record_to_dict(r), sort_keys=True) for r in records]
    metrics_path.write_text("".join(line + "\n" for line in lines))

    report: BenchmarkReport | None = None
    if records:
        report = build_report(records, config.alphas, metadata=metadata)
        payload = report_to_dict(report)
    else:
        # Every item failed: emit a shell report so the ledger is still
        # inspectable, but there is nothing to aggregate.
        payload = {
            "alphas": sorted({float(a) for a in config.alphas}),
            "method_order": [],
            "rows": {},
            "averages": {},
            "metadata": {**metadata, "average_weighting": "equal-per-task-cell"},
        }
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    return EvalRun(
        records=records, report=report, errors=errors,
        metrics_path=metrics_path, report_path=report_path,
    )


def with_output_dir(config: EvalConfig, out_dir: Path | str) -> EvalConfig:
    """Point both output files into ``out_dir``."""
    out = Path(out_dir)
    return replace(
        config,
        metrics_path=str(out / "metrics.jsonl"),
        report_path=str(out / "report.json"),
    )
