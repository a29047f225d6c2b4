"""Command-line surface.

Exit codes: 0 on success, 1 when per-item failures were recorded in the
error ledger, 2 for invalid invocations or unreadable inputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from PIL import Image

from sketchref.aggregation import (
    RENDERERS,
    build_report,
    load_metric_records,
)
from sketchref.complexity import (
    compute_complexity,
    method_from_name,
    result_to_dict,
    simplicity_ratio,
)
from sketchref.core import (
    DOMAIN_SCHEMAS,
    SketchRefError,
    Task,
    get_schema,
    load_embedding,
    load_image,
    load_manifest,
    load_predictions_auto,
    load_sigma_overrides,
)
from sketchref.erasure import (
    ErasureSpec,
    erase_regions,
    erasure_sweep,
    sweep_to_csv,
    sweep_to_dict,
)
from sketchref.fixtures import MockJointPredictor, MockStructureEvaluator
from sketchref.humanstudy import (
    correlate,
    correlation_to_dict,
    load_responses_csv,
    load_scores_csv,
    reduce_responses,
)
from sketchref.pipeline import (
    EvalConfig,
    config_from_dict,
    load_config,
    run_evaluate,
    with_output_dir,
)
from sketchref.recognizability import (
    OksParams,
    VisibilityRule,
    category_recognizability,
    structure_recognizability,
    structure_score_to_dict,
)


def _alphas_arg(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("alpha list is empty")
    return values


def _ks_arg(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k list {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("k list is empty")
    return values


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file (flags override it)")
    sub.add_argument("--jobs", type=int, default=None, help="worker count")
    sub.add_argument("--out", default=None, help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchref",
        description=(
            "Score synthesized sketches against reference photos: "
            "recognizability, simplicity, and their trade-off."
        ),
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("evaluate", help="run the full pipeline over a manifest")
    _common_flags(p)
    p.add_argument("--manifest", help="dataset manifest JSON")
    p.add_argument("--predictions", help="directory of keypoint prediction files")
    p.add_argument("--embeddings", help="directory of embedding files")
    p.add_argument("--complexity-method", default=None,
                   help="complexity estimator for SR (default compression_ratio)")
    p.add_argument("--alphas", type=_alphas_arg, default=None,
                   help="comma-separated thresholds, e.g. 0,1.5")
    p.add_argument("--visibility-rule", default=None,
                   choices=[r.value for r in VisibilityRule])
    p.add_argument("--sigma-overrides", default=None,
                   help="JSON file overriding per-schema sigmas")

    p = subs.add_parser("report", help="render a report from a metrics file")
    _common_flags(p)
    p.add_argument("--metrics", required=True, help="metrics.jsonl path")
    p.add_argument("--alphas", type=_alphas_arg, default=(0.0, 1.5))
    p.add_argument("--format", default="md", choices=sorted(RENDERERS))

    p = subs.add_parser("complexity", help="complexity of one image")
    _common_flags(p)
    p.add_argument("--image", required=True)
    p.add_argument("--method", required=True)

    p = subs.add_parser("sr", help="simplicity ratio of a (reference, sketch) pair")
    _common_flags(p)
    p.add_argument("--ref", required=True)
    p.add_argument("--sketch", required=True)
    p.add_argument("--method", default="compression_ratio")

    p = subs.add_parser("oks", help="structure score between two prediction files")
    _common_flags(p)
    p.add_argument("--ref-kpts", required=True)
    p.add_argument("--sketch-kpts", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--visibility-rule", default=VisibilityRule.ALL_POINTS.value,
                   choices=[r.value for r in VisibilityRule])
    p.add_argument("--sigma-overrides", default=None)

    p = subs.add_parser("rc", help="category recognizability of one sketch")
    _common_flags(p)
    p.add_argument("--sketch-emb", required=True)
    p.add_argument("--class-emb", required=True)

    p = subs.add_parser("correlate", help="rank-correlate metric vs human scores")
    _common_flags(p)
    p.add_argument("--metric", required=True, help="CSV sketch_id,score")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--human", help="CSV sketch_id,score")
    group.add_argument("--human-responses",
                       help="raw CSV sketch_id,mode,value (reduced per sketch)")

    p = subs.add_parser("erase", help="blank regions around chosen keypoints")
    _common_flags(p)
    p.add_argument("--sketch", required=True)
    p.add_argument("--keypoints", required=True, help="prediction file with gt points")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--target", type=int, default=0, help="target index in the file")
    p.add_argument("--region-size", type=int, default=10)
    p.add_argument("--fill", type=int, default=255)

    p = subs.add_parser("erase-sweep",
                        help="score metrics under growing erasure counts")
    _common_flags(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True,
                   help="directory with reference-side prediction files")
    p.add_argument("--ks", type=_ks_arg, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--region-size", type=int, default=10)
    p.add_argument("--fill", type=int, default=255)
    p.add_argument("--csv", default=None,
                   help="also write per-item plot CSVs under this directory")

    return parser


# ---------------------------------------------------------------------------
# Command handlers
# ---------------------------------------------------------------------------


def _cmd_evaluate(args: argparse.Namespace) -> int:
    base: dict = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
        if not isinstance(base, dict):
            raise SketchRefError(f"config {args.config}: expected an object")
    overrides = {
        "manifest_path": args.manifest,
        "predictions_dir": args.predictions,
        "embeddings_dir": args.embeddings,
        "complexity_method": args.complexity_method,
        "alphas": list(args.alphas) if args.alphas else None,
        "visibility_rule": args.visibility_rule,
        "sigma_overrides_path": args.sigma_overrides,
        "jobs": args.jobs,
    }
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    config = config_from_dict(base)
    if args.out:
        config = with_output_dir(config, args.out)

    run = run_evaluate(config)
    for err in run.errors:
        sys.stderr.write(f"item {err.item_id}: [{err.stage}] {err.error}\n")
    sys.stdout.write(
        f"evaluated {len(run.records)} of "
        f"{len(run.records) + len(run.errors)} items\n"
        f"metrics: {run.metrics_path}\nreport: {run.report_path}\n"
    )
    return 1 if run.errors else 0


def _cmd_report(args: argparse.Namespace) -> int:
    records = load_metric_records(args.metrics)
    report = build_report(records, args.alphas)
    text = RENDERERS[args.format](report)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_complexity(args: argparse.Namespace) -> int:
    img = load_image(args.image)
    method = method_from_name(args.method)
    value = compute_complexity(img, method)
    _emit({"method": method.name.value, "value": value}, args.out)
    return 0


def _cmd_sr(args: argparse.Namespace) -> int:
    ref = load_image(args.ref)
    sketch = load_image(args.sketch)
    result = simplicity_ratio(ref, sketch, method_from_name(args.method))
    _emit(result_to_dict(result), args.out)
    return 0


def _cmd_oks(args: argparse.Namespace) -> int:
    overrides = (
        load_sigma_overrides(args.sigma_overrides) if args.sigma_overrides else None
    )
    schema = get_schema(args.schema, overrides)
    ref_pf = load_predictions_auto(args.ref_kpts, overrides)[0]
    skt_pf = load_predictions_auto(args.sketch_kpts, overrides)[0]
    if ref_pf.schema != schema.name or skt_pf.schema != schema.name:
        raise SketchRefError(
            f"prediction files declare schemas {ref_pf.schema!r}/"
            f"{skt_pf.schema!r}, expected {schema.name!r}"
        )
    params = OksParams(
        schema=schema, visibility_rule=VisibilityRule(args.visibility_rule)
    )
    score = structure_recognizability(ref_pf, skt_pf, params)
    _emit(structure_score_to_dict(score), args.out)
    return 0


def _cmd_rc(args: argparse.Namespace) -> int:
    sketch_emb = load_embedding(args.sketch_emb)
    class_emb = load_embedding(args.class_emb)
    value = category_recognizability(sketch_emb, class_emb)
    _emit({"r_c": value}, args.out)
    return 0


def _cmd_correlate(args: argparse.Namespace) -> int:
    metric_scores = load_scores_csv(args.metric)
    if args.human:
        human_scores = load_scores_csv(args.human)
    else:
        human_scores = reduce_responses(load_responses_csv(args.human_responses))
    result = correlate(metric_scores, human_scores)
    _emit(correlation_to_dict(result), args.out)
    return 0


def _cmd_erase(args: argparse.Namespace) -> int:
    if not args.out:
        raise SketchRefError("erase requires --out for the erased image")
    sketch = load_image(args.sketch)
    pf, _ = load_predictions_auto(args.keypoints)
    if not 0 <= args.target < pf.n_targets:
        raise SketchRefError(
            f"target index {args.target} out of range (file has {pf.n_targets})"
        )
    spec = ErasureSpec(
        count=args.count, seed=args.seed,
        region_size=args.region_size, fill_value=args.fill,
    )
    erased = erase_regions(sketch, pf.targets[args.target], spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(erased.array, mode="L").save(out)
    sys.stdout.write(f"wrote {out}\n")
    return 0


def _cmd_erase_sweep(args: argparse.Namespace) -> int:
    items = load_manifest(args.manifest)
    structure_items = [i for i in items if i.task is Task.STRUCTURE]
    if not structure_items:
        raise SketchRefError("manifest has no Structure items to sweep")
    pred_dir = Path(args.predictions)
    if not pred_dir.is_dir():
        raise SketchRefError(f"predictions dir {pred_dir} is not a directory")

    spec = ErasureSpec(
        count=0, seed=args.seed,
        region_size=args.region_size, fill_value=args.fill,
    )
    predictor = MockJointPredictor()
    sweeps: dict[str, dict] = {}
    failures: list[tuple[str, str]] = []
    for item in sorted(structure_items, key=lambda i: i.id):
        try:
            pf, schema = load_predictions_auto(pred_dir / f"{item.ref.id}.json")
            if pf.n_targets == 0:
                raise SketchRefError("no targets in reference prediction file")
            gt = pf.targets[0]
            evaluator = MockStructureEvaluator(
                gt=gt, params=OksParams(schema=schema), predictor=predictor
            )
            result = erasure_sweep(item, gt, args.ks, [evaluator], spec)
        except SketchRefError as exc:
            failures.append((item.id, str(exc)))
            continue
        sweeps[item.id] = sweep_to_dict(result)
        if args.csv:
            csv_dir = Path(args.csv)
            csv_dir.mkdir(parents=True, exist_ok=True)
            (csv_dir / f"{item.id}.csv").write_text(sweep_to_csv(result))

    for item_id, message in failures:
        sys.stderr.write(f"item {item_id}: {message}\n")
    payload = {"seed": args.seed, "ks": list(args.ks), "sweeps": sweeps}
    _emit(payload, args.out)
    return 1 if failures else 0


_HANDLERS = {
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
    "complexity": _cmd_complexity,
    "sr": _cmd_sr,
    "oks": _cmd_oks,
    "rc": _cmd_rc,
    "correlate": _cmd_correlate,
    "erase": _cmd_erase,
    "erase-sweep": _cmd_erase_sweep,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except SketchRefError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
