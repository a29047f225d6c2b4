"""Console entry point: sketchref-adapter embed|pose."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import AdapterConfig, AdapterError, load_config
from .ops import detect_and_pose, embed_inputs
from .wire import atomic_write_json, image_id_for, read_manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchref-adapter",
        description=(
            "Produce the embedding and keypoint files the sketchref "
            "engine consumes."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("embed", "embed every manifest image and class label"),
        ("pose", "detect on references and predict keypoints both sides"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--manifest", required=True, help="dataset manifest JSON")
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--config", help="adapter config JSON")
    return parser


def _cmd_embed(items, out_dir: Path, config: AdapterConfig) -> int:
    image_paths = []
    for item in items:
        image_paths.extend([item.ref, item.sketch])
    labels = sorted({item.class_label for item in items if item.class_label})
    records = embed_inputs(image_paths, labels, config)
    for record in records:
        sub = "images" if record["kind"] == "image" else "text"
        atomic_write_json(out_dir / sub / f"{record['key']}.json", record)
    print(f"wrote {len(records)} embedding files to {out_dir}")
    return 0


def _cmd_pose(items, out_dir: Path, config: AdapterConfig) -> int:
    failures = []
    written = 0
    for item in items:
        if item.task != "Structure":
            continue
        try:
            ref_payload, sketch_payload = detect_and_pose(
                item.ref, item.sketch, item.schema, config
            )
        except AdapterError as exc:
            failures.append((item.id, str(exc)))
            continue
        atomic_write_json(
            out_dir / f"{image_id_for(item.ref)}.json", ref_payload
        )
        atomic_write_json(
            out_dir / f"{image_id_for(item.sketch)}.json", sketch_payload
        )
        written += 2
    print(f"wrote {written} prediction files to {out_dir}")
    for item_id, error in failures:
        print(f"failed {item_id}: {error}", file=sys.stderr)
    return 1 if failures else 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config) if args.config else AdapterConfig()
        items = read_manifest(args.manifest)
        out_dir = Path(args.out)
        if args.command == "embed":
            return _cmd_embed(items, out_dir, config)
        return _cmd_pose(items, out_dir, config)
    except (AdapterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
