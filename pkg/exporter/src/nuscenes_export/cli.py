"""Command-line front end for the exporter."""

from __future__ import annotations

import argparse
import sys

from nuscenes_export.export import DEFAULT_CLASS_PREFIXES, ExportConfig, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nuscenes-export",
        description="Convert nuScenes key-frames into the openloop JSONL sample schema",
    )
    parser.add_argument("--dataset-root", required=True, help="nuScenes root directory")
    parser.add_argument("--version", default="v1.0-trainval")
    parser.add_argument("--split", choices=("train", "val", "all"), default="all")
    parser.add_argument("--scenes", default=None,
                        help="file with one scene name per line (overrides --split)")
    parser.add_argument("--out", default="export.jsonl")
    parser.add_argument("--classes", default=",".join(DEFAULT_CLASS_PREFIXES),
                        help="comma-separated category-name prefixes to keep")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExportConfig(
            dataset_root=args.dataset_root,
            split=args.split,
            output_path=args.out,
            version=args.version,
            class_prefixes=tuple(p for p in args.classes.split(",") if p),
            scenes_file=args.scenes,
        )
        manifest = export(cfg)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    counts = manifest["counts"]
    print(
        f"exported {counts['exported']} samples from {manifest['n_scenes']} scenes "
        f"to {args.out} (skipped: {counts['skipped_short_history']} short history, "
        f"{counts['skipped_short_future']} short future, {counts['skipped_no_can']} no CAN)"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
