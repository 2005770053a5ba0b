"""Command-line entry point: gen, train, eval, audit, analyze.

Every run writes a RunManifest JSON next to its outputs with the fully
resolved configuration, so any result can be reproduced from the manifest
alone.  Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import openloop
from openloop import analysis, dataio, metrics, model, trainer
from openloop.core import FUTURE_LEN

TABLE_COLUMNS = ("1s", "2s", "3s", "avg")


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def write_manifest(
    out_dir: str,
    subcommand: str,
    config: dict,
    inputs: dict,
    outputs: dict,
    resolved: dict | None = None,
) -> str:
    """Record a run.  config holds flag-shaped options only, so a run can be
    rebuilt from the manifest; resolved holds derived values."""
    manifest = {
        "tool": "openloop",
        "version": openloop.__version__,
        "subcommand": subcommand,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "resolved": resolved or {},
    }
    path = os.path.join(out_dir, f"{subcommand}_manifest.json")
    _write_json(path, manifest)
    return path


def argv_from_manifest(manifest: dict) -> list[str]:
    """Rebuild the argument vector that reproduces a recorded run."""
    argv = [manifest["subcommand"]]
    for key, value in manifest["config"].items():
        flag = "--" + key.replace("_", "-")
        if value is None:
            continue
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif isinstance(value, (list, tuple)):
            argv.extend([flag, ",".join(str(v) for v in value)])
        else:
            argv.extend([flag, str(value)])
    for key, value in manifest["inputs"].items():
        argv.extend(["--" + key.replace("_", "-"), str(value)])
    argv.extend(["--out-dir", manifest["outputs"]["out_dir"]])
    return argv


def _ensure_out_dir(args) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def _ego_spec(args) -> metrics.EgoSpec:
    return metrics.EgoSpec(length=args.ego_length, width=args.ego_width)


def _format_rates_table(l2: dict, coll: dict) -> str:
    header = (
        f"{'':10s}" + "".join(f"L2 {c:>4s}" + "  " for c in TABLE_COLUMNS)
        + "".join(f"Col% {c:>4s}" + " " for c in TABLE_COLUMNS)
    )
    row = f"{'ours':10s}" + "".join(f"{l2[c]:7.3f}" + " " for c in TABLE_COLUMNS)
    row += "".join(f"{coll[c]:8.3f}" + " " for c in TABLE_COLUMNS)
    return header + "\n" + row + "\n"


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen(args) -> int:
    out_dir = _ensure_out_dir(args)
    cfg = dataio.SyntheticConfig(
        n_samples=args.n_samples,
        straight_fraction=args.straight_fraction,
        speed_range=(args.speed_min, args.speed_max),
        turn_radius_range=(args.radius_min, args.radius_max),
        obstacle_density=args.obstacle_density,
        clearance_range=(args.clearance_min, args.clearance_max),
        ego_length=args.ego_length,
        ego_width=args.ego_width,
        rng_seed=args.seed,
    )
    ds = dataio.generate_synthetic(cfg)
    dataset_path = os.path.join(out_dir, "dataset.jsonl")
    dataio.write_dataset(ds, dataset_path)
    write_manifest(
        out_dir,
        "gen",
        {
            "n_samples": args.n_samples,
            "straight_fraction": args.straight_fraction,
            "speed_min": args.speed_min,
            "speed_max": args.speed_max,
            "radius_min": args.radius_min,
            "radius_max": args.radius_max,
            "obstacle_density": args.obstacle_density,
            "clearance_min": args.clearance_min,
            "clearance_max": args.clearance_max,
            "ego_length": args.ego_length,
            "ego_width": args.ego_width,
            "seed": args.seed,
        },
        {},
        {"out_dir": out_dir, "dataset": dataset_path},
    )
    print(f"wrote {len(ds)} samples to {dataset_path}")
    return 0


def cmd_train(args) -> int:
    out_dir = _ensure_out_dir(args)
    if not os.path.exists(args.dataset):
        raise FileNotFoundError(f"dataset not found: {args.dataset}")
    ds = dataio.load_dataset(args.dataset)
    mask = model.InputMask(
        use_trajectory=True,
        use_velocity=not args.no_velocity,
        use_acceleration=not args.no_acceleration,
        use_command=not args.no_command,
    )
    net = model.init_params(mask=mask, seed=args.seed)
    cfg = trainer.TrainConfig(
        lr0=args.lr,
        weight_decay=args.weight_decay,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    loss_cfg = model.LossConfig(grid_size=args.grid_size)
    log = trainer.train(ds, net, cfg, loss_cfg)

    checkpoint_path = args.checkpoint_out or os.path.join(out_dir, "checkpoint.json")
    model.save_checkpoint(net, checkpoint_path)
    log_path = os.path.join(out_dir, "train_log.csv")
    log.write_csv(log_path)
    write_manifest(
        out_dir,
        "train",
        {
            "lr": args.lr,
            "weight_decay": args.weight_decay,
            "epochs": args.epochs,
            "batch_size": args.batch_size,
            "grid_size": args.grid_size,
            "checkpoint_out": args.checkpoint_out,
            "no_velocity": args.no_velocity,
            "no_acceleration": args.no_acceleration,
            "no_command": args.no_command,
            "seed": args.seed,
        },
        {"dataset": args.dataset},
        {"out_dir": out_dir, "checkpoint": checkpoint_path, "train_log": log_path},
        resolved={"d_in": mask.dim, "n_samples": len(ds)},
    )
    print(
        f"trained {cfg.epochs} epochs on {len(ds)} samples (d_in={mask.dim}); "
        f"final epoch mean loss {log.epoch_means[-1]:.6f}"
    )
    return 0


def cmd_eval(args) -> int:
    out_dir = _ensure_out_dir(args)
    for path, kind in ((args.dataset, "dataset"), (args.checkpoint, "checkpoint")):
        if not os.path.exists(path):
            raise FileNotFoundError(f"{kind} not found: {path}")
    ds = dataio.load_dataset(args.dataset)
    net = model.load_checkpoint(args.checkpoint)
    ego = _ego_spec(args)

    predictions = [model.forward(net, model.encode_input(s, net.mask)) for s in ds.samples]
    l2_values = [metrics.l2_errors(p, s.gt_future, variant=args.l2_variant)
                 for p, s in zip(predictions, ds.samples)]
    n = len(l2_values)
    l2_mean = {
        "1s": sum(v.l2_1s for v in l2_values) / n,
        "2s": sum(v.l2_2s for v in l2_values) / n,
        "3s": sum(v.l2_3s for v in l2_values) / n,
    }
    l2_mean["avg"] = (l2_mean["1s"] + l2_mean["2s"] + l2_mean["3s"]) / 3.0
    coll = metrics.collision_rate(
        ds.samples,
        predictions,
        ego,
        grid_size=args.grid_size,
        per_frame_obstacles=not args.first_frame_obstacles,
        horizon_frames=args.horizon_frames,
    )
    report = {
        "n_samples": n,
        "l2": l2_mean,
        "collision": coll.as_dict(),
        "grid_size": args.grid_size,
        "ego": {"length": ego.length, "width": ego.width},
        "l2_variant": args.l2_variant,
    }
    report_path = os.path.join(out_dir, "eval_report.json")
    _write_json(report_path, report)
    table = _format_rates_table(l2_mean, coll.as_dict())
    table_path = os.path.join(out_dir, "eval_table.txt")
    with open(table_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(table)
    write_manifest(
        out_dir,
        "eval",
        {
            "grid_size": args.grid_size,
            "ego_length": args.ego_length,
            "ego_width": args.ego_width,
            "l2_variant": args.l2_variant,
            "first_frame_obstacles": args.first_frame_obstacles,
            "horizon_frames": args.horizon_frames,
            "seed": args.seed,
        },
        {"dataset": args.dataset, "checkpoint": args.checkpoint},
        {"out_dir": out_dir, "report": report_path, "table": table_path},
    )
    print(table, end="")
    return 0


def cmd_audit(args) -> int:
    out_dir = _ensure_out_dir(args)
    if not os.path.exists(args.dataset):
        raise FileNotFoundError(f"dataset not found: {args.dataset}")
    ds = dataio.load_dataset(args.dataset)
    ego = _ego_spec(args)
    grid_sizes = [float(g) for g in args.grid_sizes.split(",") if g]
    if not grid_sizes:
        raise ValueError("need at least one grid size")
    audit = metrics.audit_gt_collisions(
        ds.samples,
        ego,
        grid_sizes,
        per_frame_obstacles=not args.first_frame_obstacles,
        horizon_frames=args.horizon_frames,
    )
    report_path = os.path.join(out_dir, "audit_report.json")
    _write_json(report_path, audit.as_dict())
    lines = [f"{'grid (m)':>10s} {'collisions':>11s} {'percent':>8s}"]
    for entry in audit.entries:
        lines.append(f"{entry.grid_size:>10.3f} {entry.n_collisions:>11d} {entry.percent:>8.3f}")
    lines.append(f"{'exact':>10s} {audit.exact_collisions:>11d} "
                 f"{100.0 * audit.exact_collisions / max(audit.n_samples, 1):>8.3f}")
    table = "\n".join(lines) + "\n"
    table_path = os.path.join(out_dir, "audit_table.txt")
    with open(table_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(table)
    write_manifest(
        out_dir,
        "audit",
        {
            "grid_sizes": grid_sizes,
            "ego_length": args.ego_length,
            "ego_width": args.ego_width,
            "first_frame_obstacles": args.first_frame_obstacles,
            "horizon_frames": args.horizon_frames,
            "seed": args.seed,
        },
        {"dataset": args.dataset},
        {"out_dir": out_dir, "report": report_path, "table": table_path},
    )
    print(table, end="")
    return 0


def cmd_analyze(args) -> int:
    out_dir = _ensure_out_dir(args)
    if not os.path.exists(args.dataset):
        raise FileNotFoundError(f"dataset not found: {args.dataset}")
    ds = dataio.load_dataset(args.dataset)
    report = analysis.distribution_report(ds, bins=args.bins)
    files = analysis.export_figures(report, out_dir)
    report_path = os.path.join(out_dir, "distribution_report.json")
    _write_json(report_path, report.as_dict())
    write_manifest(
        out_dir,
        "analyze",
        {"bins": args.bins, "seed": args.seed},
        {"dataset": args.dataset},
        {"out_dir": out_dir, "report": report_path, "figures": files},
    )
    print(
        f"heading band fraction {report.heading_band_fraction:.4f}, "
        f"curvature band fraction {report.curvature_band_fraction:.4f}"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out")


def _add_ego(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ego-length", type=float, default=4.08)
    p.add_argument("--ego-width", type=float, default=1.85)


def _add_horizon(p: argparse.ArgumentParser) -> None:
    p.add_argument("--horizon-frames", type=int, default=FUTURE_LEN)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="openloop",
        description="Synthetic driving data, ego-state MLP planner, open-loop metrics",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    _add_common(p)
    _add_ego(p)
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--straight-fraction", type=float, default=0.8)
    p.add_argument("--speed-min", type=float, default=3.0)
    p.add_argument("--speed-max", type=float, default=14.0)
    p.add_argument("--radius-min", type=float, default=12.0)
    p.add_argument("--radius-max", type=float, default=60.0)
    p.add_argument("--obstacle-density", type=float, default=3.0)
    p.add_argument("--clearance-min", type=float, default=1.0)
    p.add_argument("--clearance-max", type=float, default=8.0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the planner")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--lr", type=float, default=4e-6)
    p.add_argument("--weight-decay", type=float, default=1e-2)
    p.add_argument("--epochs", type=int, default=6)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--grid-size", type=float, default=0.5,
                   help="cell size for the loss coincidence re-weighting")
    p.add_argument("--checkpoint-out", default=None,
                   help="checkpoint path (default <out-dir>/checkpoint.json)")
    p.add_argument("--no-velocity", action="store_true")
    p.add_argument("--no-acceleration", action="store_true")
    p.add_argument("--no-command", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="L2 and collision metrics for a checkpoint")
    _add_common(p)
    _add_ego(p)
    _add_horizon(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--grid-size", type=float, default=0.5)
    p.add_argument("--l2-variant", choices=("mean", "endpoint"), default="mean")
    p.add_argument("--first-frame-obstacles", action="store_true",
                   help="use frame-0 obstacles for every horizon")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("audit", help="ground-truth false-collision audit")
    _add_common(p)
    _add_ego(p)
    _add_horizon(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--grid-sizes", default="0.1,0.25,0.5,0.6")
    p.add_argument("--first-frame-obstacles", action="store_true")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("analyze", help="dataset distribution report")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--bins", type=int, default=analysis.DEFAULT_BINS)
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
