"""Acceptance gate: every criterion at its stated tolerance.

Run with `pytest -s tests/test_acceptance.py` to see one PASS line per
criterion.  The full-pipeline and overfit checks dominate the runtime
(a few minutes total on a laptop CPU).
"""

import json
import math
import os
import time

import numpy as np
import pytest

import openloop.model as model_mod
from openloop import cli, dataio
from openloop.core import OrientedBox, Pose2, Trajectory
from openloop.dataio import SyntheticConfig, generate_synthetic, write_dataset
from openloop.geometry import box_distance, penetration_depth
from openloop.metrics import (
    EgoSpec,
    OccupancyGrid,
    audit_gt_collisions,
    collision_at_waypoint,
    collision_rate,
    exact_intersects,
    l2_errors,
    min_clearance,
    rasterized_intersects,
)
from openloop.model import (
    InputMask,
    LossConfig,
    backward,
    encode_input,
    forward,
    forward_raw,
    init_params,
    loss,
    trajectory_to_vector,
)
from openloop.trainer import TrainConfig, train
from conftest import (
    constant_velocity_oracle,
    finite_difference_grads,
    near_miss_scene,
    straight_sample,
)

ABLATION_MASKS = [
    InputMask(True, False, False, False),
    InputMask(True, False, True, False),
    InputMask(True, True, True, False),
    InputMask(True, True, True, True),
]


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {status}: {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def test_gradient_correctness():
    """Analytic gradients vs central finite differences on 20 small nets."""
    t0 = time.monotonic()
    rng = np.random.default_rng(2024)
    worst = 0.0
    checked = 0
    seed = 0
    while checked < 20:
        seed += 1
        mask = ABLATION_MASKS[seed % 4]
        net = init_params(mask=mask, hidden=(8, 8), seed=seed)
        x = rng.uniform(-2.0, 2.0, mask.dim)
        target = rng.uniform(-2.0, 2.0, 18)
        y, caches = model_mod._forward_raw(net, x)
        margin = min(
            np.min(np.abs(y - target)),
            np.min(np.abs(caches[1])),
            np.min(np.abs(caches[3])),
        )
        if margin < 1e-6:  # skip instances near L1 or ReLU kinks
            continue
        backward(net, x, target, LossConfig())
        fd_w, fd_b = finite_difference_grads(net, x, target, LossConfig(), h=1e-5)
        for got, want in zip(net.grad_w + net.grad_b, fd_w + fd_b):
            rel = np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-8))
            worst = max(worst, float(rel))
        checked += 1
    elapsed = time.monotonic() - t0
    report(
        "gradient correctness",
        worst < 1e-4 and elapsed < 10.0,
        f"max rel err {worst:.2e}, {elapsed:.1f}s",
    )


def overfit_dataset():
    return generate_synthetic(
        SyntheticConfig(
            n_samples=64,
            straight_fraction=1.0,
            speed_range=(2.0, 10.0),
            obstacle_density=0.0,
            rng_seed=3,
        )
    )


def test_overfit_and_oracle(tmp_path):
    """64-sample constant-velocity set: overfit below 0.05 m per waypoint."""
    t0 = time.monotonic()
    ds = overfit_dataset()
    net = init_params(seed=0)
    # 16 steps/epoch x 125 epochs = 2000 steps
    cfg = TrainConfig(lr0=1e-3, weight_decay=1e-2, epochs=125, batch_size=4, seed=0)
    log = train(ds, net, cfg)
    assert len(log.losses) == 2000

    plain_l1 = 0.0
    model_l2 = []
    oracle_l2 = []
    for sample in ds.samples:
        x = encode_input(sample, net.mask)
        y = forward_raw(net, x)
        t = trajectory_to_vector(sample.gt_future)
        plain_l1 += float(np.abs(y - t).reshape(6, 3).sum(axis=1).mean())
        model_l2.append(l2_errors(forward(net, x), sample.gt_future).avg)
        oracle_l2.append(l2_errors(constant_velocity_oracle(sample), sample.gt_future).avg)
    plain_l1 /= len(ds)
    oracle_avg = sum(oracle_l2) / len(oracle_l2)
    model_avg = sum(model_l2) / len(model_l2)

    # the same checkpoint through the CLI, on its own training set
    from openloop.model import save_checkpoint

    ds_path = tmp_path / "overfit.jsonl"
    ckpt_path = tmp_path / "overfit_ckpt.json"
    write_dataset(ds, ds_path)
    save_checkpoint(net, ckpt_path)
    eval_dir = tmp_path / "eval"
    assert _run_cli(["eval", "--dataset", ds_path, "--checkpoint", ckpt_path,
                     "--out-dir", eval_dir]) == 0
    table_avg = json.loads((eval_dir / "eval_report.json").read_text())["l2"]["avg"]
    elapsed = time.monotonic() - t0

    ok = (
        plain_l1 < 0.05
        and oracle_avg < 1e-6
        and abs(model_avg - oracle_avg) < 0.1
        and table_avg < 0.05
        and elapsed < 120.0
    )
    report(
        "overfit check",
        ok,
        f"L1 {plain_l1:.4f} m, oracle L2 {oracle_avg:.2e}, model L2 {model_avg:.4f}, "
        f"cli eval avg {table_avg:.4f}, {elapsed:.0f}s",
    )


def test_loss_reweighting():
    """Weight 0.5 exactly when both axes share the absolute 0.5 m bin."""
    def traj(coords):
        return Trajectory(tuple(Pose2(*c) for c in coords))

    # the [1.5, 2.0) segment example
    pred = traj([(1.6, 0.2, 0.0)] * 6)
    gt = traj([(1.9, 0.4, 0.0)] * 6)
    _, w_same = loss(pred, gt)

    # same x bin, different y bin: no down-weight
    gt_other_y = traj([(1.9, 0.6, 0.0)] * 6)
    _, w_diff_y = loss(pred, gt_other_y)

    # different x bin
    gt_other_x = traj([(2.0, 0.2, 0.0)] * 6)
    _, w_diff_x = loss(pred, gt_other_x)

    ok = (
        w_same.tolist() == [0.5] * 6
        and w_diff_y.tolist() == [1.0] * 6
        and w_diff_x.tolist() == [1.0] * 6
    )
    report("loss re-weighting", ok, f"weights {w_same[0]}, {w_diff_y[0]}, {w_diff_x[0]}")


def test_collision_oracle_equivalence():
    """Rasterized collision vs separating-axis test on 1000 random pairs."""
    rng = np.random.default_rng(0)
    g = 0.05
    band = g * math.sqrt(2.0)
    violations = 0
    excluded = 0
    for _ in range(1000):
        a = OrientedBox(
            rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-math.pi, math.pi),
            rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0),
        )
        b = OrientedBox(
            a.cx + rng.uniform(-4, 4), a.cy + rng.uniform(-4, 4),
            rng.uniform(-math.pi, math.pi), rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0),
        )
        exact = exact_intersects(a, b)
        measure = penetration_depth(a, b) if exact else box_distance(a, b)
        if measure <= band:
            excluded += 1
            continue
        if rasterized_intersects(a, b, g) != exact:
            violations += 1
    report(
        "collision oracle equivalence",
        violations == 0,
        f"0 violations required, got {violations} ({excluded} pairs inside the band)",
    )


def test_figure3_phenomenon():
    """Grid-size dependent false collisions on ground-truth trajectories."""
    t0 = time.monotonic()
    sample, obstacle = near_miss_scene()
    ego = EgoSpec()
    clearance = min_clearance(sample, ego)
    scene_ok = abs(clearance - 0.3) < 1e-9
    for g, expected in ((0.1, False), (0.5, True)):
        grid = OccupancyGrid(g)
        grid.add_box(obstacle)
        hit = any(collision_at_waypoint(p, ego, grid) for p in sample.gt_future.waypoints)
        scene_ok = scene_ok and (hit == expected)
    exact_hit = any(
        exact_intersects(ego.box_at(p), obstacle) for p in sample.gt_future.waypoints
    )
    scene_ok = scene_ok and not exact_hit

    suite = generate_synthetic(
        SyntheticConfig(
            n_samples=500,
            straight_fraction=0.4,
            obstacle_density=6.0,
            clearance_range=(0.2, 0.4),
            rng_seed=0,
        )
    )
    audit = audit_gt_collisions(suite.samples, ego, [0.1, 0.25, 0.5, 0.6])
    counts = [e.n_collisions for e in audit.entries]
    suite_ok = (
        all(a <= b for a, b in zip(counts, counts[1:]))
        and counts[-1] > 0
        and audit.exact_collisions == 0
    )
    elapsed = time.monotonic() - t0
    report(
        "figure-3 phenomenon",
        scene_ok and suite_ok and elapsed < 60.0,
        f"scene clearance {clearance:.3f} m, suite counts {counts}, "
        f"exact {audit.exact_collisions}, {elapsed:.0f}s",
    )


def test_metric_unit_suite():
    """Hand-computed L2 values and degenerate collision rates."""
    def traj(coords):
        return Trajectory(tuple(Pose2(*c) for c in coords))

    gt = traj([(k + 1.0, 0.0, 0.0) for k in range(6)])
    ok = True

    e = l2_errors(gt, gt)
    ok &= e.l2_1s == 0.0 and e.l2_2s == 0.0 and e.l2_3s == 0.0 and e.avg == 0.0

    pred = traj([(k + 2.0, 0.0, 0.0) for k in range(6)])
    e = l2_errors(pred, gt)
    ok &= all(abs(v - 1.0) < 1e-12 for v in (e.l2_1s, e.l2_2s, e.l2_3s, e.avg))

    coords = [(k + 1.0, 0.0, 0.0) for k in range(6)]
    coords[5] = (6.0, 0.6, 0.0)
    e = l2_errors(traj(coords), gt)
    ok &= e.l2_1s == 0.0 and e.l2_2s == 0.0
    ok &= abs(e.l2_3s - 0.1) < 1e-12 and abs(e.avg - 0.1 / 3.0) < 1e-12

    clean = [straight_sample(5.0, sample_id=f"c{i}") for i in range(5)]
    r = collision_rate(clean, [s.gt_future for s in clean], EgoSpec())
    ok &= r.as_dict()["avg"] == 0.0

    blocked = [
        straight_sample(5.0, sample_id=f"b{i}", obstacles=[OrientedBox(2.5, 0.0, 0.0, 6.0, 4.0)])
        for i in range(5)
    ]
    r = collision_rate(blocked, [s.gt_future for s in blocked], EgoSpec())
    d = r.as_dict()
    ok &= (d["1s"], d["2s"], d["3s"], d["avg"]) == (100.0, 100.0, 100.0, 100.0)

    report("metric unit suite", bool(ok))


def _run_cli(argv):
    return cli.main([str(a) for a in argv])


def test_determinism(tmp_path):
    """gen/train/eval re-runs with one seed are byte-identical."""
    outputs = {}
    for tag in ("first", "second"):
        root = tmp_path / tag
        gen_dir, train_dir, eval_dir = root / "gen", root / "train", root / "eval"
        assert _run_cli(["gen", "--n-samples", 24, "--seed", 11, "--out-dir", gen_dir,
                         "--obstacle-density", 1.5]) == 0
        assert _run_cli(["train", "--dataset", gen_dir / "dataset.jsonl", "--seed", 11,
                         "--epochs", 2, "--out-dir", train_dir]) == 0
        assert _run_cli(["eval", "--dataset", gen_dir / "dataset.jsonl",
                         "--checkpoint", train_dir / "checkpoint.json",
                         "--seed", 11, "--out-dir", eval_dir]) == 0
        outputs[tag] = {
            "dataset": (gen_dir / "dataset.jsonl").read_bytes(),
            "checkpoint": (train_dir / "checkpoint.json").read_bytes(),
            "train_log": (train_dir / "train_log.csv").read_bytes(),
            "report": (eval_dir / "eval_report.json").read_bytes(),
            "table": (eval_dir / "eval_table.txt").read_bytes(),
        }
    mismatches = [k for k in outputs["first"] if outputs["first"][k] != outputs["second"][k]]
    report("determinism", not mismatches, f"mismatched artifacts: {mismatches or 'none'}")


def test_full_pipeline(tmp_path):
    """gen 5k -> train 6 epochs -> eval -> audit -> analyze under 5 minutes."""
    t0 = time.monotonic()
    gen_dir = tmp_path / "gen"
    train_dir = tmp_path / "train"
    eval_dir = tmp_path / "eval"
    audit_dir = tmp_path / "audit"
    analyze_dir = tmp_path / "analyze"

    assert _run_cli(["gen", "--n-samples", 5000, "--seed", 1, "--out-dir", gen_dir]) == 0
    dataset = gen_dir / "dataset.jsonl"
    assert _run_cli(["train", "--dataset", dataset, "--seed", 1, "--out-dir", train_dir]) == 0
    assert _run_cli(["eval", "--dataset", dataset,
                     "--checkpoint", train_dir / "checkpoint.json",
                     "--out-dir", eval_dir]) == 0
    assert _run_cli(["audit", "--dataset", dataset, "--out-dir", audit_dir]) == 0
    assert _run_cli(["analyze", "--dataset", dataset, "--out-dir", analyze_dir]) == 0

    elapsed = time.monotonic() - t0
    eval_report = json.loads((eval_dir / "eval_report.json").read_text())
    audit_report = json.loads((audit_dir / "audit_report.json").read_text())
    ok = (
        elapsed < 300.0
        and eval_report["n_samples"] == 5000
        and len(audit_report["grid"]) == 4
        and (analyze_dir / "trajectory_points.csv").exists()
    )
    report(
        "full synthetic pipeline",
        ok,
        f"{elapsed:.0f}s, eval avg L2 {eval_report['l2']['avg']:.3f} m, "
        f"collision avg {eval_report['collision']['avg']:.2f}%",
    )


@pytest.mark.skipif(
    "NUSCENES_ROOT" not in os.environ,
    reason="real-data checks need nuScenes plus the CAN bus expansion "
    "(set NUSCENES_ROOT); the exact reference numbers are not reproducible "
    "without the dataset",
)
def test_real_data_references(tmp_path):
    """Exported val split: audit and distribution references within tolerance."""
    nuscenes_export = pytest.importorskip("nuscenes_export")
    from openloop.analysis import distribution_report
    from openloop.dataio import load_dataset

    out = tmp_path / "val.jsonl"
    cfg = nuscenes_export.ExportConfig(
        dataset_root=os.environ["NUSCENES_ROOT"], split="val", output_path=str(out)
    )
    nuscenes_export.export(cfg)
    ds = load_dataset(out)

    audit = audit_gt_collisions(ds.samples, EgoSpec(), [0.5, 0.6])
    by_size = {e.grid_size: e.percent for e in audit.entries}
    assert abs(by_size[0.5] - 2.0) <= 0.5
    assert abs(by_size[0.6] - 3.0) <= 0.5

    rep = distribution_report(ds)
    assert abs(rep.heading_band_fraction - 0.70) <= 0.05
    assert abs(rep.curvature_band_fraction - 0.70) <= 0.05

    net = init_params(seed=0)
    log = train(ds, net, TrainConfig())
    preds = [forward(net, encode_input(s, net.mask)) for s in ds.samples]
    l2_avg = sum(l2_errors(p, s.gt_future).avg for p, s in zip(preds, ds.samples)) / len(ds)
    coll = collision_rate(ds.samples, preds, EgoSpec(), grid_size=0.5)
    assert abs(l2_avg - 0.29) <= 0.08
    assert abs(coll.avg - 0.19) <= 0.15
