"""Sample file format (JSON Lines), validation, and the synthetic generator.

One JSON object per line:

    {"sample_id": str,
     "history": [[x, y, theta] * 4],
     "kinematics": {"vx", "vy", "omega", "ax", "ay", "beta"},
     "command": "left" | "straight" | "right",   # optional, derived if absent
     "gt_future": [[x, y, theta] * 6],
     "obstacles": [[{"cx", "cy", "heading", "length", "width"}, ...] * 6]}

All numbers are SI units (meters, seconds, radians), UTF-8, LF line endings.

The generator emits constant-speed straight lines and constant-curvature
arcs with exact kinematic rollouts, plus static obstacles placed at a
controlled gap from the ego's future footprint.  Identical configs produce
byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from openloop.core import (
    FUTURE_LEN,
    HISTORY_LEN,
    STEP_SECONDS,
    Command,
    EgoSample,
    Kinematics,
    OrientedBox,
    Pose2,
    Trajectory,
    derive_command,
)
from openloop.geometry import box_distance
from openloop.metrics import EgoSpec

# Turn samples are drawn so the 3 s waypoint clears the command threshold and
# the 3 s heading clears the +-0.2 rad band with a small margin; this keeps
# the straight fraction equal to the command and band fractions.
_MIN_TURN_HEADING = 0.21
_MIN_TURN_LATERAL = 2.05
_MAX_CLEARANCE = 30.0  # obstacles farther out would leave the BEV window


@dataclass(frozen=True)
class SyntheticConfig:
    """Scenario generator knobs.  Same config and seed, same bytes out."""

    n_samples: int
    straight_fraction: float = 0.8
    speed_range: tuple[float, float] = (3.0, 14.0)
    turn_radius_range: tuple[float, float] = (12.0, 60.0)
    obstacle_density: float = 3.0
    clearance_range: tuple[float, float] = (1.0, 8.0)
    ego_length: float = 4.08
    ego_width: float = 1.85
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 0:
            raise ValueError(f"n_samples must be >= 0, got {self.n_samples}")
        if not 0.0 <= self.straight_fraction <= 1.0:
            raise ValueError(f"straight_fraction must be in [0, 1], got {self.straight_fraction}")
        for name in ("speed_range", "turn_radius_range", "clearance_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ValueError(f"{name} must be a nonempty interval, got ({lo}, {hi})")
        if self.speed_range[0] <= 0.0:
            raise ValueError(f"speeds must be positive, got {self.speed_range}")
        if self.turn_radius_range[0] <= 0.0:
            raise ValueError(f"turn radii must be positive, got {self.turn_radius_range}")
        if self.clearance_range[0] < 0.0:
            raise ValueError(f"clearance must be >= 0, got {self.clearance_range}")
        if self.clearance_range[1] > _MAX_CLEARANCE:
            raise ValueError(
                f"clearance_range upper bound {self.clearance_range[1]} exceeds the "
                f"scene extent ({_MAX_CLEARANCE} m)"
            )
        if self.obstacle_density < 0.0:
            raise ValueError(f"obstacle_density must be >= 0, got {self.obstacle_density}")
        if self.ego_length <= 0.0 or self.ego_width <= 0.0:
            raise ValueError("ego dimensions must be positive")


@dataclass(frozen=True)
class Dataset:
    samples: tuple[EgoSample, ...]
    split_tag: str = "synthetic"

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        seen = set()
        for s in self.samples:
            if s.sample_id in seen:
                raise ValueError(f"duplicate sample_id {s.sample_id!r}")
            seen.add(s.sample_id)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


# ---------------------------------------------------------------------------
# JSONL serialization


def _pose_to_list(p: Pose2) -> list[float]:
    return [p.x, p.y, p.theta]


def sample_to_obj(sample: EgoSample) -> dict:
    k = sample.kinematics
    return {
        "sample_id": sample.sample_id,
        "history": [_pose_to_list(p) for p in sample.history],
        "kinematics": {
            "vx": k.vx, "vy": k.vy, "omega": k.omega,
            "ax": k.ax, "ay": k.ay, "beta": k.beta,
        },
        "command": sample.command.value,
        "gt_future": [_pose_to_list(p) for p in sample.gt_future],
        "obstacles": [
            [
                {"cx": b.cx, "cy": b.cy, "heading": b.heading,
                 "length": b.length, "width": b.width}
                for b in frame
            ]
            for frame in sample.obstacles
        ],
    }


def _require(obj: dict, key: str, sid: str):
    if key not in obj:
        raise ValueError(f"sample {sid}: missing field {key!r}")
    return obj[key]


def sample_from_obj(obj: dict) -> EgoSample:
    if "sample_id" not in obj:
        raise ValueError("missing field 'sample_id'")
    sid = str(obj["sample_id"])
    try:
        history = Trajectory(tuple(Pose2(*p) for p in _require(obj, "history", sid)))
        kin_obj = _require(obj, "kinematics", sid)
        kinematics = Kinematics(
            **{k: _require(kin_obj, k, sid) for k in ("vx", "vy", "omega", "ax", "ay", "beta")}
        )
        gt_future = Trajectory(tuple(Pose2(*p) for p in _require(obj, "gt_future", sid)))
        obstacles = tuple(
            tuple(
                OrientedBox(b["cx"], b["cy"], b["heading"], b["length"], b["width"])
                for b in frame
            )
            for frame in _require(obj, "obstacles", sid)
        )
    except (TypeError, KeyError) as exc:
        raise ValueError(f"sample {sid}: malformed field ({exc})") from exc
    if "command" in obj and obj["command"] is not None:
        command = Command.from_label(obj["command"])
    else:
        command = derive_command(gt_future)
    return EgoSample(
        sample_id=sid,
        history=history,
        kinematics=kinematics,
        command=command,
        gt_future=gt_future,
        obstacles=obstacles,
    )


def write_dataset(ds: Dataset, path) -> None:
    """Write one sample per line; output bytes are a pure function of ds."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for sample in ds.samples:
            f.write(json.dumps(sample_to_obj(sample), separators=(",", ":")))
            f.write("\n")


def load_dataset(path, split_tag: str | None = None) -> Dataset:
    """Load and validate a JSONL dataset.

    Errors carry the line number; samples without a command get one derived
    from the future trajectory.
    """
    samples = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            try:
                samples.append(sample_from_obj(obj))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return Dataset(samples=tuple(samples), split_tag=split_tag or "synthetic")


# ---------------------------------------------------------------------------
# Synthetic generation


def _rollout_pose(v: float, omega: float, t: float) -> Pose2:
    """Constant-speed unicycle pose at time t, starting from the origin."""
    if omega == 0.0:
        return Pose2(v * t, 0.0, 0.0)
    r = v / omega
    return Pose2(r * math.sin(omega * t), r * (1.0 - math.cos(omega * t)), omega * t)


def _draw_motion(rng: np.random.Generator, cfg: SyntheticConfig) -> tuple[float, float]:
    """Speed and yaw rate; turns clear the command and heading-band margins."""
    if rng.random() < cfg.straight_fraction:
        return float(rng.uniform(*cfg.speed_range)), 0.0
    horizon = FUTURE_LEN * STEP_SECONDS
    for _ in range(500):
        v = float(rng.uniform(*cfg.speed_range))
        radius = float(rng.uniform(*cfg.turn_radius_range))
        side = 1.0 if rng.random() < 0.5 else -1.0
        omega = side * v / radius
        final = _rollout_pose(v, omega, horizon)
        if abs(omega) * horizon > _MIN_TURN_HEADING and abs(final.y) > _MIN_TURN_LATERAL:
            return v, omega
    raise ValueError(
        "speed_range and turn_radius_range cannot produce turns that clear the "
        "2 m command threshold within 3 s"
    )


def _draw_obstacle_dims(rng: np.random.Generator) -> tuple[float, float]:
    if rng.random() < 0.7:  # vehicle
        return float(rng.uniform(3.6, 5.0)), float(rng.uniform(1.6, 2.1))
    side = float(rng.uniform(0.5, 0.8))  # pedestrian
    return side, side


def _contact_offset(base: OrientedBox, direction: tuple[float, float], target: OrientedBox) -> float:
    """Largest offset along direction at which base still touches target.

    Parametric separating-axis computation: each axis constrains the offset
    to an interval; the boxes overlap on the intersection of those
    intervals.  Returns -inf when the translated box never meets the target.
    """
    nxv, nyv = direction
    o_lo, o_hi = -math.inf, math.inf
    base_corners = base.corners()
    target_corners = target.corners()
    for box in (base, target):
        c, s = math.cos(box.heading), math.sin(box.heading)
        for ax, ay in ((c, s), (-s, c)):
            lo_b = min(ax * x + ay * y for x, y in base_corners)
            hi_b = max(ax * x + ay * y for x, y in base_corners)
            lo_t = min(ax * x + ay * y for x, y in target_corners)
            hi_t = max(ax * x + ay * y for x, y in target_corners)
            slide = ax * nxv + ay * nyv
            if abs(slide) < 1e-12:
                if hi_b < lo_t or hi_t < lo_b:
                    return -math.inf
                continue
            # need lo_b + o*slide <= hi_t and lo_t <= hi_b + o*slide
            bounds = sorted(((hi_t - lo_b) / slide, (lo_t - hi_b) / slide))
            o_lo = max(o_lo, bounds[0])
            o_hi = min(o_hi, bounds[1])
    return o_hi if o_hi >= o_lo else -math.inf


def _place_obstacle(
    rng: np.random.Generator,
    ego_boxes: list[OrientedBox],
    clearance: float,
    dims: tuple[float, float],
) -> OrientedBox | None:
    """Box whose gap to the nearest future ego footprint equals clearance."""
    k = int(rng.integers(0, len(ego_boxes)))
    anchor = ego_boxes[k]
    side = 1.0 if rng.random() < 0.5 else -1.0
    nxv = -math.sin(anchor.heading) * side
    nyv = math.cos(anchor.heading) * side
    heading = float(rng.uniform(-math.pi, math.pi))
    length, width = dims
    radius = 0.5 * math.hypot(length, width)
    ego_radii = [0.5 * math.hypot(eb.length, eb.width) for eb in ego_boxes]

    def box_at(offset: float) -> OrientedBox:
        return OrientedBox(
            anchor.cx + nxv * offset, anchor.cy + nyv * offset, heading, length, width
        )

    def gap(offset: float) -> float:
        box = box_at(offset)
        best = math.inf
        # circumradius prune, nearest ego boxes first
        order = sorted(
            range(len(ego_boxes)),
            key=lambda i: math.hypot(box.cx - ego_boxes[i].cx, box.cy - ego_boxes[i].cy),
        )
        for i in order:
            eb = ego_boxes[i]
            lower = math.hypot(box.cx - eb.cx, box.cy - eb.cy) - radius - ego_radii[i]
            if lower >= best:
                continue
            best = min(best, box_distance(box, eb))
        return best

    base = box_at(0.0)
    contact = max(_contact_offset(base, (nxv, nyv), eb) for eb in ego_boxes)
    if not math.isfinite(contact):
        return None
    # secant refinement: gap is continuous, nondecreasing, slope <= 1 past contact
    prev_o, prev_d = contact, 0.0
    offset = contact + clearance
    for _ in range(60):
        d = gap(offset)
        if abs(d - clearance) < 1e-9:
            break
        slope = (d - prev_d) / (offset - prev_o) if offset > prev_o else 1.0
        slope = min(max(slope, 1e-3), 1.0)
        prev_o, prev_d = offset, d
        offset = max(offset + (clearance - d) / slope, contact + 1e-12)
    else:
        return None
    box = box_at(offset)
    if abs(box.cx) > 58.0 or abs(box.cy) > 38.0:
        return None
    return box


def generate_synthetic(cfg: SyntheticConfig) -> Dataset:
    """Deterministic synthetic dataset per the config contract."""
    rng = np.random.default_rng(cfg.rng_seed)
    ego = EgoSpec(cfg.ego_length, cfg.ego_width)
    samples = []
    for i in range(cfg.n_samples):
        v, omega = _draw_motion(rng, cfg)
        history = Trajectory(
            tuple(
                _rollout_pose(v, omega, (k - (HISTORY_LEN - 1)) * STEP_SECONDS)
                for k in range(HISTORY_LEN)
            )
        )
        gt_future = Trajectory(
            tuple(_rollout_pose(v, omega, (k + 1) * STEP_SECONDS) for k in range(FUTURE_LEN))
        )
        kinematics = Kinematics(vx=v, vy=0.0, omega=omega, ax=0.0, ay=v * omega, beta=0.0)
        ego_boxes = [ego.box_at(p) for p in gt_future.waypoints]

        n_obstacles = int(rng.poisson(cfg.obstacle_density))
        boxes = []
        for _ in range(n_obstacles):
            placed = None
            for _ in range(50):
                clearance = float(rng.uniform(*cfg.clearance_range))
                placed = _place_obstacle(rng, ego_boxes, clearance, _draw_obstacle_dims(rng))
                if placed is not None:
                    break
            if placed is None:
                raise ValueError(
                    f"could not place an obstacle at clearance_range={cfg.clearance_range}; "
                    "config is infeasible for the scene extent"
                )
            boxes.append(placed)
        frame = tuple(boxes)

        samples.append(
            EgoSample(
                sample_id=f"syn-{i:06d}",
                history=history,
                kinematics=kinematics,
                command=derive_command(gt_future),
                gt_future=gt_future,
                obstacles=(frame,) * FUTURE_LEN,  # static obstacles
            )
        )
    return Dataset(samples=tuple(samples), split_tag="synthetic")
