"""Three-layer perceptron planner: encoding, forward, L1 loss, backprop.

The planner maps a flat ego-state vector to 18 outputs, reshaped to six
future (x, y, theta) waypoints.  The full input is 21-dimensional: 4 history
poses (12), velocity triple (3), acceleration triple (3), one-hot command
(3); input groups can be masked out for ablations, trajectory history
always stays on.

The training loss is a mean per-waypoint L1.  Waypoints whose predicted
(x, y) falls in the same absolute grid cell as the ground truth (0.5 m bins
aligned at zero, e.g. [1.5, 2.0)) are down-weighted, by 0.5 by default.
All arithmetic is float64.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from openloop.core import FUTURE_LEN, EgoSample, Pose2, Trajectory

HIDDEN_WIDTH = 512
OUTPUT_DIM = FUTURE_LEN * 3


@dataclass(frozen=True)
class InputMask:
    """Which input groups feed the planner."""

    use_trajectory: bool = True
    use_velocity: bool = True
    use_acceleration: bool = True
    use_command: bool = True

    def __post_init__(self) -> None:
        if not (self.use_trajectory or self.use_velocity or self.use_acceleration or self.use_command):
            raise ValueError("input mask must enable at least one group")

    @property
    def dim(self) -> int:
        return (
            12 * self.use_trajectory
            + 3 * self.use_velocity
            + 3 * self.use_acceleration
            + 3 * self.use_command
        )


@dataclass(frozen=True)
class LossConfig:
    grid_size: float = 0.5
    coincident_weight: float = 0.5

    def __post_init__(self) -> None:
        if self.grid_size <= 0.0:
            raise ValueError(f"grid_size must be positive, got {self.grid_size}")
        if not 0.0 < self.coincident_weight <= 1.0:
            raise ValueError(
                f"coincident_weight must be in (0, 1], got {self.coincident_weight}"
            )


class Mlp:
    """Parameters plus gradient buffers; float64 throughout."""

    def __init__(self, sizes: list[int], mask: InputMask, seed: int,
                 weights: list[np.ndarray], biases: list[np.ndarray]):
        if sizes[0] != mask.dim:
            raise ValueError(f"input size {sizes[0]} does not match mask dim {mask.dim}")
        if sizes[-1] != OUTPUT_DIM:
            raise ValueError(f"output size must be {OUTPUT_DIM}, got {sizes[-1]}")
        self.sizes = list(sizes)
        self.mask = mask
        self.seed = int(seed)
        self.weights = weights
        self.biases = biases
        self.grad_w = [np.zeros_like(w) for w in weights]
        self.grad_b = [np.zeros_like(b) for b in biases]

    @property
    def d_in(self) -> int:
        return self.sizes[0]

    def zero_grad(self) -> None:
        for g in self.grad_w:
            g.fill(0.0)
        for g in self.grad_b:
            g.fill(0.0)

    def params_equal(self, other: "Mlp") -> bool:
        return (
            self.sizes == other.sizes
            and self.mask == other.mask
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )


def init_params(mask: InputMask = InputMask(), hidden: tuple[int, ...] = (HIDDEN_WIDTH, HIDDEN_WIDTH),
                seed: int = 0) -> Mlp:
    """Weights uniform in +-1/sqrt(fan_in), biases zero, deterministic in seed."""
    sizes = [mask.dim, *hidden, OUTPUT_DIM]
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(sizes, mask, seed, weights, biases)


def encode_input(sample: EgoSample, mask: InputMask) -> np.ndarray:
    """Flat feature vector in fixed order: history, velocity, accel, command."""
    parts = []
    if mask.use_trajectory:
        for p in sample.history.waypoints:
            parts.extend((p.x, p.y, p.theta))
    k = sample.kinematics
    if mask.use_velocity:
        parts.extend((k.vx, k.vy, k.omega))
    if mask.use_acceleration:
        parts.extend((k.ax, k.ay, k.beta))
    if mask.use_command:
        parts.extend(sample.command.one_hot())
    return np.array(parts, dtype=np.float64)


def _forward_raw(net: Mlp, x: np.ndarray):
    z1 = net.weights[0] @ x + net.biases[0]
    a1 = np.maximum(z1, 0.0)
    z2 = net.weights[1] @ a1 + net.biases[1]
    a2 = np.maximum(z2, 0.0)
    y = net.weights[2] @ a2 + net.biases[2]
    return y, (x, z1, a1, z2, a2)


def forward_raw(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Raw 18-component output for a d_in-dimensional input."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.d_in,):
        raise ValueError(f"input shape {x.shape} does not match d_in={net.d_in}")
    y, _ = _forward_raw(net, x)
    return y


def forward(net: Mlp, x: np.ndarray) -> Trajectory:
    """Predicted future trajectory: 6 poses of (x, y, theta)."""
    y = forward_raw(net, x)
    poses = tuple(Pose2(y[3 * k], y[3 * k + 1], y[3 * k + 2]) for k in range(FUTURE_LEN))
    return Trajectory(poses)


def trajectory_to_vector(traj: Trajectory) -> np.ndarray:
    out = np.empty(3 * len(traj.waypoints))
    for k, p in enumerate(traj.waypoints):
        out[3 * k : 3 * k + 3] = (p.x, p.y, p.theta)
    return out


def coincidence_weights(pred: np.ndarray, gt: np.ndarray, cfg: LossConfig) -> np.ndarray:
    """Per-waypoint weights: cfg.coincident_weight where pred and gt share the
    same absolute grid cell in both x and y, 1 elsewhere."""
    n = pred.size // 3
    w = np.ones(n)
    g = cfg.grid_size
    for i in range(n):
        same_x = math.floor(pred[3 * i] / g) == math.floor(gt[3 * i] / g)
        same_y = math.floor(pred[3 * i + 1] / g) == math.floor(gt[3 * i + 1] / g)
        if same_x and same_y:
            w[i] = cfg.coincident_weight
    return w


def loss_raw(pred: np.ndarray, gt: np.ndarray, cfg: LossConfig) -> tuple[float, np.ndarray]:
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    n = pred.size // 3
    w = coincidence_weights(pred, gt, cfg)
    per_waypoint = np.abs(pred - gt).reshape(n, 3).sum(axis=1)
    return float((w * per_waypoint).sum() / n), w


def loss(pred: Trajectory, gt: Trajectory, cfg: LossConfig = LossConfig()) -> tuple[float, np.ndarray]:
    """Re-weighted mean per-waypoint L1 between two trajectories.

    Returns the scalar loss and the per-waypoint weights for inspection.
    """
    if len(pred) != len(gt):
        raise ValueError(f"trajectory lengths differ: {len(pred)} vs {len(gt)}")
    return loss_raw(trajectory_to_vector(pred), trajectory_to_vector(gt), cfg)


def backward(net: Mlp, x: np.ndarray, gt: Trajectory | np.ndarray,
             cfg: LossConfig = LossConfig(), accumulate: bool = False) -> tuple[float, np.ndarray]:
    """Backprop of the re-weighted L1 loss into the net's gradient buffers.

    The coincidence weights are treated as constants and the L1 subgradient
    at zero is zero.  Returns the loss and the weights.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.d_in,):
        raise ValueError(f"input shape {x.shape} does not match d_in={net.d_in}")
    t = gt if isinstance(gt, np.ndarray) else trajectory_to_vector(gt)
    if t.shape != (OUTPUT_DIM,):
        raise ValueError(f"target shape {t.shape}, expected ({OUTPUT_DIM},)")
    y, (x0, z1, a1, z2, a2) = _forward_raw(net, x)
    value, w = loss_raw(y, t, cfg)

    n = OUTPUT_DIM // 3
    dy = np.sign(y - t) * np.repeat(w, 3) / n
    if not accumulate:
        net.zero_grad()
    net.grad_w[2] += np.outer(dy, a2)
    net.grad_b[2] += dy
    da2 = net.weights[2].T @ dy
    dz2 = da2 * (z2 > 0.0)
    net.grad_w[1] += np.outer(dz2, a1)
    net.grad_b[1] += dz2
    da1 = net.weights[1].T @ dz2
    dz1 = da1 * (z1 > 0.0)
    net.grad_w[0] += np.outer(dz1, x0)
    net.grad_b[0] += dz1
    return value, w


# ---------------------------------------------------------------------------
# Checkpoints

CHECKPOINT_VERSION = 1


def save_checkpoint(net: Mlp, path) -> None:
    """JSON checkpoint; floats round-trip bit-for-bit."""
    blob = {
        "format_version": CHECKPOINT_VERSION,
        "sizes": net.sizes,
        "mask": {
            "use_trajectory": net.mask.use_trajectory,
            "use_velocity": net.mask.use_velocity,
            "use_acceleration": net.mask.use_acceleration,
            "use_command": net.mask.use_command,
        },
        "seed": net.seed,
        "layers": [
            {"weight": w.tolist(), "bias": b.tolist()}
            for w, b in zip(net.weights, net.biases)
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(blob, f, separators=(",", ":"))
        f.write("\n")


def load_checkpoint(path) -> Mlp:
    with open(path, "r", encoding="utf-8") as f:
        blob = json.load(f)
    version = blob.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    mask = InputMask(**blob["mask"])
    weights = [np.array(layer["weight"], dtype=np.float64) for layer in blob["layers"]]
    biases = [np.array(layer["bias"], dtype=np.float64) for layer in blob["layers"]]
    return Mlp(blob["sizes"], mask, blob["seed"], weights, biases)
