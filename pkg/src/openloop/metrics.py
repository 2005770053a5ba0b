"""Open-loop evaluation stack: L2 error, occupancy-grid collisions, GT audit.

Collision checking mirrors the common BEV occupancy pipeline: obstacle boxes
are projected onto a raster and the ego footprint is placed at each predicted
waypoint.  Projection quantizes a box's center to the center of its grid
cell before rasterizing, which is where precision is lost: two boxes that
never overlap can share a cell once both placements are quantized.  The
bounds are those of the cell diagonal: a pair separated by more than
grid_size * sqrt(2) can never falsely collide, and a pair whose intersection
contains a disc of radius grid_size * sqrt(2) is always detected.
`exact_intersects` is the quantization-free geometric reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from openloop.core import FUTURE_LEN, OrientedBox, Pose2, Trajectory
from openloop.geometry import box_distance, sat_intersects

# BEV window around the current ego pose, in meters: generous enough for a
# 3 s horizon at legal speeds.  Obstacles outside are clipped.
DEFAULT_EXTENT = (-20.0, 60.0, -40.0, 40.0)

HORIZON_SECONDS = (1.0, 2.0, 3.0)


@dataclass(frozen=True)
class EgoSpec:
    """Ego footprint used for collision checks (meters)."""

    length: float = 4.08
    width: float = 1.85

    def __post_init__(self) -> None:
        if self.length <= 0.0 or self.width <= 0.0:
            raise ValueError(f"ego dimensions must be positive, got {self.length} x {self.width}")

    def box_at(self, pose: Pose2) -> OrientedBox:
        return OrientedBox(pose.x, pose.y, pose.theta, self.length, self.width)


class OccupancyGrid:
    """Binary BEV raster.

    Cell (i, j) covers [x_min + i*g, x_min + (i+1)*g) x [y_min + j*g,
    y_min + (j+1)*g).  The nominal extent is expanded outward to a whole
    number of cells when it is not an exact multiple of the grid size.
    """

    def __init__(self, grid_size: float, extent: tuple[float, float, float, float] = DEFAULT_EXTENT):
        if grid_size <= 0.0:
            raise ValueError(f"grid_size must be positive, got {grid_size}")
        x_min, x_max, y_min, y_max = extent
        if x_max <= x_min or y_max <= y_min:
            raise ValueError(f"bad extent {extent}")
        self.grid_size = float(grid_size)
        nx = int(math.ceil((x_max - x_min) / grid_size - 1e-9))
        ny = int(math.ceil((y_max - y_min) / grid_size - 1e-9))
        self.x_min = float(x_min)
        self.y_min = float(y_min)
        self.x_max = self.x_min + nx * self.grid_size
        self.y_max = self.y_min + ny * self.grid_size
        self.nx = nx
        self.ny = ny
        self.cells = np.zeros((nx, ny), dtype=bool)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    def cell_index(self, x: float, y: float) -> tuple[int, int]:
        """Indices of the cell containing the point (may lie off the raster)."""
        return (
            int(math.floor((x - self.x_min) / self.grid_size)),
            int(math.floor((y - self.y_min) / self.grid_size)),
        )

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (
            self.x_min + (i + 0.5) * self.grid_size,
            self.y_min + (j + 0.5) * self.grid_size,
        )

    def snap(self, x: float, y: float) -> tuple[float, float]:
        """Center of the cell containing the point (defined off-raster too)."""
        return self.cell_center(*self.cell_index(x, y))

    def snap_box(self, box: OrientedBox) -> OrientedBox:
        sx, sy = self.snap(box.cx, box.cy)
        return OrientedBox(sx, sy, box.heading, box.length, box.width)

    def add_box(self, box: OrientedBox, snap: bool = True) -> None:
        """Mark the cells covered by a box, quantizing its placement by default."""
        placed = self.snap_box(box) if snap else box
        ii, jj = _raster_indices(placed, self)
        if ii.size:
            self.cells[ii, jj] = True

    @classmethod
    def from_boxes(
        cls,
        boxes,
        grid_size: float,
        extent: tuple[float, float, float, float] = DEFAULT_EXTENT,
        snap: bool = True,
    ) -> "OccupancyGrid":
        grid = cls(grid_size, extent)
        for box in boxes:
            grid.add_box(box, snap=snap)
        return grid


def _raster_indices(box: OrientedBox, grid: OccupancyGrid) -> tuple[np.ndarray, np.ndarray]:
    """Grid indices of cells whose centers lie inside or on the box boundary."""
    xs = [c[0] for c in box.corners()]
    ys = [c[1] for c in box.corners()]
    i_lo = max(0, int(math.floor((min(xs) - grid.x_min) / grid.grid_size)) - 1)
    i_hi = min(grid.nx - 1, int(math.floor((max(xs) - grid.x_min) / grid.grid_size)) + 1)
    j_lo = max(0, int(math.floor((min(ys) - grid.y_min) / grid.grid_size)) - 1)
    j_hi = min(grid.ny - 1, int(math.floor((max(ys) - grid.y_min) / grid.grid_size)) + 1)
    if i_lo > i_hi or j_lo > j_hi:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    i_range = np.arange(i_lo, i_hi + 1)
    j_range = np.arange(j_lo, j_hi + 1)
    cx_vals = grid.x_min + (i_range + 0.5) * grid.grid_size
    cy_vals = grid.y_min + (j_range + 0.5) * grid.grid_size
    px = cx_vals[:, None] - box.cx
    py = cy_vals[None, :] - box.cy
    c, s = math.cos(box.heading), math.sin(box.heading)
    u = c * px + s * py
    v = -s * px + c * py
    mask = (np.abs(u) <= 0.5 * box.length) & (np.abs(v) <= 0.5 * box.width)
    ii, jj = np.nonzero(mask)
    return i_range[ii], j_range[jj]


def rasterize_box(box: OrientedBox, grid: OccupancyGrid) -> set[tuple[int, int]]:
    """Cells whose centers fall inside or on the boundary of the box.

    Pure geometry: no placement quantization happens here.
    """
    ii, jj = _raster_indices(box, grid)
    return set(zip(ii.tolist(), jj.tolist()))


def exact_intersects(a: OrientedBox, b: OrientedBox) -> bool:
    """Quantization-free overlap test (separating axis, touching counts)."""
    return sat_intersects(a, b)


def collision_at_waypoint(pose: Pose2, ego: EgoSpec, grid: OccupancyGrid, snap: bool = True) -> bool:
    """True if the ego footprint placed at the waypoint hits an occupied cell.

    The footprint keeps the waypoint heading but its center is quantized to
    the center of the waypoint's cell, matching how the obstacle boxes were
    projected onto the raster.
    """
    box = ego.box_at(pose)
    if snap:
        box = grid.snap_box(box)
    ii, jj = _raster_indices(box, grid)
    if not ii.size:
        return False
    return bool(grid.cells[ii, jj].any())


def rasterized_intersects(a: OrientedBox, b: OrientedBox, grid_size: float) -> bool:
    """Grid-based overlap of two boxes at the given resolution.

    Builds a local raster aligned to absolute multiples of the grid size and
    covering both boxes, projects one box as the occupancy and places the
    other like an ego footprint.
    """
    xs = [c[0] for c in a.corners() + b.corners()]
    ys = [c[1] for c in a.corners() + b.corners()]
    pad = 2.0 * grid_size
    x_min = math.floor((min(xs) - pad) / grid_size) * grid_size
    y_min = math.floor((min(ys) - pad) / grid_size) * grid_size
    x_max = math.ceil((max(xs) + pad) / grid_size) * grid_size
    y_max = math.ceil((max(ys) + pad) / grid_size) * grid_size
    grid = OccupancyGrid(grid_size, (x_min, x_max, y_min, y_max))
    grid.add_box(b, snap=True)
    snapped = grid.snap_box(a)
    ii, jj = _raster_indices(snapped, grid)
    if not ii.size:
        return False
    return bool(grid.cells[ii, jj].any())


@dataclass(frozen=True)
class L2Errors:
    """Mean Euclidean displacement within each horizon, in meters."""

    l2_1s: float
    l2_2s: float
    l2_3s: float

    @property
    def avg(self) -> float:
        return (self.l2_1s + self.l2_2s + self.l2_3s) / 3.0

    def as_dict(self) -> dict:
        return {"1s": self.l2_1s, "2s": self.l2_2s, "3s": self.l2_3s, "avg": self.avg}


def l2_errors(pred: Trajectory, gt: Trajectory, variant: str = "mean") -> L2Errors:
    """Per-horizon L2 error between two 6-waypoint trajectories.

    variant "mean" averages the displacement over all waypoints up to the
    horizon; "endpoint" takes the displacement at the horizon waypoint only.
    Headings are ignored.
    """
    if len(pred) != len(gt):
        raise ValueError(f"trajectory lengths differ: {len(pred)} vs {len(gt)}")
    if variant not in ("mean", "endpoint"):
        raise ValueError(f"unknown l2 variant {variant!r}")
    dists = [
        math.hypot(p.x - g.x, p.y - g.y) for p, g in zip(pred.waypoints, gt.waypoints)
    ]
    values = []
    for horizon in HORIZON_SECONDS:
        n = min(len(dists), int(round(horizon / pred.period)))
        if n == 0:
            raise ValueError(f"no waypoints within the {horizon} s horizon")
        if variant == "mean":
            values.append(sum(dists[:n]) / n)
        else:
            values.append(dists[n - 1])
    return L2Errors(*values)


@dataclass
class CollisionReport:
    """Per-sample collision flags and aggregate rates in percent."""

    flags: list[tuple[bool, bool, bool]] = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return len(self.flags)

    def rate(self, horizon_index: int) -> float:
        if not self.flags:
            return 0.0
        return 100.0 * sum(f[horizon_index] for f in self.flags) / len(self.flags)

    @property
    def avg(self) -> float:
        return (self.rate(0) + self.rate(1) + self.rate(2)) / 3.0

    def as_dict(self) -> dict:
        return {
            "1s": self.rate(0),
            "2s": self.rate(1),
            "3s": self.rate(2),
            "avg": self.avg,
            "n_samples": self.n_samples,
        }


def _frame_grids(sample, grid_size, extent, per_frame_obstacles):
    """One occupancy grid per future frame for a sample."""
    if per_frame_obstacles:
        frames = sample.obstacles
    else:
        frames = (sample.obstacles[0],) * len(sample.obstacles)
    return [OccupancyGrid.from_boxes(frame, grid_size, extent) for frame in frames]


def _horizon_flags(traj: Trajectory, ego: EgoSpec, grids, horizon_frames: int) -> tuple[bool, bool, bool]:
    """Any-collision flags at the 1 s / 2 s / 3 s horizons."""
    n = min(horizon_frames, len(traj.waypoints), len(grids))
    hit = [False] * n
    for k in range(n):
        hit[k] = collision_at_waypoint(traj.waypoints[k], ego, grids[k])
    flags = []
    for horizon in HORIZON_SECONDS:
        upto = min(n, int(round(horizon / traj.period)))
        flags.append(any(hit[:upto]))
    return tuple(flags)


def collision_rate(
    samples,
    trajectories,
    ego: EgoSpec,
    grid_size: float = 0.5,
    extent: tuple[float, float, float, float] = DEFAULT_EXTENT,
    per_frame_obstacles: bool = True,
    horizon_frames: int = FUTURE_LEN,
) -> CollisionReport:
    """Collision rate of predicted trajectories against per-frame occupancy.

    A sample collides at horizon h when the ego footprint hits an occupied
    cell at any waypoint up to h.  Rates are percentages of samples.
    """
    samples = list(samples)
    trajectories = list(trajectories)
    if len(samples) != len(trajectories):
        raise ValueError(
            f"got {len(trajectories)} trajectories for {len(samples)} samples"
        )
    report = CollisionReport()
    for sample, traj in zip(samples, trajectories):
        grids = _frame_grids(sample, grid_size, extent, per_frame_obstacles)
        report.flags.append(_horizon_flags(traj, ego, grids, horizon_frames))
    return report


@dataclass
class GtAuditEntry:
    grid_size: float
    n_collisions: int
    percent: float


@dataclass
class GtAudit:
    """False-collision audit of ground-truth trajectories across grid sizes."""

    n_samples: int
    entries: list[GtAuditEntry]
    exact_collisions: int  # geometric reference, no rasterization

    def as_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "exact_collisions": self.exact_collisions,
            "grid": [
                {"grid_size": e.grid_size, "collisions": e.n_collisions, "percent": e.percent}
                for e in self.entries
            ],
        }


def exact_gt_collision(sample, ego: EgoSpec, horizon_frames: int = FUTURE_LEN) -> bool:
    """Whether the GT trajectory geometrically overlaps any obstacle box."""
    n = min(horizon_frames, len(sample.gt_future.waypoints))
    for k in range(n):
        ego_box = ego.box_at(sample.gt_future.waypoints[k])
        for obstacle in sample.obstacles[k]:
            if exact_intersects(ego_box, obstacle):
                return True
    return False


def audit_gt_collisions(
    samples,
    ego: EgoSpec,
    grid_sizes,
    extent: tuple[float, float, float, float] = DEFAULT_EXTENT,
    per_frame_obstacles: bool = True,
    horizon_frames: int = FUTURE_LEN,
) -> GtAudit:
    """Count samples whose GT trajectory collides on the raster, per grid size.

    Also reports the exact-geometry collision count so raster artifacts can
    be told apart from real overlaps.
    """
    samples = list(samples)
    entries = []
    for g in grid_sizes:
        n_coll = 0
        for sample in samples:
            grids = _frame_grids(sample, g, extent, per_frame_obstacles)
            flags = _horizon_flags(sample.gt_future, ego, grids, horizon_frames)
            if any(flags):
                n_coll += 1
        pct = 100.0 * n_coll / len(samples) if samples else 0.0
        entries.append(GtAuditEntry(grid_size=float(g), n_collisions=n_coll, percent=pct))
    exact = sum(exact_gt_collision(s, ego, horizon_frames) for s in samples)
    return GtAudit(n_samples=len(samples), entries=entries, exact_collisions=int(exact))


def min_clearance(sample, ego: EgoSpec, horizon_frames: int = FUTURE_LEN) -> float:
    """Smallest gap between the GT ego footprints and any obstacle box."""
    best = math.inf
    n = min(horizon_frames, len(sample.gt_future.waypoints))
    for k in range(n):
        ego_box = ego.box_at(sample.gt_future.waypoints[k])
        for obstacle in sample.obstacles[k]:
            best = min(best, box_distance(ego_box, obstacle))
    return best
