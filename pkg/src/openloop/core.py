"""Domain types, coordinate conventions, and trajectory angle math.

Everything lives in the current ego frame: +x forward along the current
heading, +y to the left, angles counter-clockwise in radians, normalized to
(-pi, pi].  One trajectory step is 0.5 s (the 2 Hz key-frame rate), so a
4-pose history spans the last 1.5 s and a 6-pose future spans the next 3 s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

HISTORY_LEN = 4  # past frames, the last one being the current frame
FUTURE_LEN = 6  # future frames (3 s horizon)
STEP_SECONDS = 0.5

# Lateral displacement at the 3 s waypoint beyond which a sample counts as a
# turn.  Strictly greater-than: exactly 2 m is still "go straight".
COMMAND_LATERAL_THRESHOLD = 2.0


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    t = math.fmod(theta, 2.0 * math.pi)
    if t > math.pi:
        t -= 2.0 * math.pi
    elif t <= -math.pi:
        t += 2.0 * math.pi
    return t


@dataclass(frozen=True)
class Pose2:
    """Planar pose: position in meters, heading in radians.

    The heading is normalized to (-pi, pi] on construction.
    """

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        x, y, theta = float(self.x), float(self.y), float(self.theta)
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(theta)):
            raise ValueError(f"pose components must be finite, got ({x}, {y}, {theta})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "theta", normalize_angle(theta))


@dataclass(frozen=True)
class Kinematics:
    """Instantaneous body-frame velocity and acceleration.

    vx/vy in m/s, omega (yaw rate) in rad/s, ax/ay in m/s^2, beta (yaw
    acceleration) in rad/s^2.
    """

    vx: float
    vy: float
    omega: float
    ax: float
    ay: float
    beta: float

    def __post_init__(self) -> None:
        for name in ("vx", "vy", "omega", "ax", "ay", "beta"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"kinematics field {name} must be finite, got {v}")
            object.__setattr__(self, name, v)


class Command(Enum):
    """High-level navigation intent derived from future lateral displacement."""

    TURN_LEFT = "left"
    GO_STRAIGHT = "straight"
    TURN_RIGHT = "right"

    def one_hot(self) -> tuple[float, float, float]:
        """(left, straight, right) indicator triple."""
        return (
            1.0 if self is Command.TURN_LEFT else 0.0,
            1.0 if self is Command.GO_STRAIGHT else 0.0,
            1.0 if self is Command.TURN_RIGHT else 0.0,
        )

    @classmethod
    def from_label(cls, label: str) -> "Command":
        for member in cls:
            if member.value == label:
                return member
        raise ValueError(f"unknown command label {label!r}, expected left/straight/right")


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered waypoints at a fixed step (default 0.5 s)."""

    waypoints: tuple[Pose2, ...]
    period: float = STEP_SECONDS

    def __post_init__(self) -> None:
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if float(self.period) <= 0.0:
            raise ValueError(f"trajectory period must be positive, got {self.period}")
        object.__setattr__(self, "period", float(self.period))

    def __len__(self) -> int:
        return len(self.waypoints)

    def __iter__(self):
        return iter(self.waypoints)

    @property
    def final(self) -> Pose2:
        return self.waypoints[-1]


@dataclass(frozen=True)
class OrientedBox:
    """Oriented rectangle in the BEV plane: center, heading, length, width.

    Length runs along the heading, width across it.
    """

    cx: float
    cy: float
    heading: float
    length: float
    width: float

    def __post_init__(self) -> None:
        cx, cy = float(self.cx), float(self.cy)
        heading = float(self.heading)
        length, width = float(self.length), float(self.width)
        if not all(map(math.isfinite, (cx, cy, heading, length, width))):
            raise ValueError("box fields must be finite")
        if length <= 0.0 or width <= 0.0:
            raise ValueError(f"box dimensions must be positive, got {length} x {width}")
        object.__setattr__(self, "cx", cx)
        object.__setattr__(self, "cy", cy)
        object.__setattr__(self, "heading", normalize_angle(heading))
        object.__setattr__(self, "length", length)
        object.__setattr__(self, "width", width)

    def corners(self) -> list[tuple[float, float]]:
        """Corner coordinates, counter-clockwise starting front-left."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        hl, hw = 0.5 * self.length, 0.5 * self.width
        out = []
        for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
            out.append((self.cx + c * dx - s * dy, self.cy + s * dx + c * dy))
        return out


@dataclass(frozen=True)
class EgoSample:
    """One evaluation unit.

    history: the past HISTORY_LEN poses, oldest first, last pose being the
    current frame and therefore exactly the origin.  gt_future: the next
    FUTURE_LEN poses.  obstacles: one list of boxes per future frame, all in
    the current ego frame.
    """

    sample_id: str
    history: Trajectory
    kinematics: Kinematics
    command: Command
    gt_future: Trajectory
    obstacles: tuple[tuple[OrientedBox, ...], ...]

    def __post_init__(self) -> None:
        sid = self.sample_id
        if len(self.history) != HISTORY_LEN:
            raise ValueError(
                f"sample {sid}: history must have {HISTORY_LEN} poses, got {len(self.history)}"
            )
        cur = self.history.final
        if not (cur.x == 0.0 and cur.y == 0.0 and cur.theta == 0.0):
            raise ValueError(
                f"sample {sid}: history must end at the origin pose, got "
                f"({cur.x}, {cur.y}, {cur.theta})"
            )
        if len(self.gt_future) != FUTURE_LEN:
            raise ValueError(
                f"sample {sid}: gt_future must have {FUTURE_LEN} poses, got {len(self.gt_future)}"
            )
        obstacles = tuple(tuple(frame) for frame in self.obstacles)
        if len(obstacles) != FUTURE_LEN:
            raise ValueError(
                f"sample {sid}: obstacles must list {FUTURE_LEN} frames, got {len(obstacles)}"
            )
        object.__setattr__(self, "obstacles", obstacles)


def derive_command(gt_future: Trajectory) -> Command:
    """Command from the lateral displacement of the 3 s waypoint.

    More than 2 m to the left (y > 2) is a left turn, more than 2 m to the
    right a right turn, anything else (boundary included) goes straight.
    """
    if len(gt_future) < FUTURE_LEN:
        raise ValueError(
            f"need at least {FUTURE_LEN} future waypoints to derive a command, "
            f"got {len(gt_future)}"
        )
    y_final = gt_future.waypoints[FUTURE_LEN - 1].y
    if y_final > COMMAND_LATERAL_THRESHOLD:
        return Command.TURN_LEFT
    if y_final < -COMMAND_LATERAL_THRESHOLD:
        return Command.TURN_RIGHT
    return Command.GO_STRAIGHT


def heading_angles(traj: Trajectory) -> list[float]:
    """Waypoint headings relative to the current frame, wrapped to (-pi, pi]."""
    return [p.theta for p in traj.waypoints]


def curvature_angles(traj: Trajectory) -> list[float]:
    """Signed turn angle at each interior waypoint.

    The angle between the incoming and outgoing segment directions,
    counter-clockwise positive.  Degenerate zero-length segments contribute
    zero.
    """
    pts = traj.waypoints
    if len(pts) < 3:
        raise ValueError(f"need at least 3 waypoints for curvature angles, got {len(pts)}")
    out = []
    for i in range(1, len(pts) - 1):
        ax, ay = pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y
        bx, by = pts[i + 1].x - pts[i].x, pts[i + 1].y - pts[i].y
        if (ax == 0.0 and ay == 0.0) or (bx == 0.0 and by == 0.0):
            out.append(0.0)
            continue
        out.append(math.atan2(ax * by - ay * bx, ax * bx + ay * by))
    return out
