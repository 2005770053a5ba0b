"""Planar frame math: quaternion yaw and global-to-ego projection."""

from __future__ import annotations

import math


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    t = math.fmod(theta, 2.0 * math.pi)
    if t > math.pi:
        t -= 2.0 * math.pi
    elif t <= -math.pi:
        t += 2.0 * math.pi
    return t


def quaternion_yaw(q: list[float]) -> float:
    """Yaw of a [w, x, y, z] quaternion, rotation about +z."""
    w, x, y, z = q
    return math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


def to_ego_frame(px: float, py: float, ref_x: float, ref_y: float, ref_yaw: float) -> tuple[float, float]:
    """Project a global point into the frame anchored at (ref, ref_yaw)."""
    dx, dy = px - ref_x, py - ref_y
    c, s = math.cos(ref_yaw), math.sin(ref_yaw)
    return (c * dx + s * dy, -s * dx + c * dy)
