"""Oriented-rectangle geometry: containment, intersection, distances.

Internal helpers shared by the collision metrics and the scenario generator.
All tests are inclusive: touching counts as intersecting, distance zero.
"""

from __future__ import annotations

import math

from openloop.core import OrientedBox


def point_in_box(px: float, py: float, box: OrientedBox) -> bool:
    """True if the point lies inside or on the boundary of the box."""
    c, s = math.cos(box.heading), math.sin(box.heading)
    dx, dy = px - box.cx, py - box.cy
    u = c * dx + s * dy  # along length
    v = -s * dx + c * dy  # along width
    return abs(u) <= 0.5 * box.length and abs(v) <= 0.5 * box.width


def _project(corners: list[tuple[float, float]], ax: float, ay: float) -> tuple[float, float]:
    dots = [ax * x + ay * y for x, y in corners]
    return min(dots), max(dots)


def _axes(box: OrientedBox) -> list[tuple[float, float]]:
    c, s = math.cos(box.heading), math.sin(box.heading)
    return [(c, s), (-s, c)]


def sat_intersects(a: OrientedBox, b: OrientedBox) -> bool:
    """Separating-axis overlap test for two oriented rectangles (inclusive)."""
    ca, cb = a.corners(), b.corners()
    for ax, ay in _axes(a) + _axes(b):
        lo_a, hi_a = _project(ca, ax, ay)
        lo_b, hi_b = _project(cb, ax, ay)
        if hi_a < lo_b or hi_b < lo_a:
            return False
    return True


def penetration_depth(a: OrientedBox, b: OrientedBox) -> float:
    """Minimum translation distance separating two overlapping rectangles.

    Zero when the rectangles do not overlap.
    """
    ca, cb = a.corners(), b.corners()
    depth = math.inf
    for ax, ay in _axes(a) + _axes(b):
        lo_a, hi_a = _project(ca, ax, ay)
        lo_b, hi_b = _project(cb, ax, ay)
        overlap = min(hi_a, hi_b) - max(lo_a, lo_b)
        if overlap < 0.0:
            return 0.0
        depth = min(depth, overlap)
    return depth


def _point_segment_distance(px, py, x1, y1, x2, y2) -> float:
    dx, dy = x2 - x1, y2 - y1
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.hypot(px - x1, py - y1)
    t = ((px - x1) * dx + (py - y1) * dy) / seg2
    t = max(0.0, min(1.0, t))
    return math.hypot(px - (x1 + t * dx), py - (y1 + t * dy))


def segment_distance(p1, p2, q1, q2) -> float:
    """Distance between two segments given as (x, y) endpoint pairs."""
    if _segments_intersect(p1, p2, q1, q2):
        return 0.0
    return min(
        _point_segment_distance(*p1, *q1, *q2),
        _point_segment_distance(*p2, *q1, *q2),
        _point_segment_distance(*q1, *p1, *p2),
        _point_segment_distance(*q2, *p1, *p2),
    )


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1 = _orient(*q1, *q2, *p1)
    d2 = _orient(*q1, *q2, *p2)
    d3 = _orient(*p1, *p2, *q1)
    d4 = _orient(*p1, *p2, *q2)
    if ((d1 > 0) != (d2 > 0) or d1 == 0 or d2 == 0) and (
        (d3 > 0) != (d4 > 0) or d3 == 0 or d4 == 0
    ):
        # Conservative for collinear touching; exactness here only matters on
        # measure-zero configurations.
        return (
            min(p1[0], p2[0]) <= max(q1[0], q2[0])
            and min(q1[0], q2[0]) <= max(p1[0], p2[0])
            and min(p1[1], p2[1]) <= max(q1[1], q2[1])
            and min(q1[1], q2[1]) <= max(p1[1], p2[1])
        )
    return False


def box_distance(a: OrientedBox, b: OrientedBox) -> float:
    """Euclidean gap between two rectangles; zero if they touch or overlap."""
    if sat_intersects(a, b):
        return 0.0
    ca, cb = a.corners(), b.corners()
    best = math.inf
    for i in range(4):
        p1, p2 = ca[i], ca[(i + 1) % 4]
        for j in range(4):
            q1, q2 = cb[j], cb[(j + 1) % 4]
            best = min(best, segment_distance(p1, p2, q1, q2))
    return best


def point_box_distance(px: float, py: float, box: OrientedBox) -> float:
    """Distance from a point to a rectangle; zero inside."""
    if point_in_box(px, py, box):
        return 0.0
    corners = box.corners()
    return min(
        _point_segment_distance(px, py, *corners[i], *corners[(i + 1) % 4]) for i in range(4)
    )
