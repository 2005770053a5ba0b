"""Ego-state trajectory planner and open-loop evaluation toolkit.

The package covers the full benchmark loop: synthetic scenario generation,
training a small MLP planner on ego states alone, scoring predictions with
L2 error and occupancy-grid collision rate, auditing ground-truth false
collisions across grid sizes, and dataset distribution diagnostics.
"""

__version__ = "0.1.0"

from openloop.core import (
    Command,
    EgoSample,
    Kinematics,
    OrientedBox,
    Pose2,
    Trajectory,
    curvature_angles,
    derive_command,
    heading_angles,
    normalize_angle,
)

__all__ = [
    "Command",
    "EgoSample",
    "Kinematics",
    "OrientedBox",
    "Pose2",
    "Trajectory",
    "curvature_angles",
    "derive_command",
    "heading_angles",
    "normalize_angle",
    "__version__",
]
