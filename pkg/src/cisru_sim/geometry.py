"""Planar poses and rigid-frame helpers shared by every module."""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    theta = math.fmod(theta, TWO_PI)
    if theta <= -math.pi:
        theta += TWO_PI
    elif theta > math.pi:
        theta -= TWO_PI
    return theta


@dataclass(frozen=True)
class Pose2D:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def transform_point(self, local_x: float, local_y: float) -> tuple[float, float]:
        """Map a point from this pose's local frame into the world frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return (self.x + c * local_x - s * local_y, self.y + s * local_x + c * local_y)

    def heading_to(self, x: float, y: float) -> float:
        return math.atan2(y - self.y, x - self.x)

    def as_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "theta": self.theta}

    @staticmethod
    def from_dict(d: dict) -> "Pose2D":
        return Pose2D(float(d.get("x", 0.0)), float(d.get("y", 0.0)), float(d.get("theta", 0.0)))
