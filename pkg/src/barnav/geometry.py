"""Planar pose, velocity command and rectangle containment primitives."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def wrap_angle(a: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    def distance_to(self, x: float, y: float) -> float:
        return math.hypot(x - self.x, y - self.y)

    def to_local(self, px, py):
        """World-frame point(s) into this pose's body frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx, dy = np.asarray(px) - self.x, np.asarray(py) - self.y
        return c * dx + s * dy, -s * dx + c * dy

    def to_world(self, lx, ly):
        c, s = math.cos(self.theta), math.sin(self.theta)
        lx, ly = np.asarray(lx), np.asarray(ly)
        return self.x + c * lx - s * ly, self.y + s * lx + c * ly


@dataclass(frozen=True)
class Twist2D:
    v: float = 0.0
    w: float = 0.0

    def clamped(self, v_max: float, w_max: float) -> "Twist2D":
        return Twist2D(min(max(self.v, -v_max), v_max), min(max(self.w, -w_max), w_max))


ZERO_TWIST = Twist2D(0.0, 0.0)


@dataclass(frozen=True)
class RobotFootprint:
    """Body rectangle; ``center_offset`` shifts its center forward of the pose origin."""

    width: float = 0.43
    length: float = 0.508
    center_offset: float = 0.0

    def __post_init__(self):
        if self.width <= 0 or self.length <= 0:
            raise ValueError("footprint dimensions must be positive")

    @property
    def half_diagonal(self) -> float:
        return math.hypot(self.width / 2.0, self.length / 2.0)

    @property
    def rear(self) -> float:
        """Longitudinal coordinate of the rear bumper in the body frame."""
        return self.center_offset - self.length / 2.0

    def inflated(self, margin: float) -> "RobotFootprint":
        return RobotFootprint(self.width + 2 * margin, self.length + 2 * margin, self.center_offset)


def in_body_rect(lx, ly, footprint: RobotFootprint) -> np.ndarray:
    """Closed containment test of body-frame points in the footprint rectangle."""
    lx = np.asarray(lx, dtype=float)
    ly = np.asarray(ly, dtype=float)
    return (np.abs(lx - footprint.center_offset) <= footprint.length / 2.0) & (
        np.abs(ly) <= footprint.width / 2.0
    )


def in_oriented_rect(px, py, pose: Pose2D, footprint: RobotFootprint) -> np.ndarray:
    lx, ly = pose.to_local(px, py)
    return in_body_rect(lx, ly, footprint)
