"""Forward-collision checks that classify a velocity command as safe or dangerous.

Two interchangeable checkers: footprint inflation against the live scan points,
and a constant-command rollout of the unicycle model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import Pose2D, RobotFootprint, Twist2D, in_body_rect
from .sim import LaserScan, step


class SafetyMode(str, Enum):
    FI = "fi"
    MPC = "mpc"
    NONE = "none"


@dataclass(frozen=True)
class InflatedFootprint:
    base: RobotFootprint = RobotFootprint()
    offset: float = 0.04

    def __post_init__(self):
        if self.offset < 0:
            raise ValueError("offset must be non-negative")

    @property
    def rect(self) -> RobotFootprint:
        return self.base.inflated(self.offset)


@dataclass(frozen=True)
class MpcParams:
    horizon_steps: int = 20
    step_dt: float = 0.01
    margin: float = 0.0

    def __post_init__(self):
        if self.horizon_steps < 1 or self.step_dt <= 0 or self.margin < 0:
            raise ValueError("invalid MPC parameters")

    @property
    def horizon(self) -> float:
        return self.horizon_steps * self.step_dt


@dataclass(frozen=True)
class SafetyVerdict:
    safe: bool
    first_unsafe_step: int | None = None
    offending_point: tuple[float, float] | None = None

    def __post_init__(self):
        if self.safe != (self.first_unsafe_step is None):
            raise ValueError("an unsafe verdict carries its first unsafe step")


SAFE = SafetyVerdict(True)


def scan_to_points(scan: LaserScan) -> np.ndarray:
    """Robot-frame (N, 2) points of every beam that hit something, in beam order."""
    hit = scan.ranges < scan.range_max
    ang = scan.angles()[hit]
    r = scan.ranges[hit]
    return np.column_stack((r * np.cos(ang), r * np.sin(ang)))


def _first_inside(points: np.ndarray, rect: RobotFootprint) -> int | None:
    if len(points) == 0:
        return None
    inside = in_body_rect(points[:, 0], points[:, 1], rect)
    idx = np.flatnonzero(inside)
    return int(idx[0]) if idx.size else None


def fi_check(points, footprint: InflatedFootprint = InflatedFootprint()) -> SafetyVerdict:
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    i = _first_inside(points, footprint.rect)
    if i is None:
        return SAFE
    return SafetyVerdict(False, 0, (float(points[i, 0]), float(points[i, 1])))


def rollout(cmd: Twist2D, params: MpcParams, start: Pose2D = Pose2D(0.0, 0.0, 0.0)) -> list[Pose2D]:
    """Predicted poses after 1..horizon_steps steps of a constant command."""
    poses = []
    pose = start
    for _ in range(params.horizon_steps):
        pose = step(pose, cmd, params.step_dt)
        poses.append(pose)
    return poses


def mpc_check(points, cmd: Twist2D, footprint: RobotFootprint = RobotFootprint(),
              params: MpcParams = MpcParams()) -> SafetyVerdict:
    """Unsafe at the first predicted step whose footprint contains an observed point."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(points) == 0:
        return SAFE
    rect = footprint.inflated(params.margin)
    # points beyond any reachable footprint can be skipped up front
    reach = abs(cmd.v) * params.horizon + rect.half_diagonal + abs(rect.center_offset) + 1e-9
    near = np.flatnonzero(np.hypot(points[:, 0], points[:, 1]) <= reach)
    if near.size == 0:
        return SAFE
    pts = points[near]
    for k, pose in enumerate(rollout(cmd, params), start=1):
        lx, ly = pose.to_local(pts[:, 0], pts[:, 1])
        inside = np.flatnonzero(in_body_rect(lx, ly, rect))
        if inside.size:
            j = inside[0]
            return SafetyVerdict(False, k, (float(pts[j, 0]), float(pts[j, 1])))
    return SAFE


class ForwardSafety:
    """Dispatches the forward check selected for an episode."""

    def __init__(self, mode: SafetyMode | str = SafetyMode.FI,
                 footprint: RobotFootprint = RobotFootprint(), offset: float = 0.04,
                 mpc: MpcParams = MpcParams()):
        self.mode = SafetyMode(mode)
        self.footprint = footprint
        self.inflated = InflatedFootprint(footprint, offset)
        self.mpc = mpc

    def check_points(self, points, cmd: Twist2D) -> SafetyVerdict:
        if self.mode is SafetyMode.FI:
            return fi_check(points, self.inflated)
        if self.mode is SafetyMode.MPC:
            return mpc_check(points, cmd, self.footprint, self.mpc)
        return SAFE

    def __call__(self, scan: LaserScan, cmd: Twist2D) -> SafetyVerdict:
        if self.mode is SafetyMode.NONE:
            return SAFE
        return self.check_points(scan_to_points(scan), cmd)


def forward_safe(scan: LaserScan, cmd: Twist2D, mode: SafetyMode | str = SafetyMode.FI, **kw) -> SafetyVerdict:
    return ForwardSafety(mode, **kw)(scan, cmd)
