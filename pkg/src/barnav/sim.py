"""Differential-drive kinematics, 2D LiDAR raycasting and ground-truth collision."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PoseOutOfBounds
from .geometry import Pose2D, RobotFootprint, Twist2D, in_oriented_rect, wrap_angle
from .grid import OccupancyGrid

LIDAR_FOV = math.radians(270.0)
# below this |w| the arc formula is replaced by the straight-line update
EPS_W = 1e-9


@dataclass(frozen=True)
class LidarConfig:
    count: int = 720
    range_max: float = 10.0
    fov: float = LIDAR_FOV
    range_min: float = 1e-3

    def relative_angles(self) -> np.ndarray:
        return np.linspace(-self.fov / 2.0, self.fov / 2.0, self.count)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    control_every: int = 5
    v_max: float = 2.0
    w_max: float = 1.5
    # (linear m/s^2, angular rad/s^2); None means commands take effect instantly
    accel_limits: tuple[float, float] | None = None
    lidar: LidarConfig = field(default_factory=LidarConfig)
    goal_tolerance: float = 0.5
    timeout: float = 100.0
    seed: int = 0
    # uniform start perturbation per trial: (position m, heading rad)
    start_jitter: tuple[float, float] = (0.03, 0.05)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.goal_tolerance <= 0:
            raise ValueError("goal_tolerance must be positive")
        if self.control_every < 1:
            raise ValueError("control_every must be >= 1")


@dataclass(frozen=True, eq=False)
class LaserScan:
    angle_min: float
    angle_max: float
    ranges: np.ndarray
    range_max: float
    origin: Pose2D

    @property
    def count(self) -> int:
        return len(self.ranges)

    def angles(self) -> np.ndarray:
        """Beam angles relative to the sensor heading."""
        return np.linspace(self.angle_min, self.angle_max, self.count)

    def min_range(self) -> float:
        return float(self.ranges.min()) if self.count else self.range_max


def step(state: Pose2D, cmd: Twist2D, dt: float) -> Pose2D:
    """Exact constant-twist integration of the unicycle model."""
    x, y, th = state.x, state.y, state.theta
    v, w = cmd.v, cmd.w
    if abs(w) < EPS_W:
        return Pose2D(x + v * dt * math.cos(th), y + v * dt * math.sin(th), th)
    th2 = th + w * dt
    r = v / w
    return Pose2D(x + r * (math.sin(th2) - math.sin(th)), y - r * (math.cos(th2) - math.cos(th)), wrap_angle(th2))


def scan(grid: OccupancyGrid, pose: Pose2D, lidar: LidarConfig = LidarConfig()) -> LaserScan:
    """Cast ``lidar.count`` beams over the field of view with grid traversal.

    A beam stops at the boundary of the first occupied cell it enters; beams
    that leave the grid or exceed ``range_max`` report ``range_max``.
    """
    if not grid.contains_point(pose.x, pose.y):
        raise PoseOutOfBounds(f"pose ({pose.x:.3f}, {pose.y:.3f}) outside grid")
    rel = lidar.relative_angles()
    ranges = np.full(lidar.count, lidar.range_max)
    occ = grid.cells != 0
    res = grid.resolution
    px = (pose.x - grid.origin[0]) / res
    py = (pose.y - grid.origin[1]) / res
    cx, cy = int(math.floor(px)), int(math.floor(py))
    if occ[cy, cx]:
        ranges[:] = lidar.range_min
        return LaserScan(rel[0], rel[-1], ranges, lidar.range_max, pose)

    ang = pose.theta + rel
    dx, dy = np.cos(ang), np.sin(ang)
    with np.errstate(divide="ignore", invalid="ignore"):
        tdx = np.where(dx != 0, res / np.abs(dx), np.inf)
        tdy = np.where(dy != 0, res / np.abs(dy), np.inf)
        fx, fy = px - cx, py - cy
        tmx = np.where(dx > 0, (1.0 - fx) * tdx, np.where(dx < 0, fx * tdx, np.inf))
        tmy = np.where(dy > 0, (1.0 - fy) * tdy, np.where(dy < 0, fy * tdy, np.inf))
    sx = np.where(dx > 0, 1, -1)
    sy = np.where(dy > 0, 1, -1)
    ix = np.full(lidar.count, cx)
    iy = np.full(lidar.count, cy)
    idx = np.arange(lidar.count)
    h, w = occ.shape
    while idx.size:
        adv_x = tmx < tmy
        t = np.where(adv_x, tmx, tmy)
        ix = np.where(adv_x, ix + sx, ix)
        iy = np.where(adv_x, iy, iy + sy)
        tmx = np.where(adv_x, tmx + tdx, tmx)
        tmy = np.where(adv_x, tmy, tmy + tdy)
        live = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h) & (t < lidar.range_max)
        hit = np.zeros_like(live)
        hit[live] = occ[iy[live], ix[live]]
        ranges[idx[hit]] = t[hit]
        keep = live & ~hit
        idx, ix, iy, tmx, tmy = idx[keep], ix[keep], iy[keep], tmx[keep], tmy[keep]
        tdx, tdy, sx, sy = tdx[keep], tdy[keep], sx[keep], sy[keep]
    np.clip(ranges, lidar.range_min, lidar.range_max, out=ranges)
    return LaserScan(rel[0], rel[-1], ranges, lidar.range_max, pose)


def check_collision(grid: OccupancyGrid, pose: Pose2D, footprint: RobotFootprint) -> bool:
    """Ground truth: any occupied cell center inside the (uninflated) oriented footprint."""
    xs, ys = grid.occupied_centers()
    if xs.size == 0:
        return False
    reach = footprint.half_diagonal + abs(footprint.center_offset)
    near = (np.abs(xs - pose.x) <= reach) & (np.abs(ys - pose.y) <= reach)
    if not near.any():
        return False
    return bool(in_oriented_rect(xs[near], ys[near], pose, footprint).any())
