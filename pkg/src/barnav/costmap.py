"""Rolling local costmap used as obstacle memory for the LiDAR's rear blind arc."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import RoiOutOfWindow
from .geometry import Pose2D, RobotFootprint
from .grid import OccupancyGrid
from .sim import LaserScan

LETHAL = 255


@dataclass(frozen=True)
class RearRoi:
    length: float = 0.5
    width: float = 0.43 + 2 * 0.04
    # distance from pose origin back to the ROI's front edge (the rear bumper)
    offset: float = 0.508 / 2

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("ROI dimensions must be positive")

    @classmethod
    def for_footprint(cls, footprint: RobotFootprint, length: float = 0.5, margin: float = 0.04) -> "RearRoi":
        return cls(length=length, width=footprint.width + 2 * margin, offset=-footprint.rear)

    def corners(self, pose: Pose2D) -> tuple[np.ndarray, np.ndarray]:
        lx = np.array([-self.offset, -self.offset, -self.offset - self.length, -self.offset - self.length])
        ly = np.array([self.width / 2, -self.width / 2, -self.width / 2, self.width / 2])
        return pose.to_world(lx, ly)

    def contains_local(self, lx, ly) -> np.ndarray:
        lx, ly = np.asarray(lx), np.asarray(ly)
        return (lx <= -self.offset) & (lx >= -self.offset - self.length) & (np.abs(ly) <= self.width / 2)


class Costmap:
    """Mark-only cost grid on a window that scrolls with the robot.

    The window origin stays on multiples of the resolution so recentering is an
    exact integer shift; cells that scroll out are forgotten.
    """

    def __init__(self, anchor: Pose2D, window: float = 6.0, resolution: float = 0.05,
                 occupied_threshold: int = 128, recenter_fraction: float = 0.25):
        self.window = window
        self.resolution = resolution
        self.occupied_threshold = occupied_threshold
        self.recenter_fraction = recenter_fraction
        n = int(round(window / resolution))
        self.grid = OccupancyGrid(np.zeros((n, n), dtype=np.uint8), resolution, self._origin_for(anchor.x, anchor.y, n))
        self.robot_anchor = anchor

    def _origin_for(self, x: float, y: float, n: int) -> tuple[float, float]:
        half = n // 2
        return (
            (math.floor(x / self.resolution) - half) * self.resolution,
            (math.floor(y / self.resolution) - half) * self.resolution,
        )

    @property
    def size(self) -> int:
        return self.grid.width

    def recenter(self, pose: Pose2D) -> None:
        n = self.size
        new_origin = self._origin_for(pose.x, pose.y, n)
        shift_c = int(round((new_origin[0] - self.grid.origin[0]) / self.resolution))
        shift_r = int(round((new_origin[1] - self.grid.origin[1]) / self.resolution))
        old = self.grid.cells
        new = np.zeros_like(old)
        src_r = slice(max(0, shift_r), min(n, n + shift_r))
        dst_r = slice(max(0, -shift_r), min(n, n - shift_r))
        src_c = slice(max(0, shift_c), min(n, n + shift_c))
        dst_c = slice(max(0, -shift_c), min(n, n - shift_c))
        new[dst_r, dst_c] = old[src_r, src_c]
        self.grid = OccupancyGrid(new, self.resolution, new_origin)
        self.robot_anchor = pose

    def integrate_scan(self, scan: LaserScan) -> "Costmap":
        pose = scan.origin
        drift = pose.distance_to(self.robot_anchor.x, self.robot_anchor.y)
        if drift > self.recenter_fraction * self.window:
            self.recenter(pose)
        hit = scan.ranges < scan.range_max
        if hit.any():
            ang = scan.angles()[hit] + pose.theta
            # nudge past the cell face so the endpoint lands in the obstacle cell
            r = scan.ranges[hit] + 1e-6
            xs = pose.x + r * np.cos(ang)
            ys = pose.y + r * np.sin(ang)
            cols = np.floor((xs - self.grid.origin[0]) / self.resolution).astype(int)
            rows = np.floor((ys - self.grid.origin[1]) / self.resolution).astype(int)
            ok = (cols >= 0) & (cols < self.size) & (rows >= 0) & (rows < self.size)
            self.grid.cells[rows[ok], cols[ok]] = LETHAL
        return self

    def mark(self, x: float, y: float, cost: int = LETHAL) -> None:
        c, r = self.grid.world_to_cell(x, y)
        if self.grid.in_bounds(c, r):
            self.grid.cells[r, c] = max(int(self.grid.cells[r, c]), cost)

    def roi_clear(self, pose: Pose2D, roi: RearRoi) -> bool:
        """True iff no cell at or above the threshold has its center inside the rear ROI."""
        cx, cy = roi.corners(pose)
        x0, y0, x1, y1 = self.grid.extent
        if cx.min() < x0 or cy.min() < y0 or cx.max() > x1 or cy.max() > y1:
            raise RoiOutOfWindow("rear ROI leaves the costmap window")
        res = self.resolution
        c_lo = max(0, int(math.floor((cx.min() - x0) / res)))
        c_hi = min(self.size, int(math.ceil((cx.max() - x0) / res)) + 1)
        r_lo = max(0, int(math.floor((cy.min() - y0) / res)))
        r_hi = min(self.size, int(math.ceil((cy.max() - y0) / res)) + 1)
        sub = self.grid.cells[r_lo:r_hi, c_lo:c_hi]
        rows, cols = np.nonzero(sub >= self.occupied_threshold)
        if rows.size == 0:
            return True
        xs = x0 + (cols + c_lo + 0.5) * res
        ys = y0 + (rows + r_lo + 0.5) * res
        lx, ly = pose.to_local(xs, ys)
        return not bool(roi.contains_local(lx, ly).any())

    def to_pgm(self) -> bytes:
        """Binary PGM (P5), top row = max y, dark = high cost."""
        img = (255 - self.grid.cells[::-1]).astype(np.uint8)
        h, w = img.shape
        return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()

    def write_pgm(self, path) -> None:
        Path(path).write_bytes(self.to_pgm())


def read_pgm(path) -> np.ndarray:
    """Cost cells back from a PGM written by ``Costmap.write_pgm`` (row 0 = min y)."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5" or parts[2] != b"255":
        raise ValueError(f"{path} is not an 8-bit binary PGM")
    w, h = map(int, parts[1].split())
    img = np.frombuffer(parts[3], dtype=np.uint8)
    if img.size != w * h:
        raise ValueError(f"{path} has a truncated pixel block")
    return (255 - img.reshape(h, w))[::-1].astype(np.uint8)


def integrate_scan(costmap: Costmap, scan: LaserScan) -> Costmap:
    return costmap.integrate_scan(scan)


def roi_clear(costmap: Costmap, pose: Pose2D, roi: RearRoi) -> bool:
    return costmap.roi_clear(pose, roi)
