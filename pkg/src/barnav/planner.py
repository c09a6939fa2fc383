"""Global Dijkstra planning on a dilated grid and lookahead sampling along the path."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTarget, GoalBlocked, NoPath, StartBlocked
from .geometry import Pose2D, wrap_angle
from .grid import OccupancyGrid
from .worldgen import NEIGHBORS_8, SQRT2, diagonal_allowed, path_length_of

DEFAULT_ROBOT_RADIUS = math.hypot(0.43 / 2, 0.508 / 2)


@dataclass(frozen=True, eq=False)
class GlobalPath:
    waypoints: np.ndarray  # (N, 2) world-frame meters
    cumulative_arclength: np.ndarray  # (N,)
    cells: tuple = ()
    resolution: float = 0.0

    @classmethod
    def from_points(cls, pts, cells=(), resolution: float = 0.0) -> "GlobalPath":
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        seg = np.hypot(*np.diff(pts, axis=0).T) if len(pts) > 1 else np.zeros(0)
        return cls(pts, np.concatenate(([0.0], np.cumsum(seg))), tuple(cells), resolution)

    @property
    def length(self) -> float:
        return float(self.cumulative_arclength[-1])

    @property
    def cost(self) -> float:
        """Length counted from straight/diagonal cell steps (exact, order-independent)."""
        if self.cells and self.resolution:
            return path_length_of(list(self.cells), self.resolution)
        return self.length

    def __len__(self) -> int:
        return len(self.waypoints)


def dilate(grid: OccupancyGrid, radius: float) -> np.ndarray:
    """Blocked mask: cells whose center is within ``radius`` of an occupied cell center."""
    occ = grid.cells != 0
    k = int(math.floor(radius / grid.resolution))
    h, w = occ.shape
    p = np.pad(occ, k)
    out = np.zeros_like(occ)
    for dr in range(-k, k + 1):
        for dc in range(-k, k + 1):
            if math.hypot(dr, dc) * grid.resolution <= radius:
                out |= p[k + dr : k + dr + h, k + dc : k + dc + w]
    return out


def dijkstra_field(free: np.ndarray, goal_cell) -> np.ndarray:
    """Cost-to-go (in cell units) from every cell to ``goal_cell``; inf where unreachable.

    Heap ties resolve on (row, col), so expansion order is fixed for a given grid.
    """
    h, w = free.shape
    dist = np.full((h, w), np.inf)
    gc, gr = goal_cell
    dist[gr, gc] = 0.0
    heap = [(0.0, gr, gc)]
    done = np.zeros((h, w), dtype=bool)
    while heap:
        d, r, c = heapq.heappop(heap)
        if done[r, c]:
            continue
        done[r, c] = True
        for dc, dr in NEIGHBORS_8:
            nc, nr = c + dc, r + dr
            if not (0 <= nc < w and 0 <= nr < h) or not free[nr, nc] or done[nr, nc]:
                continue
            if dc and dr and not diagonal_allowed(free, c, r, dc, dr):
                continue
            nd = d + (SQRT2 if dc and dr else 1.0)
            if nd < dist[nr, nc]:
                dist[nr, nc] = nd
                heapq.heappush(heap, (nd, nr, nc))
    return dist


def descend(field: np.ndarray, free: np.ndarray, start_cell) -> list[tuple[int, int]]:
    """Follow the cost-to-go field downhill from ``start_cell`` to its zero cell."""
    h, w = field.shape
    c, r = start_cell
    cells = [(c, r)]
    while field[r, c] > 0.0:
        best = None
        for dc, dr in sorted(NEIGHBORS_8, key=lambda d: (r + d[1], c + d[0])):
            nc, nr = c + dc, r + dr
            if not (0 <= nc < w and 0 <= nr < h) or not free[nr, nc]:
                continue
            if dc and dr and not diagonal_allowed(free, c, r, dc, dr):
                continue
            val = field[nr, nc] + (SQRT2 if dc and dr else 1.0)
            if best is None or val < best[0] - 1e-9:
                best = (val, nc, nr)
        if best is None or not math.isfinite(best[0]):
            raise NoPath("descent stalled")
        c, r = best[1], best[2]
        cells.append((c, r))
    return cells


def _cells_to_path(grid: OccupancyGrid, cells) -> GlobalPath:
    return GlobalPath.from_points([grid.cell_center(c, r) for c, r in cells], cells, grid.resolution)


def plan_global(grid: OccupancyGrid, start: Pose2D, goal, robot_radius: float = DEFAULT_ROBOT_RADIUS) -> GlobalPath:
    """Dijkstra over the obstacle grid dilated by ``robot_radius``, 8-connected."""
    free = ~dilate(grid, robot_radius)
    sc, gc = grid.world_to_cell(start.x, start.y), grid.world_to_cell(*goal)
    if not grid.in_bounds(*sc) or not free[sc[1], sc[0]]:
        raise StartBlocked(f"start cell {sc} blocked after dilation")
    if not grid.in_bounds(*gc) or not free[gc[1], gc[0]]:
        raise GoalBlocked(f"goal cell {gc} blocked after dilation")
    field = dijkstra_field(free, gc)
    if not math.isfinite(field[sc[1], sc[0]]):
        raise NoPath(f"goal unreachable from {sc}")
    return _cells_to_path(grid, descend(field, free, sc))


class GlobalPlanner:
    """Replanning front-end for one static world and goal.

    The goal's cost-to-go field is computed once, so each replan is a descent.
    With ``escape_inflation`` a start inside the dilation margin (but not in an
    obstacle) is routed via the nearest reachable free cell instead of failing.
    """

    def __init__(self, grid: OccupancyGrid, goal, robot_radius: float = DEFAULT_ROBOT_RADIUS, escape_inflation: bool = True):
        self.grid = grid
        self.goal = (float(goal[0]), float(goal[1]))
        self.free = ~dilate(grid, robot_radius)
        self.goal_cell = grid.world_to_cell(*self.goal)
        self.escape_inflation = escape_inflation
        gc = self.goal_cell
        if grid.in_bounds(*gc) and self.free[gc[1], gc[0]]:
            self.field = dijkstra_field(self.free, gc)
        else:
            self.field = np.full(self.free.shape, np.inf)
        self._reach_rc = np.argwhere(np.isfinite(self.field))

    def plan(self, pose: Pose2D) -> GlobalPath | None:
        """Path from the pose's cell to the goal, or None when there is none."""
        grid = self.grid
        sc = grid.world_to_cell(pose.x, pose.y)
        if not grid.in_bounds(*sc):
            return None
        if math.isfinite(self.field[sc[1], sc[0]]):
            return _cells_to_path(grid, descend(self.field, self.free, sc))
        if not self.escape_inflation or self._reach_rc.size == 0 or grid.cells[sc[1], sc[0]]:
            return None
        d2 = (self._reach_rc[:, 0] - sc[1]) ** 2 + (self._reach_rc[:, 1] - sc[0]) ** 2
        nearest = np.flatnonzero(d2 == d2.min())
        r, c = self._reach_rc[nearest[0]]
        if math.sqrt(d2.min()) * grid.resolution > 2 * DEFAULT_ROBOT_RADIUS:
            return None
        rest = [grid.cell_center(*x) for x in descend(self.field, self.free, (int(c), int(r)))]
        # bridge the escape hop at cell spacing so waypoints stay dense
        hop = math.hypot(rest[0][0] - pose.x, rest[0][1] - pose.y)
        n = max(1, int(math.ceil(hop / grid.resolution)))
        bridge = [(pose.x + (rest[0][0] - pose.x) * k / n, pose.y + (rest[0][1] - pose.y) * k / n) for k in range(n)]
        return GlobalPath.from_points(bridge + rest)


def project_on_path(path: GlobalPath, x: float, y: float) -> tuple[float, float]:
    """(arclength, distance) of the nearest point on the polyline; first segment wins ties."""
    pts = path.waypoints
    if len(pts) == 1:
        return 0.0, float(math.hypot(x - pts[0, 0], y - pts[0, 1]))
    a, b = pts[:-1], pts[1:]
    ab = b - a
    L2 = (ab**2).sum(axis=1)
    t = np.clip(((x - a[:, 0]) * ab[:, 0] + (y - a[:, 1]) * ab[:, 1]) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    fx, fy = a[:, 0] + t * ab[:, 0], a[:, 1] + t * ab[:, 1]
    d = np.hypot(x - fx, y - fy)
    i = int(np.argmin(d))
    return float(path.cumulative_arclength[i] + t[i] * math.sqrt(L2[i])), float(d[i])


def point_at(path: GlobalPath, s: float) -> tuple[float, float]:
    s_tot = path.cumulative_arclength
    if s >= s_tot[-1]:
        return float(path.waypoints[-1, 0]), float(path.waypoints[-1, 1])
    if s <= 0:
        return float(path.waypoints[0, 0]), float(path.waypoints[0, 1])
    i = int(np.searchsorted(s_tot, s, side="right")) - 1
    seg = s_tot[i + 1] - s_tot[i]
    t = (s - s_tot[i]) / seg if seg > 0 else 0.0
    p = path.waypoints[i] + t * (path.waypoints[i + 1] - path.waypoints[i])
    return float(p[0]), float(p[1])


def sample_lookahead(path: GlobalPath, pose: Pose2D, distance: float = 0.5) -> tuple[float, float]:
    """Path point ``distance`` of arclength beyond the pose's projection, clamped to the end."""
    s, _ = project_on_path(path, pose.x, pose.y)
    return point_at(path, s + distance)


def heading_error(pose: Pose2D, target) -> float:
    dx, dy = target[0] - pose.x, target[1] - pose.y
    if math.hypot(dx, dy) < 1e-6:
        raise DegenerateTarget("target coincides with pose")
    return wrap_angle(math.atan2(dy, dx) - pose.theta)
