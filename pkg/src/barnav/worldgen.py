"""Procedural obstacle courses: cellular automaton, flood-fill validation, A* difficulty."""
from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import CellOccupied, GenerationExhausted, NoPath
from .geometry import Pose2D
from .grid import FREE, OCCUPIED, OccupancyGrid, decode_rle, encode_rle
from .rng import derive_seed, substream

SCHEMA_VERSION = 1
MAX_SPEED = 2.0  # m/s, the optimal-time reference speed
SQRT2 = math.sqrt(2.0)

NEIGHBORS_8 = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class GenParams:
    initial_fill: float = 0.18
    smoothing_iterations: int = 2
    fill_threshold: int = 4
    clear_threshold: int = 1
    width: int = 30
    height: int = 30
    resolution: float = 0.15
    seed: int = 0
    max_attempts: int = 100
    # radius of the free disc carved around start and goal
    clearance: float = 0.6

    def __post_init__(self):
        if not 0.0 <= self.initial_fill <= 1.0:
            raise ValueError("initial_fill must be in [0, 1]")
        if self.fill_threshold <= self.clear_threshold:
            raise ValueError("fill_threshold must exceed clear_threshold")
        if self.width < 10 or self.height < 10:
            raise ValueError("grid must be at least 10x10")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.smoothing_iterations < 0 or self.max_attempts < 1:
            raise ValueError("iteration counts must be non-negative")

    @property
    def margin_cells(self) -> int:
        return int(math.ceil(self.clearance / self.resolution))

    def start_cell(self) -> tuple[int, int]:
        # one spare row so the rear ROI at the start stays off the border wall
        return self.width // 2, 2 + self.margin_cells

    def goal_cell(self) -> tuple[int, int]:
        return self.width // 2, self.height - 3 - self.margin_cells


@dataclass(eq=False)
class WorldSpec:
    grid: OccupancyGrid
    start: Pose2D
    goal: tuple[float, float]
    path_length: float
    optimal_time: float
    params: GenParams
    world_id: str = "world"
    path_cells: list[tuple[int, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        g = self.grid
        return {
            "schema_version": SCHEMA_VERSION,
            "world_id": self.world_id,
            "params": asdict(self.params),
            "grid": {
                "width": g.width,
                "height": g.height,
                "resolution": g.resolution,
                "origin": list(g.origin),
                "cells": encode_rle(g.cells),
            },
            "start": {"x": self.start.x, "y": self.start.y, "theta": self.start.theta},
            "goal": {"x": self.goal[0], "y": self.goal[1]},
            "path_length": self.path_length,
            "optimal_time": self.optimal_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "WorldSpec":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported world schema_version {d.get('schema_version')!r}")
        g = d["grid"]
        grid = OccupancyGrid(
            decode_rle(g["cells"], g["width"], g["height"]), g["resolution"], tuple(g["origin"])
        )
        s = d["start"]
        return cls(
            grid=grid,
            start=Pose2D(s["x"], s["y"], s["theta"]),
            goal=(d["goal"]["x"], d["goal"]["y"]),
            path_length=d["path_length"],
            optimal_time=d["optimal_time"],
            params=GenParams(**d["params"]),
            world_id=d.get("world_id", "world"),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "WorldSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _interior_neighbor_counts(occ: np.ndarray) -> np.ndarray:
    """8-neighborhood occupied counts, counting interior cells only."""
    inner = occ.copy()
    inner[0, :] = inner[-1, :] = 0
    inner[:, 0] = inner[:, -1] = 0
    p = np.pad(inner, 1)
    h, w = occ.shape
    total = np.zeros((h, w), dtype=np.int16)
    for dc, dr in NEIGHBORS_8:
        total += p[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
    return total


def cellular_automaton(params: GenParams, rng: np.random.Generator) -> OccupancyGrid:
    h, w = params.height, params.width
    occ = (rng.random((h, w)) < params.initial_fill).astype(np.uint8)
    occ[0, :] = occ[-1, :] = OCCUPIED
    occ[:, 0] = occ[:, -1] = OCCUPIED
    interior = np.zeros((h, w), dtype=bool)
    interior[1:-1, 1:-1] = True
    for _ in range(params.smoothing_iterations):
        counts = _interior_neighbor_counts(occ)
        nxt = occ.copy()
        nxt[interior & (counts >= params.fill_threshold)] = OCCUPIED
        nxt[interior & (counts <= params.clear_threshold)] = FREE
        occ = nxt
    return OccupancyGrid(occ, params.resolution)


def flood_fill_connected(grid: OccupancyGrid, start_cell, goal_cell) -> bool:
    """4-connected reachability between two free cells."""
    for c in (start_cell, goal_cell):
        if not grid.in_bounds(*c):
            raise IndexError(f"cell {c} out of bounds")
        if grid.is_occupied(*c):
            raise CellOccupied(f"cell {c} is occupied")
    start_cell, goal_cell = tuple(start_cell), tuple(goal_cell)
    seen = np.zeros(grid.cells.shape, dtype=bool)
    seen[start_cell[1], start_cell[0]] = True
    queue = deque([start_cell])
    while queue:
        c, r = queue.popleft()
        if (c, r) == goal_cell:
            return True
        for dc, dr in NEIGHBORS_8[:4]:
            nc, nr = c + dc, r + dr
            if grid.in_bounds(nc, nr) and not seen[nr, nc] and grid.cells[nr, nc] == FREE:
                seen[nr, nc] = True
                queue.append((nc, nr))
    return False


def diagonal_allowed(free: np.ndarray, c: int, r: int, dc: int, dr: int) -> bool:
    """Diagonal moves may not cut the corner of an occupied orthogonal neighbor."""
    return bool(free[r, c + dc] and free[r + dr, c])


def path_length_of(cells, resolution: float) -> float:
    """Length of a cell path, summed as straight and diagonal step counts."""
    n_diag = sum(1 for a, b in zip(cells, cells[1:]) if a[0] != b[0] and a[1] != b[1])
    n_straight = len(cells) - 1 - n_diag
    return resolution * (n_straight + SQRT2 * n_diag)


def astar_path(grid: OccupancyGrid, start_cell, goal_cell) -> list[tuple[int, int]]:
    """Minimal-cost 8-connected cell path with the octile heuristic."""
    free = grid.cells == FREE
    start, goal = tuple(start_cell), tuple(goal_cell)
    for c in (start, goal):
        if not grid.in_bounds(*c) or not free[c[1], c[0]]:
            raise NoPath(f"endpoint {c} is not a free cell")

    def octile(c, r):
        dx, dy = abs(c - goal[0]), abs(r - goal[1])
        return (max(dx, dy) - min(dx, dy)) + SQRT2 * min(dx, dy)

    g = {start: 0.0}
    parent = {start: None}
    closed = set()
    order = 0
    heap = [(octile(*start), order, start)]
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal:
            path = []
            while cur is not None:
                path.append(cur)
                cur = parent[cur]
            return path[::-1]
        closed.add(cur)
        c, r = cur
        for dc, dr in NEIGHBORS_8:
            nc, nr = c + dc, r + dr
            if not grid.in_bounds(nc, nr) or not free[nr, nc] or (nc, nr) in closed:
                continue
            if dc and dr and not diagonal_allowed(free, c, r, dc, dr):
                continue
            ng = g[cur] + (SQRT2 if dc and dr else 1.0)
            if ng < g.get((nc, nr), math.inf):
                g[(nc, nr)] = ng
                parent[(nc, nr)] = cur
                order += 1
                heapq.heappush(heap, (ng + octile(nc, nr), order, (nc, nr)))
    raise NoPath(f"no path from {start} to {goal}")


def carve_disc(grid: OccupancyGrid, cell, radius: float) -> None:
    """Clear every interior cell whose center lies within ``radius`` of ``cell``'s center."""
    rc = int(math.ceil(radius / grid.resolution))
    c0, r0 = cell
    for r in range(max(1, r0 - rc), min(grid.height - 1, r0 + rc + 1)):
        for c in range(max(1, c0 - rc), min(grid.width - 1, c0 + rc + 1)):
            if math.hypot(c - c0, r - r0) * grid.resolution <= radius:
                grid.cells[r, c] = FREE
    grid.invalidate()


def generate_world(params: GenParams, world_id: str | None = None) -> WorldSpec:
    start_cell, goal_cell = params.start_cell(), params.goal_cell()
    for attempt in range(params.max_attempts):
        grid = cellular_automaton(params, substream(params.seed, "worldgen", attempt))
        carve_disc(grid, start_cell, params.clearance)
        carve_disc(grid, goal_cell, params.clearance)
        if not flood_fill_connected(grid, start_cell, goal_cell):
            continue
        cells = astar_path(grid, start_cell, goal_cell)
        length = path_length_of(cells, grid.resolution)
        sx, sy = grid.cell_center(*start_cell)
        return WorldSpec(
            grid=grid,
            start=Pose2D(sx, sy, math.pi / 2.0),
            goal=grid.cell_center(*goal_cell),
            path_length=length,
            optimal_time=length / MAX_SPEED,
            params=params,
            world_id=world_id or f"world_{params.seed:06d}",
            path_cells=cells,
        )
    raise GenerationExhausted(f"no connected world after {params.max_attempts} attempts (seed {params.seed})")


def generate_batch(count: int, root_seed: int, base: GenParams = GenParams(),
                   start_index: int = 0) -> list[WorldSpec]:
    """Worlds ``start_index .. start_index + count - 1`` of the batch seeded by ``root_seed``."""
    worlds = []
    for i in range(start_index, start_index + count):
        p = replace(base, seed=derive_seed(root_seed, "world", i))
        worlds.append(generate_world(p, world_id=f"world_{i:04d}"))
    return worlds


def difficulty_terciles(lengths) -> list[str]:
    """Bucket path lengths into easy/med/hard by batch terciles."""
    lengths = np.asarray(lengths, dtype=float)
    if lengths.size == 0:
        return []
    lo, hi = np.quantile(lengths, [1 / 3, 2 / 3])
    return ["easy" if x <= lo else "med" if x <= hi else "hard" for x in lengths]
