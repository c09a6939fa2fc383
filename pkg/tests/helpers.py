import math

import numpy as np

from barnav.geometry import Pose2D
from barnav.grid import OccupancyGrid
from barnav.worldgen import GenParams, WorldSpec, astar_path, path_length_of


def bordered(w, h):
    cells = np.zeros((h, w), dtype=np.uint8)
    cells[0, :] = cells[-1, :] = 1
    cells[:, 0] = cells[:, -1] = 1
    return cells


def make_world(cells, resolution, start_cell, goal_cell, theta=math.pi / 2, world_id="fixture"):
    grid = OccupancyGrid(np.asarray(cells, dtype=np.uint8), resolution)
    path = astar_path(grid, start_cell, goal_cell)
    length = max(path_length_of(path, resolution), resolution)
    sx, sy = grid.cell_center(*start_cell)
    params = GenParams(width=grid.width, height=grid.height, resolution=resolution)
    return WorldSpec(grid, Pose2D(sx, sy, theta), grid.cell_center(*goal_cell), length, length / 2.0,
                     params, world_id, path)


def corridor_world(length_m=10.0, width_m=1.5, resolution=0.05):
    """Straight open corridor along +x; start and goal ``length_m`` apart."""
    n_len = int(round(length_m / resolution)) + 2 * int(round(1.0 / resolution))
    n_w = int(round(width_m / resolution)) + 2
    cells = np.zeros((n_w, n_len), dtype=np.uint8)
    cells[0, :] = cells[-1, :] = 1
    cells[:, 0] = cells[:, -1] = 1
    row = n_w // 2
    c0 = int(round(1.0 / resolution))
    c1 = c0 + int(round(length_m / resolution))
    return make_world(cells, resolution, (c0, row), (c1, row), theta=0.0, world_id="corridor")


def pocket_world(pocket_cells, resolution=0.15, world_id="pocket"):
    """Robot parked nose-first at the closed end of a vertical pocket.

    The pocket opens into a wide hall whose far end holds the goal, so the
    robot must turn around inside the pocket before it can leave. Wide pockets
    let it turn after one backtrack; narrow ones trap it in recovery.
    """
    W, H, c0, top, hall = 20, 16, 3, 12, 6
    cells = bordered(W, H)
    cells[0:top - hall, c0 + pocket_cells:W] = 1
    cells[0:H, 0:c0] = 1
    cells[top:H, 0:W] = 1
    from barnav.planner import dilate  # local: keep helpers import-light
    free = ~dilate(OccupancyGrid(cells, resolution), 0.333)
    row = top - hall // 2 - 1
    if not free[row].any():
        row += 1
    goal = (int(np.flatnonzero(free[row]).max()), row)
    return make_world(cells, resolution, (c0 + pocket_cells // 2, 3), goal, theta=-math.pi / 2,
                      world_id=world_id)


def cul_de_sac_world():
    return pocket_world(7, world_id="cul_de_sac")


def dead_end_world():
    return pocket_world(6, world_id="dead_end")


def pinned_world(resolution=0.05):
    """Four posts just inside the footprint's swept radius, goal behind the robot.

    Turning in place toward the goal clips a post with the body's corner.
    """
    cells = bordered(80, 60)
    c, r = 50, 30
    for dx, dy in ((4, 5), (4, -5), (-4, 5), (-4, -5)):  # (0.2, 0.25) m offsets
        cells[r + dy, c + dx] = 1
    return make_world(cells, resolution, (c, r), (10, r), theta=0.0, world_id="pinned")


# one (criterion, passed, detail) row per acceptance check, printed after the run
ACCEPTANCE: list[tuple[int, bool, str]] = []
