from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FREE = 0
OCCUPIED = 1


@dataclass(eq=False)
class OccupancyGrid:
    """Row-major cell grid; ``cells[row, col]`` with row along +y, col along +x.

    ``origin`` is the world position of the lower-left corner of cell (0, 0).
    World grids store 0/1, costmaps store cost bytes 0-255.
    """

    cells: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)
    _occ_cache: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        self.cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if self.cells.ndim != 2:
            raise ValueError("cells must be 2D")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @classmethod
    def empty(cls, width: int, height: int, resolution: float, origin=(0.0, 0.0)) -> "OccupancyGrid":
        return cls(np.zeros((height, width), dtype=np.uint8), resolution, origin)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return ox, oy, ox + self.width * self.resolution, oy + self.height * self.resolution

    def contains_point(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.extent
        return x0 <= x < x1 and y0 <= y < y1

    def in_bounds(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        """(col, row) of the cell containing a world point; may be out of bounds."""
        return (
            int(math.floor((x - self.origin[0]) / self.resolution)),
            int(math.floor((y - self.origin[1]) / self.resolution)),
        )

    def cell_center(self, col: int, row: int) -> tuple[float, float]:
        return (
            self.origin[0] + (col + 0.5) * self.resolution,
            self.origin[1] + (row + 0.5) * self.resolution,
        )

    def is_occupied(self, col: int, row: int, threshold: int = 1) -> bool:
        return bool(self.cells[row, col] >= threshold)

    def occupied_centers(self, threshold: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """World coordinates of every cell center with value >= threshold (cached per threshold)."""
        if self._occ_cache is not None and self._occ_cache[0] == threshold and self._occ_cache[1] is self.cells:
            return self._occ_cache[2]
        rows, cols = np.nonzero(self.cells >= threshold)
        xs = self.origin[0] + (cols + 0.5) * self.resolution
        ys = self.origin[1] + (rows + 0.5) * self.resolution
        self._occ_cache = (threshold, self.cells, (xs, ys))
        return xs, ys

    def invalidate(self) -> None:
        self._occ_cache = None

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.cells.copy(), self.resolution, self.origin)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.origin == other.origin
            and np.array_equal(self.cells, other.cells)
        )


def encode_rle(cells: np.ndarray) -> str:
    """Row-major run-length encoding of a binary grid, e.g. ``"0*12,1*3"``."""
    flat = (np.asarray(cells).ravel() > 0).astype(np.int8)
    if flat.size == 0:
        return ""
    change = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate(([0], change))
    lengths = np.diff(np.concatenate((starts, [flat.size])))
    return ",".join(f"{flat[s]}*{n}" for s, n in zip(starts, lengths))


def decode_rle(text: str, width: int, height: int) -> np.ndarray:
    parts = []
    for run in filter(None, text.split(",")):
        bit, _, count = run.partition("*")
        if bit not in ("0", "1") or not count.isdigit():
            raise ValueError(f"bad run {run!r}")
        parts.append(np.full(int(count), int(bit), dtype=np.uint8))
    flat = np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)
    if flat.size != width * height:
        raise ValueError(f"RLE holds {flat.size} cells, expected {width * height}")
    return flat.reshape(height, width)
