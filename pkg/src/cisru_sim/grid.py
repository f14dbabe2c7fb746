"""Occupancy plus semantic grid maps and the cell/world coordinate mapping.

Cell states and semantic labels are stored as small-integer numpy arrays in
row-major order (row 0 is the map's southern edge, i.e. lowest y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .geometry import Pose2D


class CellState(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OBSTACLE = 2


class SemLabel(IntEnum):
    NONE = -1
    ASTRONAUT = 0
    ROCK = 1
    ROVER = 2
    SOLAR_PANEL = 3
    REGOLITH = 4


CELL_CHARS = {CellState.UNKNOWN: "?", CellState.FREE: ".", CellState.OBSTACLE: "#"}
CHAR_CELLS = {v: k for k, v in CELL_CHARS.items()}

SEM_CHARS = {
    SemLabel.NONE: " ",
    SemLabel.ASTRONAUT: "A",
    SemLabel.ROCK: "K",
    SemLabel.ROVER: "V",
    SemLabel.SOLAR_PANEL: "P",
    SemLabel.REGOLITH: "r",
}
CHAR_SEM = {v: k for k, v in SEM_CHARS.items()}


class OutOfBounds(Exception):
    """A world position fell outside the grid."""


@dataclass
class GridMap:
    width: int
    height: int
    resolution: float
    origin: Pose2D = field(default_factory=Pose2D)
    cells: np.ndarray = None
    semantic: np.ndarray = None

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.cells is None:
            self.cells = np.full((self.height, self.width), CellState.UNKNOWN, dtype=np.uint8)
        if self.semantic is None:
            self.semantic = np.full((self.height, self.width), SemLabel.NONE, dtype=np.int8)
        assert self.cells.shape == (self.height, self.width)
        assert self.semantic.shape == (self.height, self.width)

    # -- coordinate mapping ------------------------------------------------

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        """Return (col, row) of the cell containing the world point.

        Raises OutOfBounds when the point lies outside the grid.
        """
        col = math.floor((x - self.origin.x) / self.resolution)
        row = math.floor((y - self.origin.y) / self.resolution)
        if not (0 <= col < self.width and 0 <= row < self.height):
            raise OutOfBounds(f"({x:.3f}, {y:.3f}) outside {self.width}x{self.height} grid")
        return (col, row)

    def cell_to_world(self, col: int, row: int) -> Pose2D:
        """Center of the cell, as a pose with zero heading."""
        return Pose2D(
            self.origin.x + (col + 0.5) * self.resolution,
            self.origin.y + (row + 0.5) * self.resolution,
        )

    def in_bounds(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height

    def contains_point(self, x: float, y: float) -> bool:
        try:
            self.world_to_cell(x, y)
            return True
        except OutOfBounds:
            return False

    # -- accessors ---------------------------------------------------------

    def state_at(self, col: int, row: int) -> CellState:
        return CellState(self.cells[row, col])

    def set_state(self, col: int, row: int, state: CellState):
        self.cells[row, col] = state
        if state == CellState.UNKNOWN:
            self.semantic[row, col] = SemLabel.NONE

    def known_count(self) -> int:
        return int(np.count_nonzero(self.cells != CellState.UNKNOWN))

    def copy(self) -> "GridMap":
        return GridMap(
            self.width,
            self.height,
            self.resolution,
            self.origin,
            self.cells.copy(),
            self.semantic.copy(),
        )

    def same_shape_as(self, other: "GridMap") -> bool:
        return (
            self.width == other.width
            and self.height == other.height
            and abs(self.resolution - other.resolution) < 1e-12
        )

    # -- dump format (row strings, row 0 printed last) ----------------------

    def to_dump(self) -> dict:
        cell_rows = []
        sem_rows = []
        for row in range(self.height - 1, -1, -1):
            cell_rows.append("".join(CELL_CHARS[CellState(v)] for v in self.cells[row]))
            sem_rows.append("".join(SEM_CHARS[SemLabel(v)] for v in self.semantic[row]))
        return {
            "width": self.width,
            "height": self.height,
            "resolution": self.resolution,
            "origin": self.origin.as_dict(),
            "rows": cell_rows,
            "semantic_rows": sem_rows,
        }

    @staticmethod
    def from_dump(doc: dict) -> "GridMap":
        width = int(doc["width"])
        height = int(doc["height"])
        grid = GridMap(width, height, float(doc["resolution"]), Pose2D.from_dict(doc.get("origin", {})))
        rows = doc["rows"]
        if len(rows) != height:
            raise ValueError(f"expected {height} rows, got {len(rows)}")
        for i, line in enumerate(rows):
            row = height - 1 - i
            if len(line) != width:
                raise ValueError(f"row {i} has length {len(line)}, expected {width}")
            grid.cells[row] = [CHAR_CELLS[ch] for ch in line]
        for i, line in enumerate(doc.get("semantic_rows", [])):
            row = height - 1 - i
            grid.semantic[row] = [CHAR_SEM[ch] for ch in line]
        return grid

    def state_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(self.cells.tobytes())
        h.update(self.semantic.tobytes())
        return h.hexdigest()
