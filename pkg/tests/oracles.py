"""Independent reference implementations used to check the planner and the
fusion pipeline. These stay deliberately separate from the package code."""

from __future__ import annotations

import heapq
import math

import numpy as np

from cisru_sim.grid import CellState, GridMap


def dijkstra_times(V: np.ndarray, goal_cell: tuple[int, int], h: float) -> np.ndarray:
    """8-connected Dijkstra over the speed map with edge cost
    len * (1/Vi + 1/Vj) / 2, len in {h, h*sqrt(2)}. Diagonal moves require
    both orthogonal cells passable (no squeezing between touching
    obstacles), matching the wavefront solver's reachability."""
    height, width = V.shape
    col, row = goal_cell
    dist = np.full((height, width), np.inf)
    if V[row, col] <= 0:
        return dist
    dist[row, col] = 0.0
    pq = [(0.0, row, col)]
    diag = math.sqrt(2.0)
    while pq:
        d, r, c = heapq.heappop(pq)
        if d > dist[r, c]:
            continue
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nr, nc = r + dr, c + dc
                if not (0 <= nr < height and 0 <= nc < width):
                    continue
                if V[nr, nc] <= 0:
                    continue
                if dr and dc and (V[r, nc] <= 0 or V[nr, c] <= 0):
                    continue
                length = h * diag if (dr and dc) else h
                nd = d + length * (1.0 / V[r, c] + 1.0 / V[nr, nc]) / 2.0
                if nd < dist[nr, nc]:
                    dist[nr, nc] = nd
                    heapq.heappush(pq, (nd, nr, nc))
    return dist


def occupancy_shortest_path(grid: GridMap, start_cell: tuple[int, int],
                            goal_cell: tuple[int, int]) -> list[tuple[int, int]] | None:
    """Plain 8-connected shortest path over the occupancy grid (unit speeds,
    obstacle cells excluded). Returns [(col,row), ...] or None."""
    height, width = grid.height, grid.width
    blocked = grid.cells == CellState.OBSTACLE
    sc, sr = start_cell
    gc, gr = goal_cell
    dist = np.full((height, width), np.inf)
    prev: dict[tuple[int, int], tuple[int, int]] = {}
    dist[sr, sc] = 0.0
    pq = [(0.0, sr, sc)]
    diag = math.sqrt(2.0)
    while pq:
        d, r, c = heapq.heappop(pq)
        if d > dist[r, c]:
            continue
        if (c, r) == (gc, gr):
            break
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nr, nc = r + dr, c + dc
                if not (0 <= nr < height and 0 <= nc < width) or blocked[nr, nc]:
                    continue
                nd = d + (diag if (dr and dc) else 1.0)
                if nd < dist[nr, nc]:
                    dist[nr, nc] = nd
                    prev[(nc, nr)] = (c, r)
                    heapq.heappush(pq, (nd, nr, nc))
    if not np.isfinite(dist[gr, gc]):
        return None
    path = [(gc, gr)]
    while path[-1] != (sc, sr):
        path.append(prev[path[-1]])
    path.reverse()
    return path


def brute_force_rect_corners(grid: GridMap) -> list[tuple[int, int]]:
    """Corners of axis-aligned filled rectangles: obstacle cells whose 3x3
    neighborhood contains exactly four obstacle cells (a 2x2 quadrant)."""
    binary = (grid.cells == CellState.OBSTACLE).astype(int)
    padded = np.pad(binary, 1)
    corners = []
    for row in range(grid.height):
        for col in range(grid.width):
            if not binary[row, col]:
                continue
            window = padded[row:row + 3, col:col + 3]
            if window.sum() == 4:
                corners.append((col, row))
    return corners


def random_obstacle_grid(seed: int, width: int = 20, height: int = 20,
                         density: float = 0.15, resolution: float = 1.0) -> GridMap:
    rng = np.random.default_rng(seed)
    grid = GridMap(width, height, resolution)
    obstacles = rng.random((height, width)) < density
    grid.cells[:] = np.where(obstacles, CellState.OBSTACLE, CellState.FREE)
    return grid


def _free_space_connected(grid: GridMap) -> bool:
    free = grid.cells != CellState.OBSTACLE
    if not free.any():
        return False
    seen = np.zeros_like(free)
    rows, cols = np.nonzero(free)
    stack = [(int(rows[0]), int(cols[0]))]
    seen[rows[0], cols[0]] = True
    while stack:
        r, c = stack.pop()
        for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < grid.height and 0 <= nc < grid.width \
                    and free[nr, nc] and not seen[nr, nc]:
                seen[nr, nc] = True
                stack.append((nr, nc))
    return bool((seen == free).all())


def rock_field_grid(seed: int, width: int = 20, height: int = 20,
                    density: float = 0.15, resolution: float = 1.0) -> GridMap:
    """Scattered rock blocks covering `density` of the cells, with fully
    connected free space (degenerate disconnected draws are rejected)."""
    base = np.random.default_rng(seed)
    for attempt in range(50):
        rng = np.random.default_rng(base.integers(1 << 62))
        grid = GridMap(width, height, resolution)
        grid.cells[:] = CellState.FREE
        target = int(density * width * height)
        count = 0
        while count < target:
            w = int(rng.integers(1, 4))
            h = int(rng.integers(1, 4))
            c0 = int(rng.integers(0, width - w + 1))
            r0 = int(rng.integers(0, height - h + 1))
            block = grid.cells[r0:r0 + h, c0:c0 + w]
            count += int((block != CellState.OBSTACLE).sum())
            grid.cells[r0:r0 + h, c0:c0 + w] = CellState.OBSTACLE
        if _free_space_connected(grid):
            return grid
    raise RuntimeError(f"no connected rock field for seed {seed}")
