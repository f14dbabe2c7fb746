"""Fast Marching Square planner and the kinematic path follower.

Two marching passes: distance-to-obstacle saturated into a speed map, then
arrival time from the goal; the path is gradient descent on the interpolated
arrival-time field. Unknown cells stay traversable at reduced speed so plans
can reach into unexplored terrain.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import Pose2D, normalize_angle
from ..grid import CellState, GridMap
from .kernel import march


class GoalInObstacle(Exception):
    """Goal cell has zero speed; no arrival-time field can be grown from it."""


class Unreachable:
    """Terminal planning outcome, consumed by the executive's replan."""

    def __repr__(self):
        return "Unreachable"


UNREACHABLE = Unreachable()


@dataclass
class NavConfig:
    w_max: float = 2.0            # obstacle-distance saturation (m)
    unknown_speed: float = 0.5    # speed assigned to unexplored cells
    goal_tolerance: float = 0.3   # m
    step_budget: int = 0          # 0 = auto: 10 * (width + height)
    v_max: float = 0.5            # m/s
    omega_max: float = 0.8        # rad/s
    lookahead: float = 1.0        # m

    def __post_init__(self):
        if self.w_max <= 0:
            raise ValueError("w_max must be positive")
        if not (0.0 <= self.unknown_speed <= 1.0):
            raise ValueError("unknown_speed must be in [0,1]")


@dataclass
class Path:
    points: list[Pose2D] = field(default_factory=list)
    total_length: float = 0.0

    @staticmethod
    def from_points(points: list[Pose2D]) -> "Path":
        length = 0.0
        for a, b in zip(points, points[1:]):
            length += a.distance_to(b)
        return Path(points, length)

    def final(self) -> Pose2D:
        return self.points[-1]


def obstacle_distance(grid: GridMap) -> np.ndarray:
    """Distance to the nearest obstacle cell, |grad W| = 1 with W = 0 on
    obstacles. All +inf when the grid has no obstacles."""
    obstacle = grid.cells == CellState.OBSTACLE
    rows, cols = np.nonzero(obstacle)
    if rows.size == 0:
        return np.full((grid.height, grid.width), np.inf)
    speed = np.ones((grid.height, grid.width), dtype=np.float64)
    return march(speed, grid.resolution, rows.astype(np.int64), cols.astype(np.int64))


def speed_map(W: np.ndarray, grid: GridMap, config: NavConfig) -> np.ndarray:
    """Saturate the obstacle distance into [0,1] speeds; unknown cells remain
    traversable at the configured reduced speed, obstacles are impassable."""
    V = np.minimum(W, config.w_max) / config.w_max
    V[grid.cells == CellState.UNKNOWN] = config.unknown_speed
    V[grid.cells == CellState.OBSTACLE] = 0.0
    return V


def arrival_time(V: np.ndarray, goal_cell: tuple[int, int], resolution: float) -> np.ndarray:
    """Arrival-time field |grad T| = 1/V with T(goal) = 0. The front crosses
    cell corners too (but never between touching obstacles), keeping arrival
    times aligned with 8-connected graph distances."""
    col, row = goal_cell
    if not (0 <= row < V.shape[0] and 0 <= col < V.shape[1]):
        raise GoalInObstacle(f"goal cell {goal_cell} out of bounds")
    if V[row, col] <= 0.0:
        raise GoalInObstacle(f"goal cell {goal_cell} has zero speed")
    return march(V, resolution,
                 np.array([row], dtype=np.int64), np.array([col], dtype=np.int64),
                 diagonals=True)


class _Interp:
    """Bilinear interpolation of a field over cell centers, with +inf corners
    replaced by a large finite plateau so gradients point back inward."""

    def __init__(self, T: np.ndarray):
        finite = T[np.isfinite(T)]
        self.big = (float(finite.max()) * 2.0 + 10.0) if finite.size else 1.0
        self.F = np.where(np.isfinite(T), T, self.big)
        self.h_idx = T.shape[0] - 1
        self.w_idx = T.shape[1] - 1

    def value(self, u: float, v: float) -> float:
        """u = column coordinate, v = row coordinate, in cell units where the
        center of cell (col,row) sits at (col,row)."""
        u = min(max(u, 0.0), float(self.w_idx))
        v = min(max(v, 0.0), float(self.h_idx))
        c0 = min(int(u), self.w_idx - 1) if self.w_idx > 0 else 0
        r0 = min(int(v), self.h_idx - 1) if self.h_idx > 0 else 0
        fu = u - c0
        fv = v - r0
        F = self.F
        if self.w_idx == 0 and self.h_idx == 0:
            return float(F[0, 0])
        if self.w_idx == 0:
            return float(F[r0, 0] * (1 - fv) + F[r0 + 1, 0] * fv)
        if self.h_idx == 0:
            return float(F[0, c0] * (1 - fu) + F[0, c0 + 1] * fu)
        return float(
            F[r0, c0] * (1 - fu) * (1 - fv)
            + F[r0, c0 + 1] * fu * (1 - fv)
            + F[r0 + 1, c0] * (1 - fu) * fv
            + F[r0 + 1, c0 + 1] * fu * fv
        )

    def gradient(self, u: float, v: float, delta: float = 0.25) -> tuple[float, float]:
        gu = (self.value(u + delta, v) - self.value(u - delta, v)) / (2 * delta)
        gv = (self.value(u, v + delta) - self.value(u, v - delta)) / (2 * delta)
        return gu, gv


def extract_path(T: np.ndarray, start_pose: Pose2D, goal_pose: Pose2D,
                 grid: GridMap, config: NavConfig, V: np.ndarray | None = None):
    """Gradient descent on the interpolated arrival time from the start.

    Returns a Path whose sampled points strictly decrease in T, or
    UNREACHABLE when the start is cut off or the step budget runs out.
    """
    res = grid.resolution
    start_col, start_row = grid.world_to_cell(start_pose.x, start_pose.y)
    if not np.isfinite(T[start_row, start_col]):
        return UNREACHABLE
    budget = config.step_budget or 10 * (grid.width + grid.height)
    interp = _Interp(T)
    # quantization floor: the descent converges onto the goal cell's center,
    # which sits up to res*sqrt(2)/2 from a goal at the cell corner
    tolerance = max(config.goal_tolerance, res * 0.7072)

    def to_uv(x: float, y: float) -> tuple[float, float]:
        return ((x - grid.origin.x) / res - 0.5, (y - grid.origin.y) / res - 0.5)

    def to_world(u: float, v: float) -> tuple[float, float]:
        return (grid.origin.x + (u + 0.5) * res, grid.origin.y + (v + 0.5) * res)

    def passable(x: float, y: float) -> bool:
        if V is None:
            return True
        try:
            col, row = grid.world_to_cell(x, y)
        except Exception:
            return False
        return V[row, col] > 0.0

    points = [Pose2D(start_pose.x, start_pose.y, start_pose.theta)]
    x, y = start_pose.x, start_pose.y
    u, v = to_uv(x, y)
    t_cur = interp.value(u, v)
    goal_xy = (goal_pose.x, goal_pose.y)
    step_len = 0.5  # cell units = resolution / 2 in world units

    for _ in range(budget):
        if math.hypot(x - goal_xy[0], y - goal_xy[1]) <= tolerance:
            return Path.from_points(points)
        moved = False
        gu, gv = interp.gradient(u, v)
        norm = math.hypot(gu, gv)
        if norm > 1e-12:
            cu, cv = u - step_len * gu / norm, v - step_len * gv / norm
            cx, cy = to_world(cu, cv)
            t_new = interp.value(cu, cv)
            if t_new < t_cur - 1e-12 and passable(cx, cy):
                u, v, x, y, t_cur = cu, cv, cx, cy, t_new
                moved = True
        if not moved:
            # plateau or blocked: hop toward the best grid node instead
            nc, nr = int(round(u)), int(round(v))
            nc = min(max(nc, 0), grid.width - 1)
            nr = min(max(nr, 0), grid.height - 1)
            best = None
            if T[nr, nc] < t_cur - 1e-12:
                best = (nc, nr)
            else:
                for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ac, ar = nc + dc, nr + dr
                    if 0 <= ac < grid.width and 0 <= ar < grid.height \
                            and T[ar, ac] < t_cur - 1e-12:
                        if best is None or T[ar, ac] < T[best[1], best[0]]:
                            best = (ac, ar)
            if best is None:
                return UNREACHABLE
            u, v = float(best[0]), float(best[1])
            x, y = to_world(u, v)
            t_cur = float(T[best[1], best[0]])
        heading = math.atan2(y - points[-1].y, x - points[-1].x)
        points.append(Pose2D(x, y, heading))
    return UNREACHABLE


def plan(grid: GridMap, start: Pose2D, goal: Pose2D, config: NavConfig | None = None):
    """Full planning pipeline. Returns Path or UNREACHABLE; raises
    GoalInObstacle when the goal cell itself is impassable."""
    config = config or NavConfig()
    if start.distance_to(goal) <= config.goal_tolerance:
        pts = [start] if start.distance_to(goal) < 1e-9 else [start, Pose2D(goal.x, goal.y, start.theta)]
        return Path.from_points(pts)
    W = obstacle_distance(grid)
    V = speed_map(W, grid, config)
    goal_cell = grid.world_to_cell(goal.x, goal.y)
    T = arrival_time(V, goal_cell, grid.resolution)
    return extract_path(T, start, goal, grid, config, V=V)


def follow(path: Path, pose: Pose2D, config: NavConfig, dt: float | None = None) -> tuple[float, float]:
    """Pure-pursuit tracking: aim at the first path point at least a lookahead
    away, slow down with heading error, stop inside the goal tolerance."""
    if not path.points:
        return (0.0, 0.0)
    final = path.final()
    remaining = pose.distance_to(final)
    if remaining <= config.goal_tolerance:
        return (0.0, 0.0)
    # nearest path point, then first point >= lookahead ahead of the pose
    dists = [pose.distance_to(p) for p in path.points]
    nearest = min(range(len(dists)), key=dists.__getitem__)
    target = path.points[-1]
    for i in range(nearest, len(path.points)):
        if dists[i] >= config.lookahead:
            target = path.points[i]
            break
    err = normalize_angle(pose.heading_to(target.x, target.y) - pose.theta)
    omega = config.omega_max * max(-1.0, min(1.0, err / (math.pi / 2)))
    v = config.v_max * max(0.0, math.cos(err))
    if dt:
        v = min(v, remaining / dt)  # do not overshoot the final point
    return (v, omega)


# -- field dump format (debugging / plots) ------------------------------------


def dump_field(values: np.ndarray) -> str:
    """Plain-text matrix, row-major, `inf` tokens for unreached cells."""
    out = io.StringIO()
    for row in values:
        out.write(" ".join("inf" if not np.isfinite(x) else f"{x:.6g}" for x in row))
        out.write("\n")
    return out.getvalue()


def load_field(text: str) -> np.ndarray:
    rows = []
    for line in text.strip().splitlines():
        rows.append([np.inf if tok == "inf" else float(tok) for tok in line.split()])
    return np.array(rows, dtype=np.float64)
