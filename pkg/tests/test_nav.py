import math

import numpy as np
import pytest

from cisru_sim import nav
from cisru_sim.geometry import Pose2D
from cisru_sim.grid import CellState, GridMap
from oracles import dijkstra_times, random_obstacle_grid


def free_grid(width=10, height=10, resolution=1.0):
    grid = GridMap(width, height, resolution)
    grid.cells[:] = CellState.FREE
    return grid


class TestObstacleDistance:
    def test_center_obstacle_hand_values(self):
        grid = free_grid(3, 3)
        grid.cells[1, 1] = CellState.OBSTACLE
        W = nav.obstacle_distance(grid)
        assert W[1, 1] == 0.0
        for r, c in ((0, 1), (1, 0), (1, 2), (2, 1)):
            assert W[r, c] == pytest.approx(1.0)
        # two-sided update with Tx = Ty = 1: (2 + sqrt(2)) / 2
        for r, c in ((0, 0), (0, 2), (2, 0), (2, 2)):
            assert W[r, c] == pytest.approx(1.0 + 1.0 / math.sqrt(2.0))

    def test_all_obstacle_zero_field(self):
        grid = free_grid(4, 4)
        grid.cells[:] = CellState.OBSTACLE
        assert (nav.obstacle_distance(grid) == 0.0).all()

    def test_no_obstacles_infinite(self):
        assert np.isinf(nav.obstacle_distance(free_grid())).all()

    def test_scales_with_resolution(self):
        grid = free_grid(5, 5, resolution=0.5)
        grid.cells[2, 2] = CellState.OBSTACLE
        W = nav.obstacle_distance(grid)
        assert W[2, 3] == pytest.approx(0.5)


class TestSpeedMap:
    def test_obstacle_zero(self):
        grid = free_grid(3, 3)
        grid.cells[0, 0] = CellState.OBSTACLE
        V = nav.speed_map(nav.obstacle_distance(grid), grid, nav.NavConfig())
        assert V[0, 0] == 0.0

    def test_saturates_at_one(self):
        grid = free_grid(9, 9)
        grid.cells[0, 0] = CellState.OBSTACLE
        V = nav.speed_map(nav.obstacle_distance(grid), grid, nav.NavConfig(w_max=2.0))
        assert V[8, 8] == 1.0

    def test_unknown_gets_default_half(self):
        grid = free_grid(3, 3)
        grid.cells[1, 1] = CellState.UNKNOWN
        V = nav.speed_map(nav.obstacle_distance(grid), grid, nav.NavConfig())
        assert V[1, 1] == 0.5

    def test_values_within_unit_interval(self):
        grid = random_obstacle_grid(5)
        V = nav.speed_map(nav.obstacle_distance(grid), grid, nav.NavConfig())
        assert (V >= 0.0).all() and (V <= 1.0).all()


class TestArrivalTime:
    def test_goal_time_zero_and_unique(self):
        grid = free_grid(6, 6)
        V = nav.speed_map(nav.obstacle_distance(grid), grid, nav.NavConfig())
        T = nav.arrival_time(V, (2, 3), grid.resolution)
        assert T[3, 2] == 0.0
        assert (T >= 0.0).all()
        assert np.count_nonzero(T == 0.0) == 1

    def test_goal_in_obstacle_raises(self):
        grid = free_grid(4, 4)
        grid.cells[1, 1] = CellState.OBSTACLE
        V = nav.speed_map(nav.obstacle_distance(grid), grid, nav.NavConfig())
        with pytest.raises(nav.GoalInObstacle):
            nav.arrival_time(V, (1, 1), grid.resolution)

    def test_separating_wall_infinite_start(self):
        grid = free_grid(9, 5)
        grid.cells[:, 4] = CellState.OBSTACLE
        V = nav.speed_map(nav.obstacle_distance(grid), grid, nav.NavConfig())
        T = nav.arrival_time(V, (7, 2), grid.resolution)
        assert np.isinf(T[2, 1])

    def test_dijkstra_agreement_uniform_open_grid(self):
        V = np.ones((20, 20))
        T = nav.arrival_time(V, (3, 4), 1.0)
        D = dijkstra_times(V, (3, 4), 1.0)
        mask = D > 1e-9
        rel = np.abs(T[mask] - D[mask]) / D[mask]
        assert rel.max() <= 0.15

    def test_monotone_under_speed_decrease(self):
        grid = random_obstacle_grid(3)
        V = nav.speed_map(nav.obstacle_distance(grid), grid, nav.NavConfig())
        rows, cols = np.nonzero(V > 0)
        goal = (int(cols[len(cols) // 2]), int(rows[len(rows) // 2]))
        T0 = nav.arrival_time(V, goal, 1.0)
        V2 = V.copy()
        pick = 7
        if (cols[pick], rows[pick]) == goal:
            pick += 1
        V2[rows[pick], cols[pick]] *= 0.25
        T1 = nav.arrival_time(V2, goal, 1.0)
        both = np.isfinite(T0) & np.isfinite(T1)
        assert (T1[both] >= T0[both] - 1e-9).all()


class TestExtractPath:
    def test_start_at_goal_trivial_path(self):
        grid = free_grid(8, 8)
        cfg = nav.NavConfig()
        start = Pose2D(3.2, 3.1)
        goal = Pose2D(3.3, 3.2)
        path = nav.plan(grid, start, goal, cfg)
        assert isinstance(path, nav.Path)
        assert len(path.points) <= 2
        assert path.points[0].distance_to(start) == 0.0

    def test_enclosed_goal_unreachable(self):
        grid = free_grid(9, 9)
        for r, c in ((3, 3), (3, 4), (3, 5), (4, 3), (4, 5), (5, 3), (5, 4), (5, 5)):
            grid.cells[r, c] = CellState.OBSTACLE
        result = nav.plan(grid, Pose2D(0.5, 0.5), Pose2D(4.5, 4.5), nav.NavConfig())
        assert isinstance(result, nav.Unreachable)

    def test_t_strictly_decreases_along_path(self):
        cfg = nav.NavConfig(goal_tolerance=0.5)
        for seed in range(6):
            grid = random_obstacle_grid(seed)
            W = nav.obstacle_distance(grid)
            V = nav.speed_map(W, grid, cfg)
            free = np.argwhere(V > 0.4)
            rng = np.random.default_rng(seed)
            (r1, c1), (r2, c2) = free[rng.choice(len(free), 2, replace=False)]
            goal_cell = (int(c2), int(r2))
            T = nav.arrival_time(V, goal_cell, grid.resolution)
            if not np.isfinite(T[r1, c1]):
                continue
            start = grid.cell_to_world(int(c1), int(r1))
            goal = grid.cell_to_world(*goal_cell)
            path = nav.extract_path(T, start, goal, grid, cfg, V=V)
            if isinstance(path, nav.Unreachable):
                continue
            interp = nav.planner._Interp(T)
            values = []
            for p in path.points:
                u = (p.x - grid.origin.x) / grid.resolution - 0.5
                v = (p.y - grid.origin.y) / grid.resolution - 0.5
                values.append(interp.value(u, v))
            assert all(b < a for a, b in zip(values, values[1:]))

    def test_path_spacing_and_occupancy(self):
        cfg = nav.NavConfig()
        grid = random_obstacle_grid(12)
        V = nav.speed_map(nav.obstacle_distance(grid), grid, cfg)
        start = grid.cell_to_world(1, 1)
        goal = grid.cell_to_world(17, 16)
        if V[1, 1] <= 0 or V[16, 17] <= 0:
            pytest.skip("blocked endpoints for this seed")
        path = nav.plan(grid, start, goal, cfg)
        if isinstance(path, nav.Unreachable):
            pytest.skip("unreachable for this seed")
        for a, b in zip(path.points, path.points[1:]):
            assert a.distance_to(b) <= grid.resolution + 1e-9
        for p in path.points:
            col, row = grid.world_to_cell(p.x, p.y)
            assert V[row, col] > 0.0


class TestPlan:
    def test_empty_map_near_straight(self):
        grid = free_grid(30, 30, resolution=0.5)
        start = Pose2D(2.0, 2.0)
        goal = Pose2D(12.0, 11.0)
        path = nav.plan(grid, start, goal, nav.NavConfig())
        assert isinstance(path, nav.Path)
        euclid = start.distance_to(goal)
        assert path.total_length <= 1.1 * euclid

    def test_corridor_path_prefers_clearance(self):
        # corridor 5 cells wide: FM2 should run closer to the center line
        # than the wall-hugging occupancy shortest path
        grid = free_grid(30, 7, resolution=1.0)
        grid.cells[0, :] = CellState.OBSTACLE
        grid.cells[6, :] = CellState.OBSTACLE
        W = nav.obstacle_distance(grid)
        path = nav.plan(grid, Pose2D(1.5, 3.5), Pose2D(28.5, 3.5), nav.NavConfig())
        assert isinstance(path, nav.Path)
        clearances = []
        for p in path.points:
            col, row = grid.world_to_cell(p.x, p.y)
            clearances.append(W[row, col])
        assert np.mean(clearances) >= 2.0  # center of a 5-wide corridor

    def test_goal_equals_start(self):
        grid = free_grid(5, 5)
        pose = Pose2D(2.5, 2.5, 0.3)
        path = nav.plan(grid, pose, pose, nav.NavConfig())
        assert isinstance(path, nav.Path)
        assert path.total_length == 0.0


class TestFollow:
    def test_aligned_on_path_full_speed(self):
        cfg = nav.NavConfig(v_max=0.5, lookahead=1.0)
        points = [Pose2D(x * 0.2, 0.0) for x in range(60)]
        path = nav.Path.from_points(points)
        v, omega = nav.follow(path, Pose2D(0.0, 0.0, 0.0), cfg)
        assert v == pytest.approx(0.5, rel=1e-3)
        assert abs(omega) < 1e-6

    def test_at_final_point_stops(self):
        cfg = nav.NavConfig()
        path = nav.Path.from_points([Pose2D(0, 0), Pose2D(1, 0)])
        assert nav.follow(path, Pose2D(1.0, 0.0), cfg) == (0.0, 0.0)

    def test_right_angle_error_saturates_turn_rate(self):
        cfg = nav.NavConfig(v_max=0.5, omega_max=0.8, lookahead=1.0)
        points = [Pose2D(0.0, y * 0.5) for y in range(20)]
        path = nav.Path.from_points(points)
        v, omega = nav.follow(path, Pose2D(0.0, 0.0, -math.pi / 2), cfg)
        assert abs(omega) == pytest.approx(0.8)
        assert v < 0.5  # reduced with heading error


class TestKernels:
    def test_python_cython_bit_identical(self):
        kernels = nav.available_kernels()
        if len(kernels) < 2:
            pytest.skip("compiled kernel not built")
        rng = np.random.default_rng(0)
        for _ in range(5):
            V = rng.random((30, 40))
            V[V < 0.2] = 0.0
            V[5, 7] = 1.0
            rows = np.array([5], dtype=np.int64)
            cols = np.array([7], dtype=np.int64)
            for diag in (False, True):
                a = kernels["python"](V, 0.5, rows, cols, diag)
                b = kernels["cython"](V, 0.5, rows, cols, diag)
                assert np.array_equal(a, b)


class TestFieldDump:
    def test_roundtrip_with_inf(self):
        field = np.array([[1.5, np.inf], [0.0, 2.25]])
        text = nav.dump_field(field)
        assert "inf" in text
        back = nav.load_field(text)
        assert np.array_equal(np.isinf(field), np.isinf(back))
        finite = np.isfinite(field)
        assert np.allclose(field[finite], back[finite])
