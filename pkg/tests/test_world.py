import math

import pytest

from cisru_sim.geometry import Pose2D, normalize_angle
from cisru_sim.grid import CellState, GridMap, OutOfBounds
from cisru_sim.world import (
    Entity,
    EntityKind,
    ParseError,
    Posture,
    SimClock,
    VelocityCommand,
    World,
    load_scenario,
)


def open_world(width=10, height=10, resolution=1.0, dt=1.0):
    grid = GridMap(width, height, resolution)
    grid.cells[:] = CellState.FREE
    return World(grid, SimClock(0, dt), v_max=2.0, omega_max=2.0)


def add_rover(world, x=5.0, y=5.0, theta=0.0, rid="r1"):
    rover = Entity(rid, EntityKind.ROVER, Pose2D(x, y, theta), footprint_radius=0.3)
    world.add_entity(rover)
    return rover


class TestAngles:
    def test_wraps_into_half_open_interval(self):
        assert normalize_angle(math.pi) == pytest.approx(math.pi)
        assert normalize_angle(-math.pi) == pytest.approx(math.pi)
        assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
        assert normalize_angle(0.5) == pytest.approx(0.5)

    def test_pose_normalizes_theta(self):
        assert Pose2D(0, 0, 2 * math.pi + 0.3).theta == pytest.approx(0.3)


class TestStep:
    def test_zero_command_keeps_pose(self):
        world = open_world()
        rover = add_rover(world)
        world.step({"r1": VelocityCommand(0.0, 0.0)})
        assert rover.pose == Pose2D(5.0, 5.0, 0.0)

    def test_unit_velocity_advances_one_meter(self):
        world = open_world()
        rover = add_rover(world, theta=0.0)
        world.step({"r1": VelocityCommand(1.0, 0.0)})
        assert rover.pose.x == pytest.approx(6.0)
        assert rover.pose.y == pytest.approx(5.0)

    def test_pure_rotation(self):
        world = open_world()
        rover = add_rover(world)
        world.step({"r1": VelocityCommand(0.0, math.pi / 2)})
        assert rover.pose.theta == pytest.approx(math.pi / 2)

    def test_commands_clamped_to_limits(self):
        world = open_world()
        world.v_max = 0.5
        rover = add_rover(world, theta=0.0)
        world.step({"r1": VelocityCommand(10.0, 0.0)})
        assert rover.pose.x == pytest.approx(5.5)

    def test_collision_clamps_at_boundary(self):
        world = open_world()
        world.grid.cells[5, 7] = CellState.OBSTACLE  # cell x in [7,8)
        rover = add_rover(world, x=6.5, y=5.5, theta=0.0)
        events = world.step({"r1": VelocityCommand(2.0, 0.0)})
        assert any(e["type"] == "Collision" for e in events)
        assert rover.pose.x < 7.0  # never inside the obstacle cell

    def test_tick_increments_and_events_apply(self):
        world = open_world()
        astro = Entity("a1", EntityKind.ASTRONAUT, Pose2D(2, 2, 0))
        world.add_entity(astro)
        world.schedule_event(1, {"event": "fall", "entity": "a1"})
        world.step({})
        assert world.clock.tick == 1
        assert astro.posture == Posture.FALLEN

    def test_entities_conserved_without_script(self):
        world = open_world()
        add_rover(world)
        before = set(world.entities)
        for _ in range(5):
            world.step({"r1": VelocityCommand(0.3, 0.1)})
        assert set(world.entities) == before


class TestRaycast:
    def test_zero_range_empty(self):
        world = open_world()
        assert world.raycast_reveal(Pose2D(5, 5, 0), 2 * math.pi, 0.0) == {}

    def test_full_reveal_open_map(self):
        world = open_world(6, 6)
        out = world.raycast_reveal(Pose2D(3, 3, 0), 2 * math.pi, 20.0)
        assert len(out) == 36
        assert all(state == CellState.FREE for state in out.values())

    def test_occlusion_behind_wall(self):
        world = open_world(11, 11)
        for row in range(11):
            if row != 0:
                world.grid.cells[row, 5] = CellState.OBSTACLE
        out = world.raycast_reveal(Pose2D(2.5, 5.5, 0), 2 * math.pi, 20.0)
        # wall cells facing the sensor are revealed, cells behind are not
        assert any(col == 5 and state == CellState.OBSTACLE
                   for (col, row), state in out.items())
        assert not any(col > 5 and row > 2 for (col, row) in out)

    def test_subset_of_ground_truth(self):
        world = open_world(8, 8)
        world.grid.cells[3, 3] = CellState.OBSTACLE
        out = world.raycast_reveal(Pose2D(1.5, 1.5, 0.3), 2 * math.pi, 5.0)
        for (col, row), state in out.items():
            assert state == world.grid.state_at(col, row)


class TestCellMapping:
    def test_floor_rule(self):
        grid = GridMap(10, 10, 1.0)
        assert grid.world_to_cell(2.4, 3.6) == (2, 3)

    def test_center_rule(self):
        grid = GridMap(10, 10, 1.0)
        pose = grid.cell_to_world(2, 3)
        assert (pose.x, pose.y) == (2.5, 3.5)

    def test_out_of_bounds(self):
        grid = GridMap(10, 10, 1.0)
        with pytest.raises(OutOfBounds):
            grid.world_to_cell(-1.0, 0.0)

    def test_roundtrip_quantization(self):
        grid = GridMap(7, 5, 0.5)
        for col in range(7):
            for row in range(5):
                center = grid.cell_to_world(col, row)
                assert grid.world_to_cell(center.x, center.y) == (col, row)


class TestLoadScenario:
    def test_minimal_grid_only(self):
        world = load_scenario({"grid": {"resolution": 1.0, "rows": ["..", ".."]}})
        assert world.grid.width == 2 and world.grid.height == 2
        assert not world.entities

    def test_row_order_bottom_up(self):
        world = load_scenario({"grid": {"resolution": 1.0, "rows": ["#.", ".."]}})
        # first row string is the top of the map
        assert world.grid.state_at(0, 1) == CellState.OBSTACLE
        assert world.grid.state_at(0, 0) == CellState.FREE

    def test_malformed_kind_names_field(self):
        doc = {"grid": {"resolution": 1.0, "rows": [".."]},
               "entities": [{"id": "x", "kind": "Blimp", "x": 0.5, "y": 0.5}]}
        with pytest.raises(ParseError, match="kind"):
            load_scenario(doc)

    def test_unknown_cell_char_illegal(self):
        with pytest.raises(ParseError, match="illegal cell"):
            load_scenario({"grid": {"resolution": 1.0, "rows": ["?."]}})

    def test_determinism_same_doc_same_hash(self):
        doc = {"grid": {"resolution": 0.5, "rows": ["....", "..#.", "...."]},
               "entities": [{"id": "r", "kind": "Rover", "x": 0.7, "y": 0.7}]}
        assert load_scenario(doc).state_hash() == load_scenario(doc).state_hash()


class TestDeterminism:
    def test_identical_command_stream_identical_hash(self):
        def run():
            world = open_world()
            add_rover(world, theta=0.2)
            world.schedule_event(3, {"event": "add_obstacle", "cells": [[9, 9]]})
            for i in range(10):
                world.step({"r1": VelocityCommand(0.4, 0.05 * (i % 3))})
            return world.state_hash()

        assert run() == run()
