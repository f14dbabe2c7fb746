"""Deterministic discrete-time world kernel.

Owns the ground-truth terrain grid, all entities, rover kinematics, scripted
world events, and the simulation clock. Single-threaded by design: the
gateway loop is the only writer, and snapshots handed to other modules are
treated as read-only values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .geometry import Pose2D, normalize_angle
from .grid import CellState, GridMap, OutOfBounds


class ParseError(Exception):
    """Scenario document failed validation; message names the offending field."""


class EntityKind(str, Enum):
    ROVER = "Rover"
    ASTRONAUT = "Astronaut"
    SOLAR_PANEL_ARRAY = "SolarPanelArray"
    BASE_STATION = "BaseStation"
    TOOL_SLOT = "ToolSlot"
    SAMPLE_POINT = "SamplePoint"


class Posture(str, Enum):
    UPRIGHT = "Upright"
    FALLEN = "Fallen"


@dataclass
class Defect:
    local_x: float
    local_y: float
    has_crack: bool = True


@dataclass
class Entity:
    entity_id: str
    kind: EntityKind
    pose: Pose2D
    footprint_radius: float = 0.0
    posture: Posture | None = None
    defects: list[Defect] = field(default_factory=list)
    interest_score: float | None = None
    tool_kind: str | None = None  # ToolSlot only: kind of the tool initially racked

    def __post_init__(self):
        if self.footprint_radius < 0:
            raise ParseError(f"entity {self.entity_id}: footprint_radius must be >= 0")
        if self.defects and self.kind != EntityKind.SOLAR_PANEL_ARRAY:
            raise ParseError(f"entity {self.entity_id}: defects only valid on SolarPanelArray")
        if self.posture is not None and self.kind != EntityKind.ASTRONAUT:
            raise ParseError(f"entity {self.entity_id}: posture only valid on Astronaut")
        if self.kind == EntityKind.ASTRONAUT and self.posture is None:
            self.posture = Posture.UPRIGHT

    def copy(self) -> "Entity":
        return replace(self, defects=list(self.defects))


@dataclass
class SimClock:
    tick: int = 0
    dt: float = 1.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class WorldSnapshot:
    """Read-only view handed to perception and the executives."""

    tick: int
    grid: GridMap
    entities: dict  # entity_id -> Entity (copies)

    def entity(self, entity_id: str) -> Entity | None:
        return self.entities.get(entity_id)

    def of_kind(self, kind: EntityKind) -> list[Entity]:
        return [e for e in self.entities.values() if e.kind == kind]


@dataclass
class VelocityCommand:
    v: float = 0.0
    omega: float = 0.0


class World:
    """Mutable simulation state advanced one tick at a time."""

    def __init__(self, grid: GridMap, clock: SimClock | None = None,
                 v_max: float = 0.5, omega_max: float = 0.8,
                 astronaut_speed: float = 0.8):
        self.grid = grid
        self.clock = clock or SimClock()
        self.v_max = v_max
        self.omega_max = omega_max
        self.astronaut_speed = astronaut_speed
        self.entities: dict[str, Entity] = {}
        self._waypoints: dict[str, list[tuple[float, float]]] = {}
        self._script: list[tuple[int, dict]] = []  # (tick, event), sorted on use

    # -- construction -------------------------------------------------------

    def add_entity(self, entity: Entity):
        if entity.entity_id in self.entities:
            raise ParseError(f"duplicate entity id {entity.entity_id}")
        if not self.grid.contains_point(entity.pose.x, entity.pose.y):
            raise ParseError(f"entity {entity.entity_id}: pose outside grid")
        self.entities[entity.entity_id] = entity

    def schedule_event(self, tick: int, event: dict):
        self._script.append((int(tick), event))
        self._script.sort(key=lambda te: te[0])

    def set_waypoints(self, entity_id: str, points: list[tuple[float, float]]):
        self._waypoints[entity_id] = list(points)

    def rovers(self) -> list[Entity]:
        return [e for e in self.entities.values() if e.kind == EntityKind.ROVER]

    # -- stepping -----------------------------------------------------------

    def step(self, commands: dict[str, VelocityCommand]) -> list[dict]:
        """Advance one tick. Returns event dicts (collisions, applied script)."""
        events: list[dict] = []
        dt = self.clock.dt
        for rover in self.rovers():
            cmd = commands.get(rover.entity_id, VelocityCommand())
            v = max(-self.v_max, min(self.v_max, cmd.v))
            omega = max(-self.omega_max, min(self.omega_max, cmd.omega))
            collided = self._advance_pose(rover, v, omega, dt)
            if collided:
                events.append({"type": "Collision", "entity": rover.entity_id,
                               "x": rover.pose.x, "y": rover.pose.y})
        self._advance_astronauts(dt)
        self.clock.tick += 1
        events.extend(self._apply_script(self.clock.tick))
        return events

    def _advance_pose(self, rover: Entity, v: float, omega: float, dt: float) -> bool:
        """Unicycle update with obstacle clamping. Returns True on collision."""
        theta = rover.pose.theta
        new_theta = normalize_angle(theta + omega * dt)
        dx = v * math.cos(theta) * dt
        dy = v * math.sin(theta) * dt
        dist = math.hypot(dx, dy)
        if dist < 1e-12:
            rover.pose = Pose2D(rover.pose.x, rover.pose.y, new_theta)
            return False
        # walk the segment in quarter-cell substeps, stop before entering an
        # obstacle cell or leaving the grid
        substep = self.grid.resolution / 4.0
        n = max(1, int(math.ceil(dist / substep)))
        x, y = rover.pose.x, rover.pose.y
        collided = False
        for i in range(1, n + 1):
            t = i / n
            nx, ny = rover.pose.x + dx * t, rover.pose.y + dy * t
            try:
                col, row = self.grid.world_to_cell(nx, ny)
            except OutOfBounds:
                collided = True
                break
            if self.grid.state_at(col, row) == CellState.OBSTACLE:
                collided = True
                break
            x, y = nx, ny
        rover.pose = Pose2D(x, y, new_theta)
        return collided

    def _advance_astronauts(self, dt: float):
        for eid, points in self._waypoints.items():
            ent = self.entities.get(eid)
            if ent is None or not points or ent.posture == Posture.FALLEN:
                continue
            tx, ty = points[0]
            dist = math.hypot(tx - ent.pose.x, ty - ent.pose.y)
            step = self.astronaut_speed * dt
            if dist <= step or dist < 1e-9:
                ent.pose = Pose2D(tx, ty, ent.pose.theta)
                points.pop(0)
            else:
                frac = step / dist
                ent.pose = Pose2D(
                    ent.pose.x + (tx - ent.pose.x) * frac,
                    ent.pose.y + (ty - ent.pose.y) * frac,
                    math.atan2(ty - ent.pose.y, tx - ent.pose.x),
                )

    def apply_due_events(self, now: int) -> list[dict]:
        """Apply scripted world events whose time has come (used by the
        kernel at load for tick-0 events; step() handles the rest)."""
        return self._apply_script(now)

    def _apply_script(self, now: int) -> list[dict]:
        applied = []
        while self._script and self._script[0][0] <= now:
            _, event = self._script.pop(0)
            self._apply_world_event(event)
            applied.append({"type": "ScriptedEvent", "event": event})
        return applied

    def _apply_world_event(self, event: dict):
        kind = event.get("event")
        if kind == "fall":
            ent = self.entities[event["entity"]]
            ent.posture = Posture.FALLEN
            self._waypoints.pop(ent.entity_id, None)
        elif kind == "stand":
            self.entities[event["entity"]].posture = Posture.UPRIGHT
        elif kind == "add_obstacle":
            for col, row in event["cells"]:
                if self.grid.in_bounds(col, row):
                    self.grid.set_state(col, row, CellState.OBSTACLE)
        elif kind == "clear_obstacle":
            for col, row in event["cells"]:
                if self.grid.in_bounds(col, row):
                    self.grid.set_state(col, row, CellState.FREE)
        elif kind == "waypoints":
            self.set_waypoints(event["entity"], [tuple(p) for p in event["points"]])
        elif kind == "spawn":
            self.add_entity(_entity_from_doc(event["entity_def"]))
        elif kind == "remove":
            self.entities.pop(event["entity"], None)
            self._waypoints.pop(event["entity"], None)
        else:
            raise ParseError(f"script: unknown world event {kind!r}")

    # -- sensing ------------------------------------------------------------

    def raycast_reveal(self, sensor_pose: Pose2D, fov_angle: float,
                       sensor_range: float) -> dict[tuple[int, int], CellState]:
        """Ground-truth cells visible from the sensor within the FOV cone.

        Rays stop at (and include) the first obstacle cell; cells behind it
        are not revealed.
        """
        if sensor_range < 0:
            raise ValueError("range must be >= 0")
        if not (0 < fov_angle <= 2 * math.pi + 1e-9):
            raise ValueError("fov_angle must be in (0, 2*pi]")
        res = self.grid.resolution
        out: dict[tuple[int, int], CellState] = {}
        if sensor_range <= 0:
            return out
        try:
            c0 = self.grid.world_to_cell(sensor_pose.x, sensor_pose.y)
            out[c0] = self.grid.state_at(*c0)
        except OutOfBounds:
            return out

        spacing = res / sensor_range
        full = fov_angle >= 2 * math.pi - 1e-9
        n_rays = max(3, int(math.ceil(fov_angle / spacing)))
        if full:
            angles = sensor_pose.theta + np.arange(n_rays) * (2 * math.pi / n_rays)
        else:
            angles = sensor_pose.theta + np.linspace(-fov_angle / 2, fov_angle / 2, n_rays + 1)
        n_steps = max(1, int(math.ceil(sensor_range / (res / 2.0))))
        ts = np.arange(1, n_steps + 1) * (res / 2.0)
        ts = np.minimum(ts, sensor_range)

        px = sensor_pose.x + np.cos(angles)[:, None] * ts[None, :]
        py = sensor_pose.y + np.sin(angles)[:, None] * ts[None, :]
        cols = np.floor((px - self.grid.origin.x) / res).astype(np.int64)
        rows = np.floor((py - self.grid.origin.y) / res).astype(np.int64)
        inside = (cols >= 0) & (cols < self.grid.width) & (rows >= 0) & (rows < self.grid.height)
        safe_cols = np.clip(cols, 0, self.grid.width - 1)
        safe_rows = np.clip(rows, 0, self.grid.height - 1)
        states = self.grid.cells[safe_rows, safe_cols]
        obstacle = inside & (states == CellState.OBSTACLE)

        n_r, n_s = cols.shape
        oob_first = np.where(~inside, np.arange(n_s)[None, :], n_s).min(axis=1)
        obs_any = obstacle.any(axis=1)
        obs_first = np.where(obs_any, obstacle.argmax(axis=1), n_s)
        stop = np.minimum(oob_first, np.where(obs_any, obs_first + 1, n_s))
        for r in range(n_r):
            for s in range(int(stop[r])):
                key = (int(cols[r, s]), int(rows[r, s]))
                if key not in out:
                    out[key] = CellState(int(states[r, s]))
        return out

    # -- snapshots and hashing ----------------------------------------------

    def snapshot(self) -> WorldSnapshot:
        return WorldSnapshot(
            tick=self.clock.tick,
            grid=self.grid,
            entities={eid: e.copy() for eid, e in self.entities.items()},
        )

    def state_hash(self) -> str:
        import hashlib

        h = hashlib.sha256(self.grid.cells.tobytes())
        for eid in sorted(self.entities):
            e = self.entities[eid]
            h.update(eid.encode())
            h.update(repr((e.pose.x, e.pose.y, e.pose.theta, e.posture)).encode())
        h.update(str(self.clock.tick).encode())
        return h.hexdigest()


# -- scenario parsing (grid + entities portion) -------------------------------


def _require(doc: dict, key: str, ctx: str):
    if key not in doc:
        raise ParseError(f"{ctx}: missing field '{key}'")
    return doc[key]


def _entity_from_doc(doc: dict) -> Entity:
    eid = str(_require(doc, "id", "entity"))
    kind_raw = _require(doc, "kind", f"entity {eid}")
    try:
        kind = EntityKind(kind_raw)
    except ValueError:
        raise ParseError(f"entity {eid}: unknown kind {kind_raw!r}") from None
    pose = Pose2D(float(_require(doc, "x", f"entity {eid}")),
                  float(_require(doc, "y", f"entity {eid}")),
                  float(doc.get("theta", 0.0)))
    posture = None
    if "posture" in doc:
        try:
            posture = Posture(doc["posture"])
        except ValueError:
            raise ParseError(f"entity {eid}: unknown posture {doc['posture']!r}") from None
    defects = [
        Defect(float(d["x"]), float(d["y"]), bool(d.get("has_crack", True)))
        for d in doc.get("defects", [])
    ]
    score = doc.get("interest_score")
    if score is not None:
        score = float(score)
        if not (0.0 <= score <= 1.0):
            raise ParseError(f"entity {eid}: interest_score must be in [0,1]")
    return Entity(
        entity_id=eid,
        kind=kind,
        pose=pose,
        footprint_radius=float(doc.get("footprint_radius", 0.0)),
        posture=posture,
        defects=defects,
        interest_score=score,
        tool_kind=doc.get("tool_kind"),
    )


def load_scenario(doc: dict, dt: float = 1.0, v_max: float = 0.5,
                  omega_max: float = 0.8, astronaut_speed: float = 0.8) -> World:
    """Build a World from the scenario document's grid and entity sections.

    The gateway owns the full document format; this reads the `grid` and
    `entities` keys and validates them. Raises ParseError with the offending
    field on malformed input.
    """
    grid_doc = _require(doc, "grid", "scenario")
    rows = _require(grid_doc, "rows", "grid")
    if not rows:
        raise ParseError("grid: rows must be non-empty")
    height = len(rows)
    width = len(rows[0])
    resolution = float(_require(grid_doc, "resolution", "grid"))
    if resolution <= 0:
        raise ParseError("grid: resolution must be positive")
    origin = Pose2D.from_dict(grid_doc.get("origin", {}))
    grid = GridMap(width, height, resolution, origin)
    for i, line in enumerate(rows):
        if len(line) != width:
            raise ParseError(f"grid: row {i} has length {len(line)}, expected {width}")
        row = height - 1 - i
        for col, ch in enumerate(line):
            if ch == ".":
                grid.cells[row, col] = CellState.FREE
            elif ch == "#":
                grid.cells[row, col] = CellState.OBSTACLE
            else:
                raise ParseError(f"grid: row {i} col {col}: illegal cell {ch!r} in ground truth")
    world = World(grid, SimClock(0, dt), v_max=v_max, omega_max=omega_max,
                  astronaut_speed=astronaut_speed)
    for ent_doc in doc.get("entities", []):
        world.add_entity(_entity_from_doc(ent_doc))
    return world
