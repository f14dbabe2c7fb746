"""Geometric perception oracle: detections with occlusion, instance tracking,
fall/interaction events, panel defect inspection, and semantic grid labeling.

Pure functions over world snapshots; the only state is the tracker's id
counter. Detection carries the ground-truth entity id as the instance handle
(this module stands in for the vision stack, so the oracle may know it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2D, normalize_angle
from .grid import CellState, GridMap, OutOfBounds, SemLabel
from .world import Entity, EntityKind, Posture, WorldSnapshot


class OutOfInspectRange(Exception):
    pass


DETECTABLE = {
    EntityKind.ASTRONAUT: "Astronaut",
    EntityKind.ROVER: "Rover",
    EntityKind.SOLAR_PANEL_ARRAY: "SolarPanel",
}

CLASS_LABELS = {
    "Astronaut": SemLabel.ASTRONAUT,
    "Rover": SemLabel.ROVER,
    "SolarPanel": SemLabel.SOLAR_PANEL,
}


@dataclass
class PerceptConfig:
    d_int: float = 1.0            # interactable region width (m)
    gate: float = 2.0             # tracker association gate (m)
    stale_window: int = 20        # ticks unseen before a track goes stale
    inspect_range: float = 2.0    # m, panel defect inspection
    analyze_range: float = 1.2    # m, soil sample scoring
    miss_probability: float = 0.0 # optional seeded dropout, off in acceptance


@dataclass
class Detection:
    cls: str
    world_pos: tuple[float, float]
    confidence: float
    source_sensor: str
    entity_id: str


@dataclass
class Track:
    track_id: str
    cls: str
    last_pos: tuple[float, float]
    last_seen_tick: int
    status: str = "Live"  # Live | Stale
    entity_id: str = ""


@dataclass
class FallEvent:
    astronaut_track: str
    entity_id: str
    tick: int


@dataclass
class InteractionEvent:
    astronaut_track: str
    asset_track: str
    astronaut_id: str
    asset_id: str
    distance: float
    tick: int


@dataclass
class DefectReport:
    panel_id: str
    local_point: tuple[float, float]
    world_point: tuple[float, float]
    tick: int


def line_of_sight(grid: GridMap, from_pose: Pose2D, to_x: float, to_y: float,
                  clear_radius: float = 0.0) -> bool:
    """True when no obstacle cell blocks the segment. The final clear_radius
    meters are exempt so a target standing on its own obstacle cells (panels,
    rocks) stays visible."""
    dx, dy = to_x - from_pose.x, to_y - from_pose.y
    dist = math.hypot(dx, dy)
    check_len = dist - clear_radius - grid.resolution
    if check_len <= 0:
        return True
    step = grid.resolution / 2.0
    n = max(1, int(math.ceil(check_len / step)))
    for i in range(1, n + 1):
        t = min(i * step, check_len) / dist
        try:
            col, row = grid.world_to_cell(from_pose.x + dx * t, from_pose.y + dy * t)
        except OutOfBounds:
            continue
        if grid.state_at(col, row) == CellState.OBSTACLE:
            return False
    return True


def detect(snapshot: WorldSnapshot, sensor_pose: Pose2D, fov: float,
           sensor_range: float, source_sensor: str,
           rng=None, miss_probability: float = 0.0) -> list[Detection]:
    """One detection per unoccluded entity whose footprint intersects the FOV
    cone. Confidence falls off linearly with distance."""
    out = []
    for ent in snapshot.entities.values():
        cls = DETECTABLE.get(ent.kind)
        if cls is None or ent.entity_id == source_sensor:
            continue
        dist = sensor_pose.distance_to(ent.pose)
        if dist - ent.footprint_radius > sensor_range:
            continue
        if fov < 2 * math.pi - 1e-9 and dist > 1e-9:
            bearing = normalize_angle(sensor_pose.heading_to(ent.pose.x, ent.pose.y)
                                      - sensor_pose.theta)
            slack = math.asin(min(1.0, ent.footprint_radius / dist)) if dist > ent.footprint_radius else math.pi
            if abs(bearing) > fov / 2 + slack:
                continue
        if not line_of_sight(snapshot.grid, sensor_pose, ent.pose.x, ent.pose.y,
                             clear_radius=ent.footprint_radius):
            continue
        if miss_probability > 0.0 and rng is not None and rng.random() < miss_probability:
            continue
        out.append(Detection(
            cls=cls,
            world_pos=(ent.pose.x, ent.pose.y),
            confidence=max(0.0, 1.0 - dist / sensor_range) if sensor_range > 0 else 0.0,
            source_sensor=source_sensor,
            entity_id=ent.entity_id,
        ))
    return out


class Tracker:
    """Greedy nearest-neighbor instance tracker. Track ids are never reused."""

    def __init__(self, config: PerceptConfig | None = None):
        self.config = config or PerceptConfig()
        self.tracks: list[Track] = []
        self._counter = 0

    def _new_id(self) -> str:
        self._counter += 1
        return f"t{self._counter:04d}"

    def track_update(self, detections: list[Detection], tick: int) -> list[Track]:
        cfg = self.config
        for tr in self.tracks:
            if tr.status == "Live" and tick - tr.last_seen_tick >= cfg.stale_window:
                tr.status = "Stale"
        live = [t for t in self.tracks if t.status == "Live"]
        pairs = []
        for di, det in enumerate(detections):
            for tr in live:
                if tr.cls != det.cls:
                    continue
                d = math.hypot(det.world_pos[0] - tr.last_pos[0],
                               det.world_pos[1] - tr.last_pos[1])
                if d <= cfg.gate:
                    pairs.append((d, tr.track_id, di, tr))
        pairs.sort(key=lambda p: (p[0], p[1], p[2]))
        used_tracks: set[str] = set()
        used_dets: set[int] = set()
        for d, tid, di, tr in pairs:
            if tid in used_tracks or di in used_dets:
                continue
            used_tracks.add(tid)
            used_dets.add(di)
            det = detections[di]
            tr.last_pos = det.world_pos
            tr.last_seen_tick = tick
            tr.entity_id = det.entity_id
        for di, det in enumerate(detections):
            if di in used_dets:
                continue
            self.tracks.append(Track(
                track_id=self._new_id(), cls=det.cls, last_pos=det.world_pos,
                last_seen_tick=tick, entity_id=det.entity_id,
            ))
        return self.tracks

    def live_tracks(self) -> list[Track]:
        return [t for t in self.tracks if t.status == "Live"]


def detect_fall(tracks: list[Track], snapshot: WorldSnapshot,
                visible_ids: set[str]) -> list[FallEvent]:
    """Fall events for live astronaut tracks whose entity is down and
    currently seen by some rover sensor."""
    events = []
    for tr in tracks:
        if tr.status != "Live" or tr.cls != "Astronaut":
            continue
        ent = snapshot.entity(tr.entity_id)
        if ent is None or ent.posture != Posture.FALLEN:
            continue
        if ent.entity_id not in visible_ids:
            continue
        events.append(FallEvent(tr.track_id, ent.entity_id, snapshot.tick))
    return events


def detect_interaction(tracks: list[Track], snapshot: WorldSnapshot,
                       d_int: float) -> list[InteractionEvent]:
    """One event per (astronaut, panel-or-rover) track pair whose footprint
    boundary distance is within the interactable region (inclusive)."""
    if d_int <= 0:
        raise ValueError("d_int must be positive")
    astro = [t for t in tracks if t.status == "Live" and t.cls == "Astronaut"]
    assets = [t for t in tracks if t.status == "Live" and t.cls in ("SolarPanel", "Rover")]
    events = []
    for at in astro:
        a_ent = snapshot.entity(at.entity_id)
        if a_ent is None:
            continue
        for st in assets:
            s_ent = snapshot.entity(st.entity_id)
            if s_ent is None:
                continue
            gap = a_ent.pose.distance_to(s_ent.pose) - a_ent.footprint_radius - s_ent.footprint_radius
            if gap <= d_int:
                events.append(InteractionEvent(
                    astronaut_track=at.track_id, asset_track=st.track_id,
                    astronaut_id=a_ent.entity_id, asset_id=s_ent.entity_id,
                    distance=max(0.0, gap), tick=snapshot.tick,
                ))
    return events


def inspect_panel(panel: Entity, rover_pose: Pose2D, inspect_range: float,
                  tick: int) -> list[DefectReport]:
    """Crack reports for a panel in range, defect positions mapped through the
    panel's pose into world coordinates."""
    gap = rover_pose.distance_to(panel.pose) - panel.footprint_radius
    if gap > inspect_range:
        raise OutOfInspectRange(
            f"panel {panel.entity_id} is {gap:.2f} m away, range {inspect_range:.2f} m")
    reports = []
    for defect in panel.defects:
        if not defect.has_crack:
            continue
        wx, wy = panel.pose.transform_point(defect.local_x, defect.local_y)
        reports.append(DefectReport(
            panel_id=panel.entity_id,
            local_point=(defect.local_x, defect.local_y),
            world_point=(wx, wy),
            tick=tick,
        ))
    return reports


def semantic_overlay(known_map: GridMap, snapshot: WorldSnapshot,
                     visible_ids: set[str]) -> GridMap:
    """Label the agent's known cells: entity footprints by class, leftover
    free cells as regolith, bare obstacle cells as rock. In place."""
    cells = known_map.cells
    sem = known_map.semantic
    known = cells != CellState.UNKNOWN
    sem[known & (cells == CellState.FREE)] = SemLabel.REGOLITH
    sem[known & (cells == CellState.OBSTACLE)] = SemLabel.ROCK
    res = known_map.resolution
    for ent in snapshot.entities.values():
        cls = DETECTABLE.get(ent.kind)
        if cls is None or ent.entity_id not in visible_ids:
            continue
        label = CLASS_LABELS[cls]
        radius = max(ent.footprint_radius, res / 2)
        c_min = int(math.floor((ent.pose.x - radius - known_map.origin.x) / res))
        c_max = int(math.floor((ent.pose.x + radius - known_map.origin.x) / res))
        r_min = int(math.floor((ent.pose.y - radius - known_map.origin.y) / res))
        r_max = int(math.floor((ent.pose.y + radius - known_map.origin.y) / res))
        for row in range(max(0, r_min), min(known_map.height - 1, r_max) + 1):
            for col in range(max(0, c_min), min(known_map.width - 1, c_max) + 1):
                if not known[row, col]:
                    continue
                center = known_map.cell_to_world(col, row)
                if center.distance_to(ent.pose) <= radius:
                    sem[row, col] = label
    sem[~known] = SemLabel.NONE
    return known_map
