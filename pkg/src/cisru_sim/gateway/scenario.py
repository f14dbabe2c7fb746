"""Scenario document parsing and validation.

A scenario is one JSON document with top-level keys `grid`, `entities`,
`assignments`, `goals`, `script`, `seed`, `config`. Grid rows use `.` for
free and `#` for obstacle (unknown is illegal in ground truth); timed script
events split into world events (falls, obstacles, waypoints) and protocol
events (prompt responses, telecommands, partitions, storage confirmation).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..mas import AutonomyLevel, GoalKind
from ..world import ParseError

WORLD_EVENTS = {"fall", "stand", "add_obstacle", "clear_obstacle", "waypoints",
                "spawn", "remove"}
PROTOCOL_EVENTS = {"prompt_response", "confirm_storage_emptied", "partition",
                   "set_level", "telecommand", "issue_goal"}


@dataclass
class GoalScript:
    at_tick: int
    to: str
    kind: str
    params: dict
    required_level: str = "E4"
    goal_id: str | None = None


@dataclass
class ScenarioSpec:
    name: str
    seed: int
    doc: dict
    goals: list[GoalScript] = field(default_factory=list)
    world_events: list[tuple[int, dict]] = field(default_factory=list)
    protocol_events: list[tuple[int, dict]] = field(default_factory=list)
    assignments: dict = field(default_factory=dict)
    config_overrides: dict = field(default_factory=dict)
    roles: dict = field(default_factory=dict)         # rover entity id -> role
    storage_slots: dict = field(default_factory=dict) # rover entity id -> capacity


def parse_scenario(doc: dict) -> ScenarioSpec:
    if not isinstance(doc, dict):
        raise ParseError("scenario: document must be a JSON object")
    if "grid" not in doc:
        raise ParseError("scenario: missing field 'grid'")
    name = str(doc.get("name", "scenario"))
    seed = int(doc.get("seed", 0))
    spec = ScenarioSpec(name=name, seed=seed, doc=doc,
                        assignments=dict(doc.get("assignments", {})),
                        config_overrides=doc.get("config", {}))

    entity_ids = set()
    for ent in doc.get("entities", []):
        if "id" not in ent:
            raise ParseError("entity: missing field 'id'")
        entity_ids.add(str(ent["id"]))
        if ent.get("kind") == "Rover":
            role = ent.get("role")
            if role not in ("Leader", "Secondary"):
                raise ParseError(f"entity {ent['id']}: rover needs role Leader or Secondary")
            spec.roles[str(ent["id"])] = role
            spec.storage_slots[str(ent["id"])] = int(ent.get("storage_slots", 0))

    for astronaut, asset in spec.assignments.items():
        if astronaut not in entity_ids:
            raise ParseError(f"assignments: unknown astronaut {astronaut!r}")
        if asset not in entity_ids:
            raise ParseError(f"assignments: unknown asset {asset!r}")

    for i, g in enumerate(doc.get("goals", [])):
        ctx = f"goals[{i}]"
        for key in ("at_tick", "to", "kind"):
            if key not in g:
                raise ParseError(f"{ctx}: missing field '{key}'")
        try:
            GoalKind(g["kind"])
        except ValueError:
            raise ParseError(f"{ctx}: unknown goal kind {g['kind']!r}") from None
        level = g.get("required_level", "E4")
        try:
            AutonomyLevel(level)
        except ValueError:
            raise ParseError(f"{ctx}: unknown level {level!r}") from None
        if g["to"] not in spec.roles:
            raise ParseError(f"{ctx}: addressee {g['to']!r} is not a rover agent")
        spec.goals.append(GoalScript(
            at_tick=int(g["at_tick"]), to=str(g["to"]), kind=str(g["kind"]),
            params=g.get("params", {}), required_level=level,
            goal_id=g.get("goal_id"),
        ))

    for i, ev in enumerate(doc.get("script", [])):
        ctx = f"script[{i}]"
        if "at_tick" not in ev:
            raise ParseError(f"{ctx}: missing field 'at_tick'")
        kind = ev.get("event")
        tick = int(ev["at_tick"])
        if kind in WORLD_EVENTS:
            if kind in ("fall", "stand", "waypoints", "remove") \
                    and ev.get("entity") not in entity_ids:
                raise ParseError(f"{ctx}: unknown entity {ev.get('entity')!r}")
            spec.world_events.append((tick, dict(ev)))
        elif kind in PROTOCOL_EVENTS:
            spec.protocol_events.append((tick, dict(ev)))
        else:
            raise ParseError(f"{ctx}: unknown event kind {kind!r}")

    return spec


def load_scenario_file(path: str) -> ScenarioSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"scenario: cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"scenario: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_scenario(doc)
