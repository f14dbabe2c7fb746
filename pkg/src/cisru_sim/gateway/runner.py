"""The simulation kernel loop: wires world, network, agents, perception,
supervision, and map fusion together, drives everything tick by tick, and
writes the event log. Also the replay verifier."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

from .. import fusion, nav, percept
from ..config import RunConfig, build_config
from ..executive import Executive, Role, TickContext
from ..geometry import Pose2D
from ..grid import GridMap
from ..manip import Arm, StorageState, Tool, ToolKind
from ..mas import (
    AutonomyLevel,
    Goal,
    GoalKind,
    GoalStatus,
    MasMessage,
    MasRouter,
    MessageKind,
    gate_message,
)
from ..netsim import Network
from ..supervise import Supervisor
from ..world import EntityKind, Posture, VelocityCommand, World, load_scenario
from .events import EventLog, LogCorrupt, read_log
from .scenario import ScenarioSpec, parse_scenario

MISSION_CONTROL = "mission_control"
SUPERVISOR = "supervisor"


def _stable_rng(seed: int, tag: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass
class AgentRuntime:
    agent_id: str
    role: Role
    executive: Executive
    rng: random.Random
    storage: StorageState | None = None
    manual_until: int = -1
    manual_cmd: tuple[float, float] = (0.0, 0.0)
    revealed: set = field(default_factory=set)


class SimKernel:
    """Owns all mutable simulation state; single-threaded stepping."""

    def __init__(self, spec: ScenarioSpec, log: EventLog,
                 config: RunConfig | None = None, seed: int | None = None,
                 max_ticks: int | None = None):
        self.spec = spec
        self.seed = spec.seed if seed is None else seed
        self.log = log
        self.config = config or build_config(spec.config_overrides)
        self.max_ticks = max_ticks
        sim = self.config.sim

        self.world = load_scenario(spec.doc, dt=sim.dt, v_max=sim.v_max,
                                   omega_max=sim.omega_max,
                                   astronaut_speed=sim.astronaut_speed)
        for tick, event in spec.world_events:
            self.world.schedule_event(tick, event)

        self.network = Network(seed=self.seed,
                               latency_ticks=self.config.net.latency_ticks,
                               drop_probability=self.config.net.drop_probability)
        self.router = MasRouter(self.network, self.config.net.retransmit_period,
                                emit=self._emit_now)
        self.router.register(MISSION_CONTROL)
        self.router.register(SUPERVISOR)

        self.tools: dict[str, Tool] = {}
        for ent in self.world.entities.values():
            if ent.kind == EntityKind.TOOL_SLOT and ent.tool_kind:
                tool = Tool(f"tool-{ent.entity_id}", ToolKind(ent.tool_kind), ent.entity_id)
                self.tools[tool.tool_id] = tool
            if ent.kind == EntityKind.ASTRONAUT:
                self.router.register(ent.entity_id)

        self.agents: dict[str, AgentRuntime] = {}
        grid = self.world.grid
        mc = self.config.manip
        for rover_id, role_name in spec.roles.items():
            role = Role(role_name)
            known = GridMap(grid.width, grid.height, grid.resolution, grid.origin)
            arm = None
            if role == Role.LEADER:
                arm = Arm(mount_offset=Pose2D(*mc.mount_offset),
                          link_lengths=tuple(mc.link_lengths))
            executive = Executive(
                agent_id=rover_id, role=role, known_map=known,
                nav_config=self.config.nav, exec_config=self.config.executive,
                manip_config=mc, percept_config=self.config.percept, arm=arm)
            storage = None
            slots = spec.storage_slots.get(rover_id, 0)
            if slots > 0:
                storage = StorageState.with_capacity(slots)
            self.agents[rover_id] = AgentRuntime(
                agent_id=rover_id, role=role, executive=executive,
                rng=_stable_rng(self.seed, rover_id), storage=storage)
            self.router.register(rover_id, AutonomyLevel.E4)

        self.tracker = percept.Tracker(self.config.percept)
        self.supervisor = Supervisor(self.config.supervise, dt=sim.dt)
        self.supervisor.assignments = dict(spec.assignments)
        self.fusion_rng_seed = self.seed
        self.fused_map: GridMap | None = None
        self.scripted_goal_ids: list[str] = []
        self._goal_counter = 0
        self._alert_counter = 0
        self._inboxes: dict[str, list[MasMessage]] = {}
        self._pending_commands: list[tuple[dict, object]] = []
        self._last_alerts: list[dict] = []
        self._prompt_case_by_astronaut: dict[str, str] = {}
        self._terminal_goals: set[str] = set()
        self._last_collisions: set[str] = set()
        self._fall_latched: set[str] = set()  # one case per fall episode

        self.log.append(0, "gateway", "ScenarioLoaded",
                        {"name": spec.name, "seed": self.seed,
                         "max_ticks": self.max_ticks, "scenario": spec.doc})
        for event in self.world.apply_due_events(0):
            self.log.append(0, "world", event.pop("type"), event)

    # -- event emission -------------------------------------------------------

    def _emit_now(self, source: str, type_: str, payload: dict):
        self.log.append(self.world.clock.tick, source, type_, payload)

    def _emitter(self, source: str):
        return lambda type_, payload: self._emit_now(source, type_, payload)

    # -- console / scripted commands -------------------------------------------

    def submit_command(self, command: dict, reply=None):
        """Queue a console command; applied at the next tick boundary."""
        self._pending_commands.append((command, reply))

    def next_goal_id(self) -> str:
        self._goal_counter += 1
        return f"g{self._goal_counter:03d}"

    def apply_console_command(self, command: dict) -> tuple[bool, dict]:
        """Returns (ok, result-or-error). Runs at a tick boundary only."""
        now = self.world.clock.tick
        kind = command.get("kind")
        if kind == "IssueGoal":
            agent_id = command.get("to")
            if agent_id not in self.agents:
                return False, {"reason": "UnknownRef", "detail": f"agent {agent_id!r}"}
            try:
                goal_kind = GoalKind(command.get("goal_kind", command.get("kind_name", "")))
            except ValueError:
                return False, {"reason": "UnknownRef",
                               "detail": f"goal kind {command.get('goal_kind')!r}"}
            level = AutonomyLevel(command.get("required_level", "E4"))
            goal = Goal(goal_id=command.get("goal_id") or self.next_goal_id(),
                        kind=goal_kind, required_level=level,
                        params=command.get("params", {}), originator=MISSION_CONTROL)
            message = self.router.make_message(
                MessageKind.GOAL_REQUEST, MISSION_CONTROL, agent_id,
                {"goal": goal.as_dict()}, now, goal.goal_id)
            verdict = gate_message(self.router.level_of(agent_id), message)
            if not verdict.accepted:
                self._emit_now("gateway", "CommandRejected",
                               {"command": "IssueGoal", "reason": verdict.reason})
                return False, {"reason": verdict.reason}
            self.router.relay(message, now)
            self._emit_now("gateway", "GoalIssued",
                           {"goal_id": goal.goal_id, "to": agent_id,
                            "kind": goal_kind.value, "params": goal.params})
            return True, {"goal_id": goal.goal_id}
        if kind == "Telecommand":
            agent_id = command.get("to")
            agent = self.agents.get(agent_id)
            if agent is None:
                return False, {"reason": "UnknownRef", "detail": f"agent {agent_id!r}"}
            message = self.router.make_message(
                MessageKind.TELECOMMAND, MISSION_CONTROL, agent_id,
                {"v": command.get("v", 0.0)}, now)
            verdict = gate_message(self.router.level_of(agent_id), message)
            if not verdict.accepted:
                self._emit_now("gateway", "CommandRejected",
                               {"command": "Telecommand", "reason": verdict.reason})
                return False, {"reason": verdict.reason}
            agent.manual_cmd = (float(command.get("v", 0.0)), float(command.get("omega", 0.0)))
            agent.manual_until = now + int(command.get("duration", 1))
            self._emit_now("gateway", "TelecommandApplied",
                           {"to": agent_id, "v": agent.manual_cmd[0],
                            "omega": agent.manual_cmd[1], "until": agent.manual_until})
            return True, {"until": agent.manual_until}
        if kind == "SetAutonomyLevel":
            agent_id = command.get("agent")
            if agent_id not in self.agents:
                return False, {"reason": "UnknownRef", "detail": f"agent {agent_id!r}"}
            try:
                level = AutonomyLevel(command.get("level"))
            except ValueError:
                return False, {"reason": "UnknownRef", "detail": "bad level"}
            self.router.set_level(agent_id, level)
            self._emit_now("gateway", "AutonomyLevelSet",
                           {"agent": agent_id, "level": level.value})
            return True, {"agent": agent_id, "level": level.value}
        if kind == "PromptResponse":
            case_id = command.get("case_id")
            if case_id is None:
                astronaut = command.get("astronaut")
                case_id = self._prompt_case_by_astronaut.get(astronaut)
            if case_id is None or case_id not in self.supervisor.cases:
                return False, {"reason": "UnknownRef", "detail": "no such case"}
            case = self.supervisor.cases[case_id]
            message = self.router.make_message(
                MessageKind.PROMPT_RESPONSE, case.astronaut_id, SUPERVISOR,
                {"case_id": case_id, "response": command.get("response", "Safe")}, now)
            self.router.relay(message, now)
            return True, {"case_id": case_id}
        if kind == "ConfirmStorageEmptied":
            agent_id = command.get("agent")
            agent = self.agents.get(agent_id)
            if agent is None or agent.storage is None:
                return False, {"reason": "UnknownRef", "detail": f"no storage on {agent_id!r}"}
            base = next((e for e in self.world.entities.values()
                         if e.kind == EntityKind.BASE_STATION), None)
            pose = self.world.entities[agent_id].pose
            if base is not None and pose.distance_to(base.pose) \
                    > base.footprint_radius + self.config.executive.transfer_range:
                self._emit_now("gateway", "CommandRejected",
                               {"command": "ConfirmStorageEmptied",
                                "reason": "SecondaryNotAtBase"})
                return False, {"reason": "SecondaryNotAtBase"}
            removed = agent.storage.empty_all()
            self._emit_now("gateway", "StorageEmptied",
                           {"agent": agent_id, "samples": removed})
            message = self.router.make_message(
                MessageKind.OBSERVATION, MISSION_CONTROL, agent_id,
                {"observation": "StorageEmptied", "samples": removed}, now)
            self.router.relay(message, now)
            return True, {"samples": removed}
        if kind == "AcknowledgeAlert":
            alert_id = command.get("alert_id")
            if not any(a.get("alert_id") == alert_id for a in self._last_alerts):
                return False, {"reason": "UnknownRef", "detail": f"alert {alert_id!r}"}
            self._emit_now("gateway", "AlertAcknowledged", {"alert_id": alert_id})
            return True, {"alert_id": alert_id}
        return False, {"reason": "UnknownRef", "detail": f"command kind {kind!r}"}

    def _run_script_events(self, now: int):
        for tick, event in self.spec.protocol_events:
            if tick != now:
                continue
            kind = event["event"]
            if kind == "prompt_response":
                ok, result = self.apply_console_command({
                    "kind": "PromptResponse", "case_id": event.get("case_id"),
                    "astronaut": event.get("astronaut"),
                    "response": event.get("response", "Safe")})
            elif kind == "confirm_storage_emptied":
                ok, result = self.apply_console_command({
                    "kind": "ConfirmStorageEmptied", "agent": event["agent"]})
            elif kind == "partition":
                self.network.set_partition(event["a"], event["b"], bool(event["flag"]))
                self._emit_now("gateway", "PartitionSet",
                               {"a": event["a"], "b": event["b"], "flag": bool(event["flag"])})
                continue
            elif kind == "set_level":
                ok, result = self.apply_console_command({
                    "kind": "SetAutonomyLevel", "agent": event["agent"],
                    "level": event["level"]})
            elif kind == "telecommand":
                ok, result = self.apply_console_command({
                    "kind": "Telecommand", "to": event["to"], "v": event.get("v", 0.0),
                    "omega": event.get("omega", 0.0),
                    "duration": event.get("duration", 1)})
            elif kind == "issue_goal":
                ok, result = self.apply_console_command({
                    "kind": "IssueGoal", "to": event["to"],
                    "goal_kind": event["goal_kind"],
                    "params": event.get("params", {}),
                    "required_level": event.get("required_level", "E4")})
            else:
                continue
        for goal in self.spec.goals:
            if goal.at_tick != now:
                continue
            goal_id = goal.goal_id or self.next_goal_id()
            ok, result = self.apply_console_command({
                "kind": "IssueGoal", "to": goal.to, "goal_kind": goal.kind,
                "params": goal.params, "required_level": goal.required_level,
                "goal_id": goal_id})
            if ok:
                self.scripted_goal_ids.append(result["goal_id"])

    # -- per-tick pipeline ---------------------------------------------------------

    def step(self):
        now = self.world.clock.tick
        sim = self.config.sim

        # 1. console commands land at the boundary, then scripted protocol events
        pending, self._pending_commands = self._pending_commands, []
        for command, reply in pending:
            ok, result = self.apply_console_command(command)
            if reply is not None:
                reply(ok, result)
        self._run_script_events(now)

        # 2. message delivery (gated, deduplicated)
        self._inboxes = {}
        for message in self.router.step(now):
            self._inboxes.setdefault(message.recipient, []).append(message)
        for message in self._inboxes.get(MISSION_CONTROL, []):
            self._emit_now("gateway", "MissionControlInbox",
                           {"kind": message.kind.value, "payload": message.payload})
            if message.kind == MessageKind.GOAL_STATUS:
                goal_doc = message.payload.get("goal", {})
                if goal_doc.get("status") in ("Achieved", "Failed", "Rejected"):
                    self._terminal_goals.add(goal_doc.get("goal_id"))

        # 3. perception
        snapshot = self.world.snapshot()
        all_detections: list[percept.Detection] = []
        visible_ids: set[str] = set()
        for agent_id, agent in self.agents.items():
            pose = snapshot.entities[agent_id].pose
            dets = percept.detect(snapshot, pose, sim.sensor_fov, sim.sensor_range,
                                  source_sensor=agent_id)
            for det in dets:
                visible_ids.add(det.entity_id)
            all_detections.extend(dets)
        deduped: dict[str, percept.Detection] = {}
        for det in all_detections:
            kept = deduped.get(det.entity_id)
            if kept is None or det.confidence > kept.confidence:
                deduped[det.entity_id] = det
        tracks = self.tracker.track_update(list(deduped.values()), now)
        falls = percept.detect_fall(tracks, snapshot, visible_ids)
        interactions = percept.detect_interaction(tracks, snapshot,
                                                  self.config.percept.d_int)

        # 4. map reveal + semantic overlay per agent
        if now % max(1, sim.reveal_every) == 0:
            for agent_id, agent in self.agents.items():
                pose = snapshot.entities[agent_id].pose
                revealed = self.world.raycast_reveal(pose, sim.sensor_fov, sim.sensor_range)
                known = agent.executive.known_map
                for (col, row), state in revealed.items():
                    known.cells[row, col] = state
                agent.revealed.update(revealed.keys())
                percept.semantic_overlay(known, snapshot, visible_ids)

        # 5. supervision: responses, falls, timeouts, assignments
        for message in self._inboxes.get(SUPERVISOR, []):
            if message.kind != MessageKind.PROMPT_RESPONSE:
                continue
            case_id = message.payload.get("case_id")
            response = message.payload.get("response", "Safe")
            outcome, alert = self.supervisor.on_prompt_response(case_id, response, now)
            self._emit_now("supervisor", "PromptResponseProcessed",
                           {"case_id": case_id, "response": response, "outcome": outcome})
            if outcome in ("ClosedSafe", "Escalated"):
                self._emit_now("supervisor", "EmergencyClosed"
                               if outcome == "ClosedSafe" else "EmergencyEscalated",
                               {"case_id": case_id, "outcome": outcome})
            if alert is not None:
                self._route_alert(alert)
        for entity_id in list(self._fall_latched):
            ent = snapshot.entity(entity_id)
            if ent is None or ent.posture != Posture.FALLEN:
                self._fall_latched.discard(entity_id)
        for fall in falls:
            if fall.entity_id in self._fall_latched:
                continue
            self._fall_latched.add(fall.entity_id)
            opened = self.supervisor.on_fall(fall, now)
            if opened is None:
                continue
            case, prompt = opened
            self._prompt_case_by_astronaut[case.astronaut_id] = case.case_id
            self._emit_now("supervisor", "EmergencyDetected",
                           {"case_id": case.case_id, "astronaut": case.astronaut_id,
                            "track": case.astronaut_track, "t_detect": case.t_detect})
            message = self.router.make_message(
                MessageKind.PROMPT, SUPERVISOR, case.astronaut_id,
                {"case_id": case.case_id, "question": prompt.question}, now)
            self.router.relay(message, now)
            self._emit_now("supervisor", "PromptSent",
                           {"case_id": case.case_id, "astronaut": case.astronaut_id})
        for case, alert in self.supervisor.check_timeouts(now):
            self._emit_now("supervisor", "EmergencyEscalated",
                           {"case_id": case.case_id, "outcome": "Timeout"})
            self._route_alert(alert)
        alerts, compliance_logs = self.supervisor.check_assignments(interactions, now)
        for entry in compliance_logs:
            self._emit_now("supervisor", "AssignmentLog", entry)
        for alert in alerts:
            self._route_alert(alert)

        # 6. executives, leader first for determinism
        halt = len(self.supervisor.open_cases()) > 0
        commands: dict[str, VelocityCommand] = {}
        ordered = sorted(self.agents.values(),
                         key=lambda a: (a.role != Role.LEADER, a.agent_id))
        collisions = self._last_collisions
        for agent in ordered:
            executive = agent.executive
            partner_id = next((a.agent_id for a in self.agents.values()
                               if a.agent_id != agent.agent_id), None)
            partner_storage = None
            if partner_id is not None:
                partner = self.agents[partner_id]
                dist = snapshot.entities[agent.agent_id].pose.distance_to(
                    snapshot.entities[partner_id].pose)
                if partner.storage is not None and \
                        dist <= self.config.executive.transfer_range:
                    partner_storage = partner.storage
            ctx = TickContext(
                now=now, dt=sim.dt, snapshot=snapshot,
                inbound=self._inboxes.get(agent.agent_id, []),
                halt=halt, level=self.router.level_of(agent.agent_id).value,
                emit=self._emitter(agent.agent_id),
                send=self._sender(agent.agent_id),
                report_error=self._error_reporter(agent.agent_id),
                rng=agent.rng, tools=self.tools,
                own_storage=agent.storage, partner_id=partner_id,
                partner_storage=partner_storage,
                collided=agent.agent_id in collisions,
            )
            v, omega = executive.tick(ctx)
            if agent.manual_until > now:
                v, omega = agent.manual_cmd
            commands[agent.agent_id] = VelocityCommand(v, omega)

        # 7. cooperative map fusion at the sync interval
        if sim.fusion_sync_interval > 0 and now > 0 \
                and now % sim.fusion_sync_interval == 0:
            self.fusion_sync(now)

        # 8. advance the world
        step_events = self.world.step(commands)
        self._last_collisions = {e["entity"] for e in step_events
                                 if e["type"] == "Collision"}
        new_tick = self.world.clock.tick
        for event in step_events:
            etype = event.pop("type")
            self.log.append(new_tick, "world", etype, event)

    def _sender(self, agent_id: str):
        def send(kind: MessageKind, recipient: str, payload: dict, goal_id=None):
            message = self.router.make_message(kind, agent_id, recipient, payload,
                                               self.world.clock.tick, goal_id)
            self.router.relay(message, self.world.clock.tick)
        return send

    def _error_reporter(self, agent_id: str):
        def report(error):
            error.source = error.source or agent_id
            now = self.world.clock.tick
            self._emit_now(agent_id, "ErrorReport",
                           {"code": error.code, "handled": error.handled,
                            "severity": error.severity})
            alert = self.supervisor.on_error(error, now)
            if alert is not None:
                self._route_alert(alert)
        return report

    def _route_alert(self, alert):
        self._alert_counter += 1
        payload = alert.as_dict()
        payload["alert_id"] = f"alert{self._alert_counter:03d}"
        self._last_alerts.append(payload)
        self._emit_now("supervisor", "AlertRaised", payload)
        recipient = MISSION_CONTROL if alert.recipient == "MissionControl" \
            else alert.ref.get("astronaut", MISSION_CONTROL)
        message = self.router.make_message(
            MessageKind.ALERT, SUPERVISOR, recipient, payload, self.world.clock.tick)
        self.router.relay(message, self.world.clock.tick)

    def fusion_sync(self, now: int) -> None:
        runtimes = list(self.agents.values())
        if len(runtimes) < 2:
            return
        leader = next((a for a in runtimes if a.role == Role.LEADER), runtimes[0])
        other = next((a for a in runtimes if a.agent_id != leader.agent_id), None)
        if other is None:
            return
        transform, fused, stats = fusion.align_and_fuse(
            leader.executive.known_map, other.executive.known_map,
            seed=self.fusion_rng_seed)
        if isinstance(transform, fusion.InsufficientOverlap):
            self._emit_now("fusion", "FusionSync",
                           {"status": "InsufficientOverlap", **stats})
            return
        self.fused_map = fused
        self._emit_now("fusion", "FusionSync", {
            "status": "ok", **stats,
            "transform": {"rotation": round(float(transform.rotation), 6),
                          "tx": round(float(transform.translation[0]), 6),
                          "ty": round(float(transform.translation[1]), 6)},
            "known_cells": fused.known_count(),
        })

    # -- run loop -----------------------------------------------------------------

    def scripted_goals_terminal(self) -> bool:
        if not self.scripted_goal_ids:
            return False
        pending = set(self.scripted_goal_ids) - self._terminal_goals
        for agent in self.agents.values():
            for goal_id, goal in agent.executive.goals.items():
                if goal_id in pending and goal.status in \
                        (GoalStatus.ACHIEVED, GoalStatus.FAILED, GoalStatus.REJECTED):
                    pending.discard(goal_id)
        return not pending

    def remaining_scripted(self) -> bool:
        now = self.world.clock.tick
        if any(t >= now for t, _ in self.spec.protocol_events):
            return True
        if any(g.at_tick >= now for g in self.spec.goals):
            return True
        return False

    def run(self, max_ticks: int | None = None) -> int:
        limit = self.config.sim.max_ticks if max_ticks is None else max_ticks
        for _ in range(limit):
            self.step()
            if self.scripted_goals_terminal() and not self.remaining_scripted():
                break
        final = self.world.clock.tick
        if self.config.sim.fusion_sync_interval > 0 and len(self.agents) >= 2:
            self.fusion_sync(final)
        all_terminal = self.scripted_goals_terminal() or not self.spec.goals
        self.log.append(final, "gateway", "RunFinished",
                        {"tick": final, "goals_terminal": all_terminal,
                         "world_hash": self.world.state_hash()})
        return 0 if all_terminal else 1


def run_headless(scenario_path_or_spec, seed: int | None = None,
                 max_ticks: int | None = None, log_path: str | None = None,
                 config: RunConfig | None = None) -> tuple[int, EventLog]:
    """Execute a full scenario; returns (exit_status, log)."""
    if isinstance(scenario_path_or_spec, ScenarioSpec):
        spec = scenario_path_or_spec
    elif isinstance(scenario_path_or_spec, dict):
        spec = parse_scenario(scenario_path_or_spec)
    else:
        from .scenario import load_scenario_file

        spec = load_scenario_file(scenario_path_or_spec)
    log = EventLog(log_path)
    kernel = SimKernel(spec, log, config=config, seed=seed, max_ticks=max_ticks)
    if max_ticks == 0:
        log.close()
        return (0 if not spec.goals else 1), log
    status = kernel.run(max_ticks)
    log.close()
    return status, log


@dataclass
class ReplayReport:
    identical: bool
    divergence_index: int | None = None
    expected: str | None = None
    actual: str | None = None
    checked: int = 0

    def summary(self) -> str:
        if self.identical:
            return f"identical ({self.checked} records)"
        return (f"divergence at record {self.divergence_index}:\n"
                f"  logged: {self.expected}\n  replay: {self.actual}")


def replay(log_path: str) -> ReplayReport:
    """Re-run the scenario embedded in the log header and compare records."""
    records = read_log(log_path)
    header = records[0]
    if header.type != "ScenarioLoaded" or "scenario" not in header.payload:
        raise LogCorrupt("first record is not a ScenarioLoaded header")
    spec = parse_scenario(header.payload["scenario"])
    max_ticks = header.payload.get("max_ticks")
    if max_ticks is None and len(records) == 1:
        max_ticks = 0
    _, fresh = run_headless(spec, seed=header.payload.get("seed"), max_ticks=max_ticks)
    with open(log_path, "r", encoding="utf-8") as fh:
        original_lines = [line for line in fh if line.strip()]
    for i, (old, new) in enumerate(zip(original_lines, fresh.lines)):
        if old != new:
            return ReplayReport(False, i, old.rstrip("\n"), new.rstrip("\n"), i)
    if len(original_lines) != len(fresh.lines):
        i = min(len(original_lines), len(fresh.lines))
        return ReplayReport(False, i,
                            original_lines[i].rstrip("\n") if i < len(original_lines) else "<eof>",
                            fresh.lines[i].rstrip("\n") if i < len(fresh.lines) else "<eof>",
                            i)
    return ReplayReport(True, checked=len(original_lines))
