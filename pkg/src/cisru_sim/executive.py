"""Goal decomposition, scheduling, execution, and replanning for the Leader
and Secondary agents.

Each agent runs a pure step function per tick: inbound (already gated)
messages first, then one advance of the active task. New goals preempt by
pushing a plan onto a stack; finished plans pop and the paused work resumes.
An emergency halt freezes motion and task progress within the same tick.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum

from . import nav
from .config import ExecConfig, ManipConfig
from .geometry import Pose2D
from .grid import CellState, GridMap
from .manip import (
    Arm,
    SampleCollectionFsm,
    ScContext,
    ScState,
    SlotNotVisible,
    StorageState,
    TcEvent,
    TcState,
    Tool,
    ToolChangerFsm,
    ToolKind,
    check_reach,
    localize_tool,
    sc_step,
    tc_step,
)
from .mas import Goal, GoalKind, GoalStatus, MasMessage, MessageKind, update_goal_status
from .percept import OutOfInspectRange, PerceptConfig, inspect_panel
from .supervise import ErrorReport
from .world import EntityKind, WorldSnapshot


class UnknownGoalKind(Exception):
    pass


class RoleMismatch(Exception):
    pass


class Role(str, Enum):
    LEADER = "Leader"
    SECONDARY = "Secondary"


class TaskKind(str, Enum):
    NAVIGATE_TO = "NavigateTo"
    SWEEP_AREA = "SweepArea"
    INSPECT_PANEL = "InspectPanel"
    ANALYZE_POINT = "AnalyzePoint"
    REQUEST_SECONDARY = "RequestSecondary"
    RENDEZVOUS_AWAIT = "RendezvousAwait"
    MOUNT_TOOL = "MountTool"
    COLLECT_SAMPLE = "CollectSample"
    STORE_TO_SLOT = "StoreToSlot"
    RETURN_TO_BASE = "ReturnToBase"
    AWAIT_STORAGE_EMPTIED = "AwaitStorageEmptied"
    SUPERVISE = "Supervise"


class TaskStatus(str, Enum):
    WAITING = "Waiting"
    ACTIVE = "Active"
    DONE = "Done"
    FAILED = "Failed"


@dataclass
class Task:
    kind: TaskKind
    params: dict = field(default_factory=dict)
    status: TaskStatus = TaskStatus.WAITING
    attempts: int = 0
    state: dict = field(default_factory=dict)

    def describe(self) -> dict:
        return {"kind": self.kind.value, "params": self.params, "status": self.status.value}


@dataclass
class Plan:
    plan_id: str
    root_goal_id: str
    tasks: list[Task]
    background: Task | None = None
    cursor: int = 0

    def current(self) -> Task | None:
        if self.cursor < len(self.tasks):
            return self.tasks[self.cursor]
        return None

    def insert_after_current(self, tasks: list[Task]):
        self.tasks[self.cursor + 1:self.cursor + 1] = tasks

    def append(self, tasks: list[Task]):
        self.tasks.extend(tasks)

    def complete(self) -> bool:
        return self.cursor >= len(self.tasks)


def decide_after_store(storage: StorageState) -> str:
    """Return-to-base once every slot is filled, otherwise keep mapping."""
    return "ReturnToBase" if storage.all_filled() else "ContinueMapping"


def boustrophedon_lanes(area: tuple[float, float, float, float], spacing: float,
                        margin: float) -> list[tuple[float, float]]:
    """Back-and-forth lane waypoints covering the rectangle."""
    x0, y0, x1, y1 = area
    x0, x1 = min(x0, x1), max(x0, x1)
    y0, y1 = min(y0, y1), max(y0, y1)
    xs = (x0 + margin, x1 - margin)
    points: list[tuple[float, float]] = []
    y = y0 + spacing / 2.0
    flip = False
    while y <= y1 - spacing / 4.0 + 1e-9:
        a, b = (xs[1], xs[0]) if flip else (xs[0], xs[1])
        points.append((a, y))
        points.append((b, y))
        flip = not flip
        y += spacing
    if not points:
        points = [((x0 + x1) / 2.0, (y0 + y1) / 2.0)]
    return points


@dataclass
class TickContext:
    """Everything the kernel hands an agent for one tick."""

    now: int
    dt: float
    snapshot: WorldSnapshot
    inbound: list[MasMessage]
    halt: bool
    level: str
    emit: object          # fn(type, payload)
    send: object          # fn(kind, recipient, payload, goal_id=None)
    report_error: object  # fn(ErrorReport)
    rng: object
    tools: dict[str, Tool]
    own_storage: StorageState | None
    partner_id: str | None
    partner_storage: StorageState | None  # only when partner within transfer range
    collided: bool = False


class Executive:
    def __init__(self, agent_id: str, role: Role, known_map: GridMap,
                 nav_config: nav.NavConfig, exec_config: ExecConfig,
                 manip_config: ManipConfig, percept_config: PerceptConfig,
                 arm: Arm | None = None):
        self.agent_id = agent_id
        self.role = role
        self.known_map = known_map
        self.nav_config = nav_config
        self.exec_config = exec_config
        self.manip_config = manip_config
        self.percept_config = percept_config
        self.arm = arm
        self.goals: dict[str, Goal] = {}
        self.plan_stack: list[Plan] = []
        self.tc_fsm = ToolChangerFsm()
        self.sc_fsm: SampleCollectionFsm | None = None
        self._plan_counter = 0
        self._store_counter = 0
        self._handled_points: set[str] = set()

    # -- decomposition -------------------------------------------------------

    def decompose(self, goal: Goal) -> Plan:
        """Expand an accepted goal into its task tree for this agent's role."""
        self._plan_counter += 1
        plan_id = f"{self.agent_id}-plan{self._plan_counter:03d}"
        kind = goal.kind
        params = goal.params
        tol = self.nav_config.goal_tolerance

        if kind == GoalKind.INSPECT_PANELS:
            if self.role != Role.LEADER:
                raise RoleMismatch("panel inspection is a Leader goal")
            tasks: list[Task] = []
            for point in params.get("points", []):
                tasks.append(Task(TaskKind.NAVIGATE_TO,
                                  {"x": point["x"], "y": point["y"], "tolerance": tol}))
                tasks.append(Task(TaskKind.INSPECT_PANEL, {"panel": point["panel"]}))
            return Plan(plan_id, goal.goal_id, tasks, background=Task(TaskKind.SUPERVISE))

        if kind == GoalKind.MAP_AND_SAMPLE:
            points = params.get("sample_points", [])
            if points and self.role != Role.LEADER:
                raise RoleMismatch("sample analysis belongs to the Leader")
            spacing = self.exec_config.lane_spacing or params.get("lane_spacing") \
                or self.percept_config.inspect_range * 3
            lanes = boustrophedon_lanes(tuple(params["area"]), float(spacing),
                                        margin=self.known_map.resolution)
            inserts: dict[int, list[str]] = {}
            for pid in points:
                inserts.setdefault(self._nearest_lane_index(lanes, params, pid), []).append(pid)
            tasks = []
            last = 0
            for idx in sorted(inserts):
                chunk = lanes[last:idx + 1]
                if chunk:
                    tasks.append(Task(TaskKind.SWEEP_AREA, {"points": chunk}))
                for pid in inserts[idx]:
                    tasks.append(Task(TaskKind.NAVIGATE_TO, {"point": pid, "tolerance": tol}))
                    tasks.append(Task(TaskKind.ANALYZE_POINT, {"point": pid}))
                last = idx + 1
            if last < len(lanes):
                tasks.append(Task(TaskKind.SWEEP_AREA, {"points": lanes[last:]}))
            return Plan(plan_id, goal.goal_id, tasks)

        if kind == GoalKind.STORE_SAMPLE:
            if self.role != Role.SECONDARY:
                raise RoleMismatch("sample storage is a Secondary goal")
            rv = params["rendezvous"]
            return Plan(plan_id, goal.goal_id, [
                Task(TaskKind.NAVIGATE_TO, {"x": rv["x"], "y": rv["y"],
                                            "tolerance": self.exec_config.rendezvous_tolerance}),
                Task(TaskKind.RENDEZVOUS_AWAIT, {"mode": "sample_stored",
                                                 "sample_id": params["sample_id"]}),
            ])

        if kind == GoalKind.RETURN_TO_BASE:
            return Plan(plan_id, goal.goal_id, [
                Task(TaskKind.RETURN_TO_BASE, {}),
                Task(TaskKind.AWAIT_STORAGE_EMPTIED, {}),
            ])

        if kind == GoalKind.NAVIGATE_TO:
            return Plan(plan_id, goal.goal_id, [
                Task(TaskKind.NAVIGATE_TO, {"x": params["x"], "y": params["y"],
                                            "tolerance": params.get("tolerance", tol)}),
            ])

        if kind == GoalKind.COLLECT_SAMPLE:
            if self.role != Role.LEADER:
                raise RoleMismatch("sample collection is a Leader goal")
            pid = params["point"]
            return Plan(plan_id, goal.goal_id, self._collection_tasks(pid, request_partner=False))

        if kind == GoalKind.SUPERVISE:
            return Plan(plan_id, goal.goal_id, [], background=Task(TaskKind.SUPERVISE))

        raise UnknownGoalKind(str(kind))

    @staticmethod
    def _nearest_lane_index(lanes: list[tuple[float, float]], params: dict, pid: str) -> int:
        pos = params.get("sample_positions", {}).get(pid)
        if pos is None:
            return len(lanes) - 1
        return min(range(len(lanes)),
                   key=lambda i: (lanes[i][0] - pos[0]) ** 2 + (lanes[i][1] - pos[1]) ** 2)

    def _collection_tasks(self, point_id: str, request_partner: bool) -> list[Task]:
        tol = self.nav_config.goal_tolerance
        tasks = []
        if request_partner:
            tasks.append(Task(TaskKind.REQUEST_SECONDARY, {"point": point_id}))
        tasks.append(Task(TaskKind.MOUNT_TOOL, {"tool_kind": self.manip_config.sampling_tool}))
        tasks.append(Task(TaskKind.NAVIGATE_TO, {"point": point_id, "tolerance": tol}))
        tasks.append(Task(TaskKind.COLLECT_SAMPLE, {"point": point_id}))
        tasks.append(Task(TaskKind.RENDEZVOUS_AWAIT, {"mode": "partner_near"}))
        tasks.append(Task(TaskKind.STORE_TO_SLOT, {"point": point_id}))
        return tasks

    # -- goal intake -----------------------------------------------------------

    def _handle_goal_request(self, ctx: TickContext, message: MasMessage):
        goal = Goal.from_dict(message.payload["goal"])
        goal.originator = message.sender
        self.goals[goal.goal_id] = goal
        try:
            plan = self.decompose(goal)
        except (UnknownGoalKind, RoleMismatch) as exc:
            self.goals[goal.goal_id] = update_goal_status(goal, GoalStatus.REJECTED)
            self._send_goal_status(ctx, self.goals[goal.goal_id], reason=type(exc).__name__)
            return
        goal = update_goal_status(goal, GoalStatus.ACCEPTED)
        self.goals[goal.goal_id] = goal
        self._send_goal_status(ctx, goal)
        ctx.emit("PlanCreated", {"plan_id": plan.plan_id, "goal_id": goal.goal_id,
                                 "tasks": [t.describe() for t in plan.tasks]})
        self._activate_plan(ctx, plan)

    def _activate_plan(self, ctx: TickContext, plan: Plan):
        self.plan_stack.append(plan)
        goal = self.goals.get(plan.root_goal_id)
        if goal is not None and goal.status == GoalStatus.ACCEPTED:
            goal = update_goal_status(goal, GoalStatus.ACTIVE)
            self.goals[goal.goal_id] = goal
            self._send_goal_status(ctx, goal)

    def _send_goal_status(self, ctx: TickContext, goal: Goal, reason: str | None = None):
        payload = {"goal": goal.as_dict()}
        if reason:
            payload["reason"] = reason
        ctx.emit("GoalStatus", payload)
        if goal.originator and goal.originator != self.agent_id:
            ctx.send(MessageKind.GOAL_STATUS, goal.originator, payload, goal.goal_id)

    def _finish_goal(self, ctx: TickContext, plan: Plan, achieved: bool,
                     reason: str | None = None):
        goal = self.goals.get(plan.root_goal_id)
        if goal is not None and goal.status == GoalStatus.ACTIVE:
            goal = update_goal_status(
                goal, GoalStatus.ACHIEVED if achieved else GoalStatus.FAILED, reason)
            self.goals[goal.goal_id] = goal
            self._send_goal_status(ctx, goal)
        if not achieved:
            ctx.report_error(ErrorReport(source=self.agent_id, code=reason or "GoalFailed",
                                         handled=False))
        if plan in self.plan_stack:
            self.plan_stack.remove(plan)

    # -- per-tick step ---------------------------------------------------------

    def tick(self, ctx: TickContext) -> tuple[float, float]:
        for message in ctx.inbound:
            if message.kind == MessageKind.GOAL_REQUEST:
                self._handle_goal_request(ctx, message)
            elif message.kind == MessageKind.GOAL_STATUS:
                ctx.emit("PartnerGoalStatus", message.payload)
        if ctx.halt:
            return (0.0, 0.0)
        if ctx.level != "E4":
            return (0.0, 0.0)
        plan = self.plan_stack[-1] if self.plan_stack else None
        if plan is None:
            return (0.0, 0.0)
        if plan.complete():
            self._finish_goal(ctx, plan, achieved=True)
            return (0.0, 0.0)
        task = plan.current()
        if task.status == TaskStatus.WAITING:
            task.status = TaskStatus.ACTIVE
            ctx.emit("TaskStarted", {"plan_id": plan.plan_id, "task": task.describe()})
        command = self._step_task(ctx, plan, task)
        if task.status == TaskStatus.DONE:
            ctx.emit("TaskDone", {"plan_id": plan.plan_id, "task": task.describe()})
            plan.cursor += 1
            if plan.complete():
                self._finish_goal(ctx, plan, achieved=True)
        elif task.status == TaskStatus.FAILED:
            ctx.emit("TaskFailed", {"plan_id": plan.plan_id, "task": task.describe(),
                                    "reason": task.state.get("fail_reason")})
            self._finish_goal(ctx, plan, achieved=False,
                              reason=task.state.get("fail_reason", "TaskFailed"))
        return command

    # -- task handlers -----------------------------------------------------------

    def _step_task(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        handler = {
            TaskKind.NAVIGATE_TO: self._task_navigate,
            TaskKind.SWEEP_AREA: self._task_sweep,
            TaskKind.INSPECT_PANEL: self._task_inspect_panel,
            TaskKind.ANALYZE_POINT: self._task_analyze_point,
            TaskKind.REQUEST_SECONDARY: self._task_request_secondary,
            TaskKind.RENDEZVOUS_AWAIT: self._task_rendezvous_await,
            TaskKind.MOUNT_TOOL: self._task_mount_tool,
            TaskKind.COLLECT_SAMPLE: self._task_collect_sample,
            TaskKind.STORE_TO_SLOT: self._task_store_to_slot,
            TaskKind.RETURN_TO_BASE: self._task_return_to_base,
            TaskKind.AWAIT_STORAGE_EMPTIED: self._task_await_storage,
            TaskKind.SUPERVISE: self._task_supervise,
        }[task.kind]
        return handler(ctx, plan, task)

    def _pose(self, ctx: TickContext) -> Pose2D:
        return ctx.snapshot.entities[self.agent_id].pose

    def _resolve_target(self, ctx: TickContext, task: Task) -> tuple[float, float] | None:
        if "x" in task.params:
            return (float(task.params["x"]), float(task.params["y"]))
        pid = task.params.get("point")
        if pid is not None:
            ent = ctx.snapshot.entity(pid)
            if ent is None:
                return None
            return (ent.pose.x, ent.pose.y)
        return None

    def _fail(self, task: Task, reason: str):
        task.status = TaskStatus.FAILED
        task.state["fail_reason"] = reason

    # navigation ------------------------------------------------------------------

    def _drive_to(self, ctx: TickContext, task: Task, target: tuple[float, float],
                  tolerance: float) -> tuple[str, tuple[float, float]]:
        pose = self._pose(ctx)
        if math.hypot(pose.x - target[0], pose.y - target[1]) <= tolerance:
            task.state.pop("path", None)
            return ("arrived", (0.0, 0.0))
        if task.state.get("target") != target:
            task.state["target"] = target
            task.state.pop("path", None)
        path = task.state.get("path")
        if path is not None and (ctx.collided or self._path_blocked(path, pose)):
            task.attempts = min(task.attempts + 1, self.exec_config.max_retries)
            known = self.known_map.known_count()
            grew = known > task.state.get("last_known", -1)
            task.state["last_known"] = known
            ctx.emit("Replan", {"task": task.kind.value, "reason": "PathBlocked",
                                "map_grew": grew, "attempts": task.attempts})
            path = None
            task.state.pop("path", None)
            if not grew and task.attempts >= self.exec_config.max_retries:
                return ("unreachable", (0.0, 0.0))
        if path is None:
            cfg = dataclasses.replace(self.nav_config, goal_tolerance=tolerance)
            try:
                result = nav.plan(self.known_map, pose,
                                  Pose2D(target[0], target[1]), cfg)
            except nav.GoalInObstacle:
                return ("unreachable", (0.0, 0.0))
            if isinstance(result, nav.Unreachable):
                return ("unreachable", (0.0, 0.0))
            path = result
            task.state["path"] = path
            task.state.setdefault("last_known", self.known_map.known_count())
            ctx.emit("PathPlanned", {"task": task.kind.value,
                                     "points": len(path.points),
                                     "length": round(path.total_length, 3)})
        cfg = dataclasses.replace(self.nav_config, goal_tolerance=tolerance)
        command = nav.follow(path, pose, cfg, dt=ctx.dt)
        if command == (0.0, 0.0):
            # parked at the path end, which sits within tolerance of the goal
            task.state.pop("path", None)
            return ("arrived", command)
        return ("driving", command)

    def _path_blocked(self, path: nav.Path, pose: Pose2D) -> bool:
        cells = self.known_map.cells
        dists = [pose.distance_to(p) for p in path.points]
        start = min(range(len(dists)), key=dists.__getitem__)
        for p in path.points[start:]:
            try:
                col, row = self.known_map.world_to_cell(p.x, p.y)
            except Exception:
                return True
            if cells[row, col] == CellState.OBSTACLE:
                return True
        return False

    def _task_navigate(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        target = self._resolve_target(ctx, task)
        if target is None:
            self._fail(task, "UnknownTarget")
            return (0.0, 0.0)
        tolerance = float(task.params.get("tolerance", self.nav_config.goal_tolerance))
        outcome, command = self._drive_to(ctx, task, target, tolerance)
        if outcome == "arrived":
            task.status = TaskStatus.DONE
        elif outcome == "unreachable":
            self._fail(task, "Unreachable")
        return command

    def _task_sweep(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        points = task.params["points"]
        cursor = task.state.get("cursor", 0)
        if cursor >= len(points):
            task.status = TaskStatus.DONE
            return (0.0, 0.0)
        target = tuple(points[cursor])
        outcome, command = self._drive_to(ctx, task, target,
                                          self.nav_config.goal_tolerance)
        if outcome == "arrived":
            task.state["cursor"] = cursor + 1
            task.attempts = 0
            if task.state["cursor"] >= len(points):
                task.status = TaskStatus.DONE
        elif outcome == "unreachable":
            # lane point in blocked terrain: skip it, mapping continues
            ctx.emit("SweepWaypointSkipped", {"point": list(target)})
            task.state["cursor"] = cursor + 1
            task.attempts = 0
            if task.state["cursor"] >= len(points):
                task.status = TaskStatus.DONE
            command = (0.0, 0.0)
        return command

    # perception-coupled tasks ------------------------------------------------------

    def _task_inspect_panel(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        panel = ctx.snapshot.entity(task.params["panel"])
        if panel is None:
            self._fail(task, "UnknownPanel")
            return (0.0, 0.0)
        try:
            reports = inspect_panel(panel, self._pose(ctx),
                                    self.percept_config.inspect_range, ctx.now)
        except OutOfInspectRange:
            self._fail(task, "OutOfInspectRange")
            return (0.0, 0.0)
        for rep in reports:
            payload = {"panel_id": rep.panel_id,
                       "local_point": list(rep.local_point),
                       "world_point": [rep.world_point[0], rep.world_point[1]]}
            ctx.emit("DefectReport", payload)
            ctx.send(MessageKind.OBSERVATION, "mission_control",
                     {"observation": "DefectReport", **payload})
        ctx.emit("PanelInspected", {"panel_id": panel.entity_id, "defects": len(reports)})
        task.status = TaskStatus.DONE
        return (0.0, 0.0)

    def _task_analyze_point(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        pid = task.params["point"]
        ent = ctx.snapshot.entity(pid)
        if ent is None or ent.kind != EntityKind.SAMPLE_POINT:
            self._fail(task, "UnknownSamplePoint")
            return (0.0, 0.0)
        pose = self._pose(ctx)
        if pose.distance_to(ent.pose) > self.percept_config.analyze_range:
            self._fail(task, "OutOfAnalyzeRange")
            return (0.0, 0.0)
        score = float(ent.interest_score or 0.0)
        interesting = score >= self.exec_config.interest_threshold
        ctx.emit("SampleAnalyzed", {"point": pid, "score": score,
                                    "interesting": interesting})
        if interesting and pid not in self._handled_points:
            self._handled_points.add(pid)
            follow_up = self._collection_tasks(pid, request_partner=True)
            plan.insert_after_current(follow_up)
            ctx.emit("PlanExtended", {"plan_id": plan.plan_id,
                                      "tasks": [t.describe() for t in follow_up]})
        task.status = TaskStatus.DONE
        return (0.0, 0.0)

    # cooperation ---------------------------------------------------------------------

    def _task_request_secondary(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        if ctx.partner_id is None:
            self._fail(task, "NoPartner")
            return (0.0, 0.0)
        self._store_counter += 1
        pose = self._pose(ctx)
        goal = Goal(
            goal_id=f"{self.agent_id}-store{self._store_counter:03d}",
            kind=GoalKind.STORE_SAMPLE,
            params={"rendezvous": {"x": pose.x, "y": pose.y},
                    "sample_id": task.params["point"]},
            originator=self.agent_id,
        )
        ctx.send(MessageKind.GOAL_REQUEST, ctx.partner_id, {"goal": goal.as_dict()},
                 goal.goal_id)
        ctx.emit("SecondaryRequested", {"goal_id": goal.goal_id,
                                        "sample_id": task.params["point"]})
        task.status = TaskStatus.DONE
        return (0.0, 0.0)

    def _task_rendezvous_await(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        mode = task.params.get("mode", "partner_near")
        if mode == "partner_near":
            partner = ctx.snapshot.entity(ctx.partner_id) if ctx.partner_id else None
            if partner is not None and \
                    self._pose(ctx).distance_to(partner.pose) <= self.exec_config.transfer_range:
                task.status = TaskStatus.DONE
        else:  # sample_stored: wait until the expected sample is in our rack
            sid = task.params.get("sample_id")
            if ctx.own_storage is not None and sid in ctx.own_storage.slots:
                task.status = TaskStatus.DONE
                decision = decide_after_store(ctx.own_storage)
                ctx.emit("DecisionAfterStore", {"decision": decision,
                                                "slots": ctx.own_storage.as_list()})
                if decision == "ReturnToBase":
                    plan.append([Task(TaskKind.RETURN_TO_BASE, {}),
                                 Task(TaskKind.AWAIT_STORAGE_EMPTIED, {})])
        return (0.0, 0.0)

    # manipulation ---------------------------------------------------------------------

    def _find_tool(self, ctx: TickContext, kind_name: str) -> Tool | None:
        for tool in ctx.tools.values():
            if tool.kind == ToolKind(kind_name) and tool.slot_id is not None:
                return tool
        return None

    def _task_mount_tool(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        kind_name = task.params["tool_kind"]
        if self.arm is None:
            self._fail(task, "NoArm")
            return (0.0, 0.0)
        if self.arm.holding is not None:
            held = ctx.tools.get(self.arm.holding)
            if held is not None and held.kind == ToolKind(kind_name):
                task.status = TaskStatus.DONE
                return (0.0, 0.0)
            self._fail(task, "WrongToolMounted")
            return (0.0, 0.0)
        tool = task.state.get("tool") or self._find_tool(ctx, kind_name)
        if tool is None:
            self._fail(task, "NoToolAvailable")
            return (0.0, 0.0)
        task.state["tool"] = tool
        slot = ctx.snapshot.entity(tool.slot_id)
        if slot is None:
            self._fail(task, "UnknownSlot")
            return (0.0, 0.0)

        if self.tc_fsm.state == TcState.STOWED:
            self.tc_fsm, _ = tc_step(self.tc_fsm, TcEvent.MOUNT_REQUESTED)
            ctx.emit("ToolChanger", {"state": self.tc_fsm.state.value})
        if self.tc_fsm.state == TcState.APPROACH:
            pose = self._pose(ctx)
            approach = task.state.get("approach")
            if approach is None:
                d = max(pose.distance_to(slot.pose), 1e-6)
                back = self.exec_config.slot_approach_distance + task.attempts * 0.15
                approach = (slot.pose.x + (pose.x - slot.pose.x) / d * back,
                            slot.pose.y + (pose.y - slot.pose.y) / d * back)
                task.state["approach"] = approach
            outcome, command = self._drive_to(ctx, task, approach,
                                              self.nav_config.goal_tolerance)
            if outcome == "driving":
                return command
            if outcome == "unreachable":
                self._fail(task, "Unreachable")
                return (0.0, 0.0)
            self.tc_fsm, _ = tc_step(self.tc_fsm, TcEvent.ARRIVED_AT_SLOT)
            ctx.emit("ToolChanger", {"state": self.tc_fsm.state.value})
            return (0.0, 0.0)
        if self.tc_fsm.state == TcState.LOCALIZE:
            try:
                est = localize_tool(slot, self.arm.base_pose(self._pose(ctx)),
                                    self.manip_config.localize_range, ctx.rng,
                                    self.manip_config.localize_sigma)
            except SlotNotVisible:
                self._fail(task, "SlotNotVisible")
                return (0.0, 0.0)
            task.state["estimate"] = est
            self.tc_fsm, _ = tc_step(self.tc_fsm, TcEvent.POSE_ESTIMATED)
            ctx.emit("ToolChanger", {"state": self.tc_fsm.state.value,
                                     "estimate": [round(est[0], 4), round(est[1], 4)]})
            return (0.0, 0.0)
        if self.tc_fsm.state == TcState.REACH:
            est = task.state["estimate"]
            reach = check_reach(self.arm, self._pose(ctx), (est[0], est[1]))
            if reach.reachable:
                self.arm.joint_angles = reach.joint_angles
                self.tc_fsm, _ = tc_step(self.tc_fsm, TcEvent.REACH_OK)
                ctx.emit("ToolChanger", {"state": self.tc_fsm.state.value})
                return (0.0, 0.0)
            self.tc_fsm, effects = tc_step(self.tc_fsm, TcEvent.UNREACHABLE)
            for eff in effects:
                if eff.kind == "alert":
                    ctx.send(MessageKind.ALERT, "mission_control",
                             {"reason": "ToolUnreachable", "agent": self.agent_id,
                              "slot": slot.entity_id})
                    ctx.emit("ToolChangerFault", {"reason": "ToolUnreachable",
                                                  "attempts": task.attempts})
            ctx.report_error(ErrorReport(self.agent_id, "ToolUnreachable",
                                         handled=task.attempts < 1))
            if task.attempts < 1:
                # reposition once: reset the machine and approach closer
                task.attempts += 1
                task.state.pop("approach", None)
                task.state.pop("path", None)
                self.tc_fsm, _ = tc_step(self.tc_fsm, TcEvent.RESET)
                self.tc_fsm, _ = tc_step(self.tc_fsm, TcEvent.MOUNT_REQUESTED)
                return (0.0, 0.0)
            self._fail(task, "ToolUnreachable")
            return (0.0, 0.0)
        if self.tc_fsm.state == TcState.LATCH:
            self.tc_fsm, effects = tc_step(self.tc_fsm, TcEvent.LATCHED)
            for eff in effects:
                if eff.kind == "tool_to_arm":
                    tool.slot_id = None
                    self.arm.holding = tool.tool_id
            ctx.emit("ToolMounted", {"tool_id": tool.tool_id, "kind": tool.kind.value})
            task.status = TaskStatus.DONE
            return (0.0, 0.0)
        self._fail(task, f"ToolChanger:{self.tc_fsm.state.value}")
        return (0.0, 0.0)

    def _task_collect_sample(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        pid = task.params["point"]
        ent = ctx.snapshot.entity(pid)
        if ent is None:
            self._fail(task, "UnknownSamplePoint")
            return (0.0, 0.0)
        if self.sc_fsm is None or task.state.get("fsm_started") is None:
            self.sc_fsm = SampleCollectionFsm()
            task.state["fsm_started"] = True
        holding_kind = None
        if self.arm is not None and self.arm.holding is not None:
            held = ctx.tools.get(self.arm.holding)
            holding_kind = held.kind if held else None
        context = ScContext(
            holding_kind=holding_kind,
            within_scoop_range=self._pose(ctx).distance_to(ent.pose)
            <= self.manip_config.scoop_range + ent.footprint_radius,
            sample_id=pid,
        )
        self.sc_fsm = sc_step(self.sc_fsm, context)
        ctx.emit("SampleCollection", {"state": self.sc_fsm.state.value, "point": pid})
        if self.sc_fsm.state == ScState.FAULT:
            ctx.report_error(ErrorReport(self.agent_id, self.sc_fsm.fault_reason or "Fault",
                                         handled=False))
            self._fail(task, self.sc_fsm.fault_reason or "SampleCollectionFault")
        elif self.sc_fsm.state == ScState.UNLOAD:
            task.status = TaskStatus.DONE  # sample on the arm, unload is the next task
        return (0.0, 0.0)

    def _task_store_to_slot(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        if self.sc_fsm is None or self.sc_fsm.state != ScState.UNLOAD:
            self._fail(task, "NothingToUnload")
            return (0.0, 0.0)
        context = ScContext(sample_id=task.params["point"], storage=ctx.partner_storage)
        before = self.sc_fsm
        self.sc_fsm = sc_step(self.sc_fsm, context)
        if self.sc_fsm.state == ScState.DONE:
            ctx.emit("SampleStored", {"sample_id": before.sample_id,
                                      "slot": context.stored_slot})
            if ctx.partner_id:
                ctx.send(MessageKind.OBSERVATION, ctx.partner_id,
                         {"observation": "SampleStored", "sample_id": before.sample_id,
                          "slot": context.stored_slot})
            task.status = TaskStatus.DONE
        elif self.sc_fsm.state == ScState.FAULT:
            ctx.report_error(ErrorReport(self.agent_id, self.sc_fsm.fault_reason or "Fault",
                                         handled=False))
            self._fail(task, self.sc_fsm.fault_reason or "StoreFault")
        # UNLOAD with no storage in range: keep waiting
        return (0.0, 0.0)

    def _task_return_to_base(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        base = next((e for e in ctx.snapshot.entities.values()
                     if e.kind == EntityKind.BASE_STATION), None)
        if base is None:
            self._fail(task, "NoBaseStation")
            return (0.0, 0.0)
        tolerance = max(self.nav_config.goal_tolerance, base.footprint_radius)
        outcome, command = self._drive_to(ctx, task, (base.pose.x, base.pose.y), tolerance)
        if outcome == "arrived":
            ctx.emit("ArrivedAtBase", {"base": base.entity_id})
            task.status = TaskStatus.DONE
        elif outcome == "unreachable":
            self._fail(task, "Unreachable")
        return command

    def _task_await_storage(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        if ctx.own_storage is not None and ctx.own_storage.all_empty():
            ctx.emit("StorageEmptiedObserved", {})
            task.status = TaskStatus.DONE
        return (0.0, 0.0)

    def _task_supervise(self, ctx: TickContext, plan: Plan, task: Task) -> tuple[float, float]:
        return (0.0, 0.0)
