"""Tool-changer and sample-collection state machines plus a planar two-link
arm with analytic inverse kinematics.

Both machines are total: every (state, event) pair maps to a declared state,
faults are absorbing states rather than exceptions, and tool inventory flips
exactly at latch/unlatch so mount/dismount cycles conserve tools.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum

from .geometry import Pose2D
from .world import Entity


class SlotNotVisible(Exception):
    pass


class ToolKind(str, Enum):
    SHOVEL = "Shovel"
    BRUSH = "Brush"


@dataclass
class Tool:
    tool_id: str
    kind: ToolKind
    slot_id: str | None  # None means mounted on the arm

    @property
    def location(self) -> str:
        return "Arm" if self.slot_id is None else f"Slot({self.slot_id})"


@dataclass
class Arm:
    mount_offset: Pose2D = field(default_factory=lambda: Pose2D(0.3, 0.0, 0.0))
    link_lengths: tuple[float, float] = (0.6, 0.5)
    joint_angles: tuple[float, float] = (0.0, 0.0)
    holding: str | None = None  # tool_id

    def base_pose(self, rover_pose: Pose2D) -> Pose2D:
        bx, by = rover_pose.transform_point(self.mount_offset.x, self.mount_offset.y)
        return Pose2D(bx, by, rover_pose.theta + self.mount_offset.theta)

    def reach_interval(self) -> tuple[float, float]:
        l1, l2 = self.link_lengths
        return (abs(l1 - l2), l1 + l2)


@dataclass
class ReachResult:
    reachable: bool
    joint_angles: tuple[float, float] | None = None
    distance: float = 0.0


def check_reach(arm: Arm, rover_pose: Pose2D, target: tuple[float, float]) -> ReachResult:
    """Planar two-link IK: reachable iff the target distance falls inside the
    arm's annulus; elbow angle from the law of cosines."""
    base = arm.base_pose(rover_pose)
    dx, dy = target[0] - base.x, target[1] - base.y
    d = math.hypot(dx, dy)
    l1, l2 = arm.link_lengths
    lo, hi = abs(l1 - l2), l1 + l2
    eps = 1e-9
    if d < lo - eps or d > hi + eps:
        return ReachResult(False, None, d)
    cos_q2 = (d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    cos_q2 = max(-1.0, min(1.0, cos_q2))
    q2 = math.acos(cos_q2)
    q1 = math.atan2(dy, dx) - base.theta - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
    return ReachResult(True, (q1, q2), d)


def localize_tool(slot: Entity, arm_base_pose: Pose2D, sensor_range: float,
                  rng: random.Random, sigma: float = 0.01) -> tuple[float, float, float]:
    """Estimated slot pose: ground truth plus seeded zero-mean position noise."""
    if arm_base_pose.distance_to(slot.pose) > sensor_range:
        raise SlotNotVisible(f"slot {slot.entity_id} beyond sensor range")
    nx = rng.gauss(0.0, sigma) if sigma > 0 else 0.0
    ny = rng.gauss(0.0, sigma) if sigma > 0 else 0.0
    return (slot.pose.x + nx, slot.pose.y + ny, slot.pose.theta)


# -- tool changer --------------------------------------------------------------


class TcState(str, Enum):
    STOWED = "Stowed"
    APPROACH = "Approach"
    LOCALIZE = "Localize"
    REACH = "Reach"
    LATCH = "Latch"
    MOUNTED = "Mounted"
    UNLATCH = "Unlatch"
    RETREAT = "Retreat"
    FAULT = "Fault"


class TcEvent(str, Enum):
    MOUNT_REQUESTED = "MountRequested"
    ARRIVED_AT_SLOT = "ArrivedAtSlot"
    POSE_ESTIMATED = "PoseEstimated"
    REACH_OK = "ReachOk"
    UNREACHABLE = "Unreachable"
    LATCHED = "Latched"
    DISMOUNT_REQUESTED = "DismountRequested"
    UNLATCHED = "Unlatched"
    RETREAT_DONE = "RetreatDone"
    RESET = "Reset"


@dataclass
class ToolChangerFsm:
    state: TcState = TcState.STOWED
    fault_reason: str | None = None


@dataclass
class TcEffect:
    """Side effect requested by a transition, applied by the owning executive."""
    kind: str  # "tool_to_arm" | "tool_to_slot" | "alert"
    detail: str | None = None


_TC_TABLE: dict[tuple[TcState, TcEvent], TcState] = {
    (TcState.STOWED, TcEvent.MOUNT_REQUESTED): TcState.APPROACH,
    (TcState.APPROACH, TcEvent.ARRIVED_AT_SLOT): TcState.LOCALIZE,
    (TcState.LOCALIZE, TcEvent.POSE_ESTIMATED): TcState.REACH,
    (TcState.REACH, TcEvent.REACH_OK): TcState.LATCH,
    (TcState.LATCH, TcEvent.LATCHED): TcState.MOUNTED,
    (TcState.MOUNTED, TcEvent.DISMOUNT_REQUESTED): TcState.UNLATCH,
    (TcState.UNLATCH, TcEvent.UNLATCHED): TcState.RETREAT,
    (TcState.RETREAT, TcEvent.RETREAT_DONE): TcState.STOWED,
}


def tc_step(fsm: ToolChangerFsm, event: TcEvent) -> tuple[ToolChangerFsm, list[TcEffect]]:
    """Total transition function. Unexpected events fault; faults absorb
    everything except Reset."""
    if event == TcEvent.RESET:
        return ToolChangerFsm(TcState.STOWED), []
    state = fsm.state
    if state == TcState.FAULT:
        return fsm, []
    if state == TcState.REACH and event == TcEvent.UNREACHABLE:
        nxt = ToolChangerFsm(TcState.FAULT, "Unreachable")
        return nxt, [TcEffect("alert", "ToolUnreachable")]
    if state == TcState.MOUNTED and event == TcEvent.MOUNT_REQUESTED:
        return ToolChangerFsm(TcState.FAULT, "ToolAlreadyMounted"), []
    nxt_state = _TC_TABLE.get((state, event))
    if nxt_state is None:
        return ToolChangerFsm(TcState.FAULT, f"UnexpectedEvent:{state.value}:{event.value}"), []
    effects = []
    if state == TcState.LATCH and event == TcEvent.LATCHED:
        effects.append(TcEffect("tool_to_arm"))
    if state == TcState.UNLATCH and event == TcEvent.UNLATCHED:
        effects.append(TcEffect("tool_to_slot"))
    return ToolChangerFsm(nxt_state), effects


# -- storage and sample collection ---------------------------------------------


@dataclass
class StorageState:
    slots: list[str | None]

    @staticmethod
    def with_capacity(n: int) -> "StorageState":
        return StorageState([None] * n)

    def first_empty(self) -> int | None:
        for i, s in enumerate(self.slots):
            if s is None:
                return i
        return None

    def all_filled(self) -> bool:
        return all(s is not None for s in self.slots)

    def all_empty(self) -> bool:
        return all(s is None for s in self.slots)

    def store(self, sample_id: str) -> int | None:
        if any(s == sample_id for s in self.slots):
            raise ValueError(f"sample {sample_id} already stored")
        idx = self.first_empty()
        if idx is not None:
            self.slots[idx] = sample_id
        return idx

    def empty_all(self) -> list[str]:
        removed = [s for s in self.slots if s is not None]
        self.slots = [None] * len(self.slots)
        return removed

    def as_list(self) -> list:
        return list(self.slots)


class ScState(str, Enum):
    VERIFY_TOOL = "VerifyTool"
    SCOOP = "Scoop"
    TRANSFER = "Transfer"
    UNLOAD = "Unload"
    DONE = "Done"
    FAULT = "Fault"


@dataclass
class SampleCollectionFsm:
    state: ScState = ScState.VERIFY_TOOL
    fault_reason: str | None = None
    sample_id: str | None = None


@dataclass
class ScContext:
    holding_kind: ToolKind | None = None
    within_scoop_range: bool = False
    sample_id: str = ""
    storage: StorageState | None = None  # None while the carrier is absent
    stored_slot: int | None = None       # written by sc_step on unload


def sc_step(fsm: SampleCollectionFsm, ctx: ScContext) -> SampleCollectionFsm:
    """One transition per call; faults are absorbing states."""
    s = fsm.state
    if s in (ScState.DONE, ScState.FAULT):
        return fsm
    if s == ScState.VERIFY_TOOL:
        if ctx.holding_kind == ToolKind.SHOVEL:
            return SampleCollectionFsm(ScState.SCOOP)
        return SampleCollectionFsm(ScState.FAULT, "ToolNotAssembled")
    if s == ScState.SCOOP:
        if ctx.within_scoop_range:
            return SampleCollectionFsm(ScState.TRANSFER, sample_id=ctx.sample_id)
        return SampleCollectionFsm(ScState.FAULT, "OutOfScoopRange")
    if s == ScState.TRANSFER:
        return SampleCollectionFsm(ScState.UNLOAD, sample_id=fsm.sample_id)
    if s == ScState.UNLOAD:
        if ctx.storage is None:
            return fsm  # wait for the carrier
        idx = ctx.storage.first_empty()
        if idx is None:
            return SampleCollectionFsm(ScState.FAULT, "StorageFull", fsm.sample_id)
        ctx.storage.store(fsm.sample_id or ctx.sample_id)
        ctx.stored_slot = idx
        return SampleCollectionFsm(ScState.DONE, sample_id=fsm.sample_id)
    return fsm
