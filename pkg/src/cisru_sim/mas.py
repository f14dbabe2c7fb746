"""Autonomy-level gating and the goal/observation protocol.

The router is the MAS-reactor layer for every registered endpoint: it hands
messages to the network, retransmits goal requests until acknowledged
(at-least-once), deduplicates on receipt (exactly-once application), and
gates everything against the recipient's autonomy level before the
executive ever sees it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

from .netsim import Network


class UnknownRecipient(Exception):
    pass


class IllegalTransition(Exception):
    pass


class AutonomyLevel(str, Enum):
    E1 = "E1"
    E2 = "E2"
    E3 = "E3"
    E4 = "E4"


class GoalKind(str, Enum):
    INSPECT_PANELS = "InspectPanels"
    MAP_AND_SAMPLE = "MapAndSample"
    STORE_SAMPLE = "StoreSample"
    RETURN_TO_BASE = "ReturnToBase"
    NAVIGATE_TO = "NavigateTo"
    COLLECT_SAMPLE = "CollectSample"
    SUPERVISE = "Supervise"


class GoalStatus(str, Enum):
    PENDING = "Pending"
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"
    ACTIVE = "Active"
    ACHIEVED = "Achieved"
    FAILED = "Failed"


LEGAL_TRANSITIONS = {
    GoalStatus.PENDING: {GoalStatus.ACCEPTED, GoalStatus.REJECTED},
    GoalStatus.ACCEPTED: {GoalStatus.ACTIVE},
    GoalStatus.ACTIVE: {GoalStatus.ACHIEVED, GoalStatus.FAILED},
    GoalStatus.REJECTED: set(),
    GoalStatus.ACHIEVED: set(),
    GoalStatus.FAILED: set(),
}


@dataclass
class Goal:
    goal_id: str
    kind: GoalKind
    required_level: AutonomyLevel = AutonomyLevel.E4
    params: dict = field(default_factory=dict)
    status: GoalStatus = GoalStatus.PENDING
    failure_reason: str | None = None
    originator: str = "mission_control"

    def as_dict(self) -> dict:
        return {
            "goal_id": self.goal_id,
            "kind": self.kind.value,
            "required_level": self.required_level.value,
            "params": self.params,
            "status": self.status.value,
            "failure_reason": self.failure_reason,
            "originator": self.originator,
        }

    @staticmethod
    def from_dict(d: dict) -> "Goal":
        return Goal(
            goal_id=d["goal_id"],
            kind=GoalKind(d["kind"]),
            required_level=AutonomyLevel(d.get("required_level", "E4")),
            params=d.get("params", {}),
            status=GoalStatus(d.get("status", "Pending")),
            failure_reason=d.get("failure_reason"),
            originator=d.get("originator", "mission_control"),
        )


class MessageKind(str, Enum):
    GOAL_REQUEST = "GoalRequest"
    GOAL_STATUS = "GoalStatus"
    OBSERVATION = "Observation"
    TELECOMMAND = "Telecommand"
    ACK = "Ack"
    ALERT = "Alert"
    PROMPT = "Prompt"
    PROMPT_RESPONSE = "PromptResponse"


@dataclass
class MasMessage:
    kind: MessageKind
    sender: str
    recipient: str
    payload: dict
    sent_tick: int
    msg_id: str
    goal_id: str | None = None

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "sender": self.sender,
            "recipient": self.recipient,
            "goal_id": self.goal_id,
            "payload": self.payload,
            "sent_tick": self.sent_tick,
            "msg_id": self.msg_id,
        }


@dataclass(frozen=True)
class GateResult:
    accepted: bool
    reason: str | None = None


ACCEPT = GateResult(True)
UNGATED_KINDS = {
    MessageKind.OBSERVATION,
    MessageKind.ACK,
    MessageKind.ALERT,
    MessageKind.PROMPT,
    MessageKind.PROMPT_RESPONSE,
    MessageKind.GOAL_STATUS,
}


def gate_message(agent_level: AutonomyLevel, message: MasMessage) -> GateResult:
    """ECSS level gate. Raw telecommands only below E4; at E4 only goals of
    matching level; observations, acks, and safety traffic always pass."""
    if message.kind in UNGATED_KINDS:
        return ACCEPT
    if message.kind == MessageKind.TELECOMMAND:
        if agent_level == AutonomyLevel.E4:
            return GateResult(False, "AutonomyLevelMismatch")
        return ACCEPT
    if message.kind == MessageKind.GOAL_REQUEST:
        required = AutonomyLevel(message.payload["goal"]["required_level"])
        if agent_level == AutonomyLevel.E1 or required != agent_level:
            return GateResult(False, "AutonomyLevelMismatch")
        return ACCEPT
    return GateResult(False, f"UnknownKind:{message.kind}")


def update_goal_status(goal: Goal, new_status: GoalStatus,
                       reason: str | None = None) -> Goal:
    """Move a goal along the status DAG; raises IllegalTransition otherwise."""
    if new_status not in LEGAL_TRANSITIONS[goal.status]:
        raise IllegalTransition(f"{goal.status.value} -> {new_status.value}")
    return replace(goal, status=new_status,
                   failure_reason=reason if new_status == GoalStatus.FAILED else goal.failure_reason)


@dataclass
class _Pending:
    message: MasMessage
    last_sent: int


class MasRouter:
    """Relay between endpoints on top of the simulated network."""

    def __init__(self, network: Network, retransmit_period: int = 5, emit=None):
        self.network = network
        self.retransmit_period = retransmit_period
        self.emit = emit or (lambda source, etype, payload: None)
        self.levels: dict[str, AutonomyLevel] = {}
        self.gated: set[str] = set()  # endpoints whose inbox passes the level gate
        self._pending: dict[str, _Pending] = {}
        self._seen: dict[str, set] = {}
        self._msg_counter = 0

    def register(self, endpoint: str, level: AutonomyLevel | None = None):
        self.network.register(endpoint)
        self._seen.setdefault(endpoint, set())
        if level is not None:
            self.levels[endpoint] = level
            self.gated.add(endpoint)

    def set_level(self, endpoint: str, level: AutonomyLevel):
        if endpoint not in self._seen:
            raise UnknownRecipient(endpoint)
        self.levels[endpoint] = level
        self.gated.add(endpoint)

    def level_of(self, endpoint: str) -> AutonomyLevel:
        return self.levels.get(endpoint, AutonomyLevel.E4)

    def next_msg_id(self) -> str:
        self._msg_counter += 1
        return f"m{self._msg_counter:06d}"

    def make_message(self, kind: MessageKind, sender: str, recipient: str,
                     payload: dict, now: int, goal_id: str | None = None) -> MasMessage:
        return MasMessage(kind, sender, recipient, payload, now, self.next_msg_id(), goal_id)

    def relay(self, message: MasMessage, now: int):
        """Hand a message to the network; goal requests become reliable."""
        if message.recipient not in self._seen:
            raise UnknownRecipient(message.recipient)
        if message.sender not in self._seen:
            raise UnknownRecipient(message.sender)
        self.network.send(message.sender, message.recipient, message, now)
        if message.kind == MessageKind.GOAL_REQUEST:
            self._pending[message.msg_id] = _Pending(message, now)

    def step(self, now: int) -> list[MasMessage]:
        """Retransmit overdue goal requests, then deliver due traffic.

        Returns gated, deduplicated messages ready for their recipients'
        executives (delivery order is channel creation order, stable per run).
        """
        for pending in self._pending.values():
            if now - pending.last_sent >= self.retransmit_period:
                self.network.send(pending.message.sender, pending.message.recipient,
                                  pending.message, now)
                pending.last_sent = now
        delivered: list[MasMessage] = []
        for recipient, message in self.network.deliver_due(now):
            if message.kind == MessageKind.ACK:
                self._pending.pop(message.payload.get("ack_msg_id"), None)
                continue
            if message.kind == MessageKind.GOAL_REQUEST:
                ack = self.make_message(
                    MessageKind.ACK, recipient, message.sender,
                    {"ack_msg_id": message.msg_id}, now, message.goal_id)
                self.network.send(recipient, message.sender, ack, now)
            seen = self._seen.setdefault(recipient, set())
            if message.msg_id in seen:
                continue
            seen.add(message.msg_id)
            if recipient in self.gated:
                verdict = gate_message(self.level_of(recipient), message)
                if not verdict.accepted:
                    self.emit("mas", "MessageRejected", {
                        "recipient": recipient, "msg_id": message.msg_id,
                        "kind": message.kind.value, "reason": verdict.reason,
                    })
                    if message.kind == MessageKind.GOAL_REQUEST:
                        goal = Goal.from_dict(message.payload["goal"])
                        goal = update_goal_status(goal, GoalStatus.REJECTED)
                        status = self.make_message(
                            MessageKind.GOAL_STATUS, recipient, message.sender,
                            {"goal": goal.as_dict(), "reason": verdict.reason},
                            now, goal.goal_id)
                        self.relay(status, now)
                    continue
            delivered.append(message)
        return delivered

    def pending_count(self) -> int:
        return len(self._pending)
