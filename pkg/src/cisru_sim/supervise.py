"""Background monitor: emergency escalation with astronaut prompt and
timeout, assignment-compliance checking, and unhandled-error escalation.

Stepped by the kernel every tick after perception; it never commands motion
itself, it only raises alerts and prompts (the executive's emergency
interrupt does the halting).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .percept import FallEvent, InteractionEvent

ASTRONAUT = "Astronaut"
MISSION_CONTROL = "MissionControl"


class DuplicateCase(Exception):
    """Two open cases for one astronaut track: the debounce should prevent this."""


@dataclass
class SuperviseConfig:
    t_ack: float = 30.0        # seconds to wait for a prompt response
    debounce_ticks: int = 50   # repeated-alert suppression window


@dataclass
class EmergencyCase:
    case_id: str
    astronaut_track: str
    astronaut_id: str
    state: str            # Detected | Prompted | ClosedSafe | Escalated
    t_detect: int
    t_prompt: int

    def is_open(self) -> bool:
        return self.state in ("Detected", "Prompted")


@dataclass
class Alert:
    recipient: str        # Astronaut | MissionControl
    reason: str
    ref: dict
    tick: int

    def as_dict(self) -> dict:
        return {"recipient": self.recipient, "reason": self.reason,
                "ref": self.ref, "tick": self.tick}


@dataclass
class ErrorReport:
    source: str
    code: str
    severity: str = "error"
    handled: bool = False


@dataclass
class PromptRequest:
    case_id: str
    astronaut_id: str
    question: str
    tick: int


@dataclass
class Supervisor:
    config: SuperviseConfig = field(default_factory=SuperviseConfig)
    dt: float = 1.0
    cases: dict[str, EmergencyCase] = field(default_factory=dict)
    assignments: dict[str, str] = field(default_factory=dict)  # astronaut -> asset
    _case_counter: int = 0
    _open_by_track: dict[str, str] = field(default_factory=dict)
    _alerted_cases: set = field(default_factory=set)           # (case_id, recipient)
    _assignment_last: dict = field(default_factory=dict)       # (astronaut, asset) -> tick
    _error_last: dict = field(default_factory=dict)            # (source, code) -> tick

    @property
    def t_ack_ticks(self) -> int:
        import math
        return max(1, math.ceil(self.t_ack_seconds / self.dt))

    @property
    def t_ack_seconds(self) -> float:
        return self.config.t_ack

    # -- emergencies --------------------------------------------------------

    def on_fall(self, event: FallEvent, now: int) -> tuple[EmergencyCase, PromptRequest] | None:
        """Open a case and prompt the astronaut. Returns None when a case for
        this track is already open (debounce by open-case existence)."""
        open_id = self._open_by_track.get(event.astronaut_track)
        if open_id is not None:
            if not self.cases[open_id].is_open():
                raise DuplicateCase(f"stale open-case index for {event.astronaut_track}")
            return None
        self._case_counter += 1
        case = EmergencyCase(
            case_id=f"case{self._case_counter:03d}",
            astronaut_track=event.astronaut_track,
            astronaut_id=event.entity_id,
            state="Prompted",
            t_detect=now,
            t_prompt=now,
        )
        self.cases[case.case_id] = case
        self._open_by_track[event.astronaut_track] = case.case_id
        prompt = PromptRequest(case.case_id, event.entity_id,
                               "Fall detected. Are you safe?", now)
        return case, prompt

    def _close(self, case: EmergencyCase, state: str):
        case.state = state
        if self._open_by_track.get(case.astronaut_track) == case.case_id:
            del self._open_by_track[case.astronaut_track]

    def _mc_alert(self, case: EmergencyCase, now: int) -> Alert | None:
        key = (case.case_id, MISSION_CONTROL)
        if key in self._alerted_cases:
            return None
        self._alerted_cases.add(key)
        return Alert(MISSION_CONTROL, "AstronautEmergency",
                     {"case_id": case.case_id, "astronaut": case.astronaut_id}, now)

    def on_prompt_response(self, case_id: str, response: str, now: int
                           ) -> tuple[str, Alert | None]:
        """Apply an astronaut's answer. Returns (outcome, alert|None); a
        response to a settled case is reported as stale and ignored."""
        case = self.cases.get(case_id)
        if case is None:
            return ("UnknownCase", None)
        if not case.is_open():
            return ("StaleResponse", None)
        if response == "Safe":
            self._close(case, "ClosedSafe")
            return ("ClosedSafe", None)
        self._close(case, "Escalated")
        return ("Escalated", self._mc_alert(case, now))

    def on_timeout(self, case_id: str, now: int) -> tuple[str, Alert | None]:
        """Escalate a prompted case once the response window has elapsed."""
        case = self.cases.get(case_id)
        if case is None or case.state != "Prompted":
            return ("NoChange", None)
        if now < case.t_prompt + self.t_ack_ticks:
            return ("NoChange", None)
        self._close(case, "Escalated")
        return ("Escalated", self._mc_alert(case, now))

    def check_timeouts(self, now: int) -> list[tuple[EmergencyCase, Alert]]:
        fired = []
        for case_id in list(self._open_by_track.values()):
            outcome, alert = self.on_timeout(case_id, now)
            if outcome == "Escalated" and alert is not None:
                fired.append((self.cases[case_id], alert))
        return fired

    def open_cases(self) -> list[EmergencyCase]:
        return [self.cases[cid] for cid in self._open_by_track.values()]

    # -- assignment compliance ------------------------------------------------

    def check_assignments(self, interactions: list[InteractionEvent], now: int
                          ) -> tuple[list[Alert], list[dict]]:
        """Alerts for astronauts working on the wrong asset; compliant and
        unassigned interactions are returned as log-only records."""
        alerts: list[Alert] = []
        logs: list[dict] = []
        for ev in interactions:
            assigned = self.assignments.get(ev.astronaut_id)
            if assigned is None:
                logs.append({"kind": "UnassignedInteraction",
                             "astronaut": ev.astronaut_id, "asset": ev.asset_id})
                continue
            if assigned == ev.asset_id:
                logs.append({"kind": "CompliantInteraction",
                             "astronaut": ev.astronaut_id, "asset": ev.asset_id})
                continue
            key = (ev.astronaut_id, ev.asset_id)
            last = self._assignment_last.get(key)
            if last is not None and now - last < self.config.debounce_ticks:
                continue
            self._assignment_last[key] = now
            ref = {"astronaut": ev.astronaut_id, "asset": ev.asset_id,
                   "assigned": assigned}
            alerts.append(Alert(ASTRONAUT, "AssignmentViolation", ref, now))
            alerts.append(Alert(MISSION_CONTROL, "AssignmentViolation", ref, now))
        return alerts, logs

    # -- error escalation ------------------------------------------------------

    def on_error(self, report: ErrorReport, now: int) -> Alert | None:
        """Unhandled errors escalate to Mission Control, debounced per
        (source, code); handled ones are log-only."""
        if report.handled:
            return None
        key = (report.source, report.code)
        last = self._error_last.get(key)
        if last is not None and now - last < self.config.debounce_ticks:
            return None
        self._error_last[key] = now
        return Alert(MISSION_CONTROL, "UnhandledError",
                     {"source": report.source, "code": report.code,
                      "severity": report.severity}, now)
