import pytest

from cisru_sim.percept import FallEvent, InteractionEvent
from cisru_sim.supervise import (
    Alert,
    ErrorReport,
    SuperviseConfig,
    Supervisor,
)


def fall(track="t1", entity="astro1", tick=100):
    return FallEvent(track, entity, tick)


def interaction(astro="astro1", asset="panel2", tick=0):
    return InteractionEvent("t1", "t2", astro, asset, 0.4, tick)


def make(t_ack=30.0, dt=1.0, debounce=50, assignments=None):
    sup = Supervisor(SuperviseConfig(t_ack=t_ack, debounce_ticks=debounce), dt=dt)
    sup.assignments = assignments or {}
    return sup


class TestEmergency:
    def test_fall_opens_prompted_case(self):
        sup = make()
        case, prompt = sup.on_fall(fall(tick=100), now=100)
        assert case.state == "Prompted"
        assert case.t_detect == 100 and case.t_prompt == 100
        assert prompt.case_id == case.case_id

    def test_second_fall_same_track_debounced(self):
        sup = make()
        sup.on_fall(fall(), now=100)
        assert sup.on_fall(fall(tick=101), now=101) is None
        assert len(sup.cases) == 1

    def test_two_astronauts_two_cases(self):
        sup = make()
        sup.on_fall(FallEvent("t1", "astro1", 5), now=5)
        sup.on_fall(FallEvent("t2", "astro2", 5), now=5)
        assert len(sup.cases) == 2

    def test_safe_response_closes_without_alert(self):
        sup = make()
        case, _ = sup.on_fall(fall(), now=100)
        outcome, alert = sup.on_prompt_response(case.case_id, "Safe", now=110)
        assert outcome == "ClosedSafe"
        assert alert is None
        assert sup.cases[case.case_id].state == "ClosedSafe"

    def test_emergency_response_escalates_immediately(self):
        sup = make()
        case, _ = sup.on_fall(fall(), now=100)
        outcome, alert = sup.on_prompt_response(case.case_id, "Emergency", now=105)
        assert outcome == "Escalated"
        assert alert.recipient == "MissionControl"
        assert alert.tick == 105

    def test_stale_response_ignored(self):
        sup = make()
        case, _ = sup.on_fall(fall(), now=100)
        sup.on_prompt_response(case.case_id, "Safe", now=110)
        outcome, alert = sup.on_prompt_response(case.case_id, "Emergency", now=120)
        assert outcome == "StaleResponse"
        assert alert is None
        assert sup.cases[case.case_id].state == "ClosedSafe"

    def test_timeout_exact_tick_arithmetic(self):
        sup = make(t_ack=30.0, dt=1.0)
        case, _ = sup.on_fall(fall(tick=100), now=100)
        assert sup.on_timeout(case.case_id, now=129) == ("NoChange", None)
        outcome, alert = sup.on_timeout(case.case_id, now=130)
        assert outcome == "Escalated"
        assert alert.tick == 130

    def test_timeout_scales_with_dt(self):
        sup = make(t_ack=30.0, dt=0.5)  # 60 ticks
        case, _ = sup.on_fall(fall(tick=0), now=0)
        assert sup.on_timeout(case.case_id, now=59) == ("NoChange", None)
        assert sup.on_timeout(case.case_id, now=60)[0] == "Escalated"

    def test_response_beats_timeout(self):
        sup = make()
        case, _ = sup.on_fall(fall(tick=100), now=100)
        sup.on_prompt_response(case.case_id, "Safe", now=129)
        assert sup.check_timeouts(now=130) == []

    def test_single_mc_alert_per_case(self):
        sup = make()
        case, _ = sup.on_fall(fall(tick=0), now=0)
        _, first = sup.on_prompt_response(case.case_id, "Emergency", now=1)
        assert first is not None
        # forcing another escalation path must not duplicate the alert
        assert sup._mc_alert(case, 2) is None

    def test_every_case_reaches_exactly_one_terminal(self):
        sup = make()
        c1, _ = sup.on_fall(FallEvent("t1", "a1", 0), now=0)
        c2, _ = sup.on_fall(FallEvent("t2", "a2", 0), now=0)
        sup.on_prompt_response(c1.case_id, "Safe", now=5)
        fired = sup.check_timeouts(now=30)
        assert [case.case_id for case, _ in fired] == [c2.case_id]
        states = {c.case_id: c.state for c in sup.cases.values()}
        assert states[c1.case_id] == "ClosedSafe"
        assert states[c2.case_id] == "Escalated"
        assert sup.open_cases() == []


class TestAssignments:
    def test_compliant_interaction_no_alert(self):
        sup = make(assignments={"astro1": "panel1"})
        alerts, logs = sup.check_assignments([interaction(asset="panel1")], now=0)
        assert alerts == []
        assert logs[0]["kind"] == "CompliantInteraction"

    def test_violation_alerts_astronaut_and_mc(self):
        sup = make(assignments={"astro1": "panel1"})
        alerts, _ = sup.check_assignments([interaction(asset="panel2")], now=0)
        assert len(alerts) == 2
        assert {a.recipient for a in alerts} == {"Astronaut", "MissionControl"}
        assert all(a.reason == "AssignmentViolation" for a in alerts)

    def test_debounce_suppresses_repeats(self):
        sup = make(assignments={"astro1": "panel1"}, debounce=50)
        first, _ = sup.check_assignments([interaction(asset="panel2")], now=0)
        repeat, _ = sup.check_assignments([interaction(asset="panel2")], now=20)
        after, _ = sup.check_assignments([interaction(asset="panel2")], now=51)
        assert len(first) == 2 and repeat == [] and len(after) == 2

    def test_unassigned_logged_only(self):
        sup = make()
        alerts, logs = sup.check_assignments([interaction(astro="ghost")], now=0)
        assert alerts == []
        assert logs[0]["kind"] == "UnassignedInteraction"


class TestErrors:
    def test_handled_error_no_alert(self):
        sup = make()
        assert sup.on_error(ErrorReport("leader", "ToolUnreachable", handled=True), 0) is None

    def test_unhandled_error_alerts_mc(self):
        sup = make()
        alert = sup.on_error(ErrorReport("leader", "PathBlocked", handled=False), 7)
        assert alert.recipient == "MissionControl"
        assert alert.reason == "UnhandledError"

    def test_duplicate_unhandled_debounced(self):
        sup = make(debounce=50)
        report = ErrorReport("leader", "PathBlocked", handled=False)
        assert sup.on_error(report, 0) is not None
        assert sup.on_error(report, 10) is None
        assert sup.on_error(report, 60) is not None
