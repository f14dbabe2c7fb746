import pytest

from cisru_sim.mas import (
    AutonomyLevel,
    Goal,
    GoalKind,
    GoalStatus,
    IllegalTransition,
    MasMessage,
    MasRouter,
    MessageKind,
    UnknownRecipient,
    gate_message,
    update_goal_status,
)
from cisru_sim.netsim import Network


def goal_request(required="E4", sender="mission_control", recipient="leader",
                 msg_id="m1"):
    goal = Goal("g1", GoalKind.INSPECT_PANELS, AutonomyLevel(required))
    return MasMessage(MessageKind.GOAL_REQUEST, sender, recipient,
                      {"goal": goal.as_dict()}, 0, msg_id, "g1")


def telecommand(msg_id="m2"):
    return MasMessage(MessageKind.TELECOMMAND, "mission_control", "leader",
                      {"v": 0.1}, 0, msg_id)


class TestGate:
    def test_e4_accepts_e4_goal(self):
        assert gate_message(AutonomyLevel.E4, goal_request("E4")).accepted

    def test_e4_rejects_raw_telecommand(self):
        verdict = gate_message(AutonomyLevel.E4, telecommand())
        assert not verdict.accepted
        assert verdict.reason == "AutonomyLevelMismatch"

    def test_e1_accepts_telecommand_rejects_goal(self):
        assert gate_message(AutonomyLevel.E1, telecommand()).accepted
        verdict = gate_message(AutonomyLevel.E1, goal_request("E4"))
        assert not verdict.accepted
        assert verdict.reason == "AutonomyLevelMismatch"

    def test_safety_traffic_bypasses_gate(self):
        for kind in (MessageKind.ALERT, MessageKind.PROMPT,
                     MessageKind.PROMPT_RESPONSE, MessageKind.OBSERVATION,
                     MessageKind.ACK):
            msg = MasMessage(kind, "a", "leader", {}, 0, "m9")
            assert gate_message(AutonomyLevel.E1, msg).accepted
            assert gate_message(AutonomyLevel.E4, msg).accepted

    def test_e2_stub_accepts_matching_level_only(self):
        assert gate_message(AutonomyLevel.E2, goal_request("E2")).accepted
        assert not gate_message(AutonomyLevel.E2, goal_request("E4")).accepted


class TestGoalStatus:
    def test_legal_chain(self):
        goal = Goal("g", GoalKind.NAVIGATE_TO)
        goal = update_goal_status(goal, GoalStatus.ACCEPTED)
        goal = update_goal_status(goal, GoalStatus.ACTIVE)
        goal = update_goal_status(goal, GoalStatus.FAILED, "Unreachable")
        assert goal.status == GoalStatus.FAILED
        assert goal.failure_reason == "Unreachable"

    def test_illegal_transition_raises(self):
        goal = Goal("g", GoalKind.NAVIGATE_TO, status=GoalStatus.ACHIEVED)
        with pytest.raises(IllegalTransition):
            update_goal_status(goal, GoalStatus.ACTIVE)

    def test_pending_cannot_jump_to_achieved(self):
        goal = Goal("g", GoalKind.NAVIGATE_TO)
        with pytest.raises(IllegalTransition):
            update_goal_status(goal, GoalStatus.ACHIEVED)


def make_router(drop=0.0, seed=0, retransmit=5):
    net = Network(seed=seed, drop_probability=drop)
    router = MasRouter(net, retransmit_period=retransmit)
    router.register("mission_control")
    router.register("leader", AutonomyLevel.E4)
    return router


class TestRelay:
    def test_unknown_recipient(self):
        router = make_router()
        msg = MasMessage(MessageKind.OBSERVATION, "mission_control", "ghost", {}, 0, "m1")
        with pytest.raises(UnknownRecipient):
            router.relay(msg, 0)

    def test_clean_channel_single_delivery_single_ack(self):
        router = make_router()
        router.relay(goal_request(msg_id="mA"), 0)
        delivered = router.step(0)
        assert [m.msg_id for m in delivered] == ["mA"]
        # ack consumed internally, pending cleared on the next step
        router.step(1)
        assert router.pending_count() == 0
        # no duplicate application later
        for now in range(2, 20):
            assert router.step(now) == []

    def test_lossy_channel_exactly_once_application(self):
        applied = 0
        router = make_router(drop=0.5, seed=11, retransmit=5)
        router.relay(goal_request(msg_id="mB"), 0)
        for now in range(200):
            for msg in router.step(now):
                if msg.kind == MessageKind.GOAL_REQUEST:
                    applied += 1
        assert applied == 1
        assert router.pending_count() == 0

    def test_gate_rejection_emits_goal_status(self):
        router = make_router()
        router.set_level("leader", AutonomyLevel.E1)
        router.relay(goal_request(msg_id="mC"), 0)
        assert router.step(0) == []  # rejected at the gate
        status = [m for m in router.step(1) if m.kind == MessageKind.GOAL_STATUS]
        assert len(status) == 1
        assert status[0].recipient == "mission_control"
        assert status[0].payload["goal"]["status"] == "Rejected"

    def test_telecommand_rejected_at_e4_not_delivered(self):
        router = make_router()
        router.relay(telecommand(), 0)
        assert router.step(0) == []
