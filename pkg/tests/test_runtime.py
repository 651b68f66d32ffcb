import numpy as np
import pytest

from asalab.config import load_config
from asalab.dataspace import GRIP_LEFT, GRIP_RIGHT, VIEW_POS, action_from_poses
from asalab.geometry import Pose, Rotation, random_pose
from asalab.runtime import (
    ActionLimits,
    CognitiveGate,
    GripperLatch,
    SubtaskPlan,
    clip_action,
    discretize_gripper,
    gate_update,
    run_episode,
    transition_subtask,
)
from asalab.world.scenarios import SubtaskKind, make_scenario

CFG = load_config()


def replay_gate_oracle(scores, tau=0.7, n=3):
    """Independent re-implementation of the consecutive-threshold rule."""
    fired_at, streak = [], 0
    for i, s in enumerate(scores):
        streak = streak + 1 if s > tau else 0
        if streak >= n:
            fired_at.append(i)
            streak = 0
    return fired_at


class TestGate:
    def test_two_high_scores_do_not_fire(self):
        gate = CognitiveGate()
        for s in (0.8, 0.8):
            gate, fired = gate_update(gate, s)
        assert not fired

    def test_three_high_scores_fire_on_third(self):
        gate = CognitiveGate()
        outcomes = []
        for s in (0.8, 0.8, 0.8):
            gate, fired = gate_update(gate, s)
            outcomes.append(fired)
        assert outcomes == [False, False, True]
        assert gate.streak == 0

    def test_interrupted_sequence(self):
        gate = CognitiveGate()
        outcomes = []
        for s in (0.8, 0.6, 0.8, 0.8, 0.8):
            gate, fired = gate_update(gate, s)
            outcomes.append(fired)
        assert outcomes == [False, False, False, False, True]

    def test_boundary_is_strict(self):
        gate = CognitiveGate()
        for _ in range(5):
            gate, fired = gate_update(gate, 0.7)
            assert not fired

    def test_agreement_with_replay_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(300):
            scores = rng.random(int(rng.integers(1, 60)))
            gate = CognitiveGate()
            fired_at = []
            for i, s in enumerate(scores):
                gate, fired = gate_update(gate, float(s))
                if fired:
                    fired_at.append(i)
            assert fired_at == replay_gate_oracle(scores)


class TestGripper:
    def test_truth_table(self):
        latch = GripperLatch(previous_w=0.05, w_max=0.1)
        w, latch = discretize_gripper(0.8, latch)
        assert w == 0.1
        w, latch = discretize_gripper(0.2, latch)
        assert w == 0.0
        latch = GripperLatch(previous_w=0.1, w_max=0.1)
        w, latch = discretize_gripper(0.5, latch)
        assert w == 0.1

    def test_hold_persists(self):
        latch = GripperLatch(previous_w=0.0, w_max=0.1)
        for a in (0.5, 0.4, 0.69, 0.31):
            w, latch = discretize_gripper(a, latch)
            assert w == 0.0


class TestTransition:
    def test_not_fired_unchanged(self):
        plan = SubtaskPlan(("a", "b"), (SubtaskKind.SEARCH, SubtaskKind.PLACE))
        plan2, reset, terminal = transition_subtask(plan, False)
        assert plan2 == plan and not reset and not terminal

    def test_fired_advances_with_memory_reset(self):
        plan = SubtaskPlan(("a", "b", "c"),
                           (SubtaskKind.SEARCH,) * 3, index=0)
        plan2, reset, terminal = transition_subtask(plan, True)
        assert plan2.index == 1 and reset and not terminal

    def test_fired_on_last_is_terminal(self):
        plan = SubtaskPlan(("a", "b"), (SubtaskKind.SEARCH,) * 2, index=1)
        plan2, reset, terminal = transition_subtask(plan, True)
        assert terminal and not reset and plan2.index == 1


class TestClipAction:
    def test_in_limits_untouched(self):
        rng = np.random.default_rng(0)
        a = action_from_poses(random_pose(rng, 1.0), random_pose(rng, 1.0),
                              random_pose(rng, 1.0), 0.5, 0.5)
        out = clip_action(a, ActionLimits())
        assert np.allclose(out, a, atol=1e-9)

    def test_box_clamp(self):
        a = action_from_poses(
            Pose(Rotation.identity(), np.array([5.0, 0.0, 0.0])),
            Pose.identity(), Pose.identity(), 0.5, 0.5)
        out = clip_action(a, ActionLimits(pos_min=-3.0, pos_max=3.0))
        assert out[VIEW_POS][0] == 3.0

    def test_step_cap_truncates_along_direction(self):
        prev = action_from_poses(Pose.identity(), Pose.identity(),
                                 Pose.identity(), 0.5, 0.5)
        nxt = prev.copy()
        nxt[0:3] = [0.12, 0.0, 0.0]
        out = clip_action(nxt, ActionLimits(step_cap_m=0.05), previous=prev)
        assert np.allclose(out[0:3], [0.05, 0.0, 0.0], atol=1e-12)

    def test_gripper_clamped(self):
        a = action_from_poses(Pose.identity(), Pose.identity(),
                              Pose.identity(), 0.5, 0.5)
        a[GRIP_LEFT] = 1.7
        a[GRIP_RIGHT] = -0.2
        out = clip_action(a, ActionLimits())
        assert out[GRIP_LEFT] == 1.0 and out[GRIP_RIGHT] == 0.0


class _CountingDriver:
    """Emits hold-in-place chunks and a constant low score."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.plans = 0

    def begin_episode(self, scenario, base, rng):
        self.base_inv = base.inverse()

    def plan(self, plan_input):
        self.plans += 1
        row = np.asarray(plan_input["window_proprio"][0], dtype=float)
        return np.tile(row, (self.cfg.runtime.chunk_size, 1)), 0.0


class _ScoreSequenceDriver(_CountingDriver):
    def __init__(self, cfg, scores):
        super().__init__(cfg)
        self.scores = list(scores)

    def plan(self, plan_input):
        chunk, _ = super().plan(plan_input)
        score = self.scores.pop(0) if self.scores else 0.0
        return chunk, score


class TestRunEpisode:
    def test_35_steps_four_planning_calls(self):
        sc = make_scenario("cylinder", 0)
        driver = _CountingDriver(CFG)
        dt = CFG.runtime.control_period_s
        record = run_episode(driver, sc, CFG, max_sim_time_s=35 * dt)
        assert record.result["planning_calls"] == 4
        assert driver.plans == 4
        assert len(record.episode) == 35

    def test_memory_cleared_at_every_fired_transition(self):
        sc = make_scenario("cans", 1)  # three sub-tasks
        scores = [0.9] * 40
        driver = _ScoreSequenceDriver(CFG, scores)
        record = run_episode(driver, sc, CFG, max_sim_time_s=10.0)
        transitions = record.result["transitions"]
        assert len(transitions) == 2
        floors = {p["memory_floor"] for p in record.planning_log}
        for step, _ in transitions:
            assert step in floors
        for entry in record.planning_log:
            assert all(i >= entry["memory_floor"]
                       for i in entry["window_indices"])
        # second fire on the final sub-task terminates
        assert record.result["terminal"]

    def test_deterministic_given_seeds(self):
        from asalab.policy.scripted import ScriptedChunkPolicy
        results = []
        for _ in range(2):
            sc = make_scenario("cylinder", 12)
            driver = ScriptedChunkPolicy("cylinder", CFG, seed=12)
            rec = run_episode(driver, sc, CFG, noise_seed=3, policy_seed=4,
                              max_sim_time_s=40.0)
            results.append(rec.episode.action_matrix())
        assert np.array_equal(results[0], results[1])

    def test_lock_subtask_blocks_transitions(self):
        sc = make_scenario("cylinder", 0)
        driver = _ScoreSequenceDriver(CFG, [0.95] * 30)
        rec = run_episode(driver, sc, CFG, max_sim_time_s=8.0,
                          lock_subtask=True)
        assert rec.result["transitions"] == []
        assert not rec.result["terminal"]
