"""Exact information-gain oracle tests.

Expected values are computed by hand from entropy arithmetic and frozen
here; the joint-enumeration oracle cross-checks the expected-posterior
implementation on every scenario model.
"""

import math

import numpy as np
import pytest

from asalab.errors import ZeroEvidence
from asalab.world import (
    Belief,
    MacroAction,
    TabularObservationModel,
    belief_update,
    eig_joint_enumeration,
    entropy_bits,
    expected_info_gain,
    make_scenario,
    mutual_information,
    predictive_distribution,
    scenario_observation_model,
)

LOOK_A = MacroAction.pan(0.5)
LOOK_B = MacroAction.pan(-0.5)


def reveal_model(hyps, action_regions):
    """Deterministic region-tagged reveal model."""
    table = {}
    for hyp in hyps:
        for action, region in action_regions.items():
            if region is None:
                table[(hyp, action)] = {("none", "idle"): 1.0}
            elif hyp == region:
                table[(hyp, action)] = {("found", region): 1.0}
            else:
                table[(hyp, action)] = {("none", region): 1.0}
    return TabularObservationModel(table)


class TestBeliefUpdate:
    def test_deterministic_elimination(self):
        model = reveal_model(("A", "B"), {LOOK_A: "A"})
        belief = Belief.uniform(("A", "B"))
        post = belief_update(belief, LOOK_A, ("none", "A"), model)
        assert post.prob("B") == pytest.approx(1.0)
        assert post.prob("A") == pytest.approx(0.0)

    def test_bayes_arithmetic(self):
        table = {
            ("A", LOOK_A): {"c": 0.9, "d": 0.1},
            ("B", LOOK_A): {"c": 0.1, "d": 0.9},
        }
        model = TabularObservationModel(table)
        post = belief_update(Belief.uniform(("A", "B")), LOOK_A, "c", model)
        assert post.prob("A") == pytest.approx(0.9)
        assert post.prob("B") == pytest.approx(0.1)

    def test_uninformative_class_leaves_belief(self):
        model = reveal_model(("A", "B"), {LOOK_A: None})
        post = belief_update(Belief.uniform(("A", "B")), LOOK_A,
                             ("none", "idle"), model)
        assert np.allclose(post.probs, 0.5)

    def test_zero_evidence(self):
        model = reveal_model(("A", "B"), {LOOK_A: "A"})
        with pytest.raises(ZeroEvidence):
            belief_update(Belief.uniform(("A", "B")), LOOK_A, ("found", "B"),
                          model)

    def test_normalization_after_update_chain(self):
        rng = np.random.default_rng(0)
        hyps = tuple("hgfedc")
        actions = [MacroAction.pan(v) for v in (0.1, 0.2, 0.3)]
        table = {}
        for hyp in hyps:
            for act in actions:
                probs = rng.dirichlet(np.ones(3))
                table[(hyp, act)] = {f"c{i}": float(p)
                                     for i, p in enumerate(probs)}
        model = TabularObservationModel(table)
        belief = Belief.uniform(hyps)
        for k in range(50):
            act = actions[k % 3]
            pred = predictive_distribution(belief, act, model)
            cls = max(pred, key=pred.get)
            belief = belief_update(belief, act, cls, model)
            assert abs(belief.probs.sum() - 1.0) <= 1e-12


class TestExpectedInfoGain:
    def test_hypothesis_independent_action_zero(self):
        model = reveal_model(("A", "B"), {LOOK_A: None})
        assert expected_info_gain(Belief.uniform(("A", "B")), LOOK_A,
                                  model) == 0.0

    def test_uniform_two_deterministic_reveal_one_bit(self):
        model = reveal_model(("A", "B"), {LOOK_A: "A"})
        eig = expected_info_gain(Belief.uniform(("A", "B")), LOOK_A, model)
        assert eig == pytest.approx(1.0, abs=1e-9)

    def test_uniform_four_single_uncover(self):
        hyps = ("a", "b", "c", "d")
        model = reveal_model(hyps, {LOOK_A: "a"})
        eig = expected_info_gain(Belief.uniform(hyps), LOOK_A, model)
        expected = 2.0 - 0.75 * math.log2(3.0)
        assert eig == pytest.approx(expected, abs=1e-9)
        assert eig == pytest.approx(0.8113, abs=1e-4)

    def test_never_negative_never_exceeds_prior(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            hyps = tuple(f"h{i}" for i in range(int(rng.integers(2, 6))))
            actions = [MacroAction.pan(float(v))
                       for v in rng.normal(size=3)]
            table = {}
            for hyp in hyps:
                for act in actions:
                    probs = rng.dirichlet(np.ones(4))
                    table[(hyp, act)] = {f"c{i}": float(p)
                                         for i, p in enumerate(probs)}
            model = TabularObservationModel(table)
            belief = Belief.from_probs(hyps, rng.dirichlet(np.ones(len(hyps))))
            for act in actions:
                eig = expected_info_gain(belief, act, model)
                assert -1e-12 <= eig <= belief.entropy() + 1e-12

    def test_matches_joint_enumeration_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(60):
            hyps = tuple(f"h{i}" for i in range(int(rng.integers(2, 7))))
            act = MacroAction.pan(0.1)
            table = {}
            for hyp in hyps:
                probs = rng.dirichlet(np.ones(5))
                table[(hyp, act)] = {f"c{i}": float(p)
                                     for i, p in enumerate(probs)}
            model = TabularObservationModel(table)
            belief = Belief.from_probs(hyps, rng.dirichlet(np.ones(len(hyps))))
            a = expected_info_gain(belief, act, model)
            b = eig_joint_enumeration(belief, act, model)
            assert a == pytest.approx(b, abs=1e-12)


class TestMutualInformation:
    def test_deterministic_action_distribution_exactly_zero(self):
        model = reveal_model(("A", "B"), {LOOK_A: "A", LOOK_B: "B"})
        mi = mutual_information(Belief.uniform(("A", "B")), {LOOK_A: 1.0},
                                model)
        assert mi == 0.0

    def test_side_tagged_classes_one_bit(self):
        model = reveal_model(("left", "right"),
                             {LOOK_A: "left", LOOK_B: "right"})
        mi = mutual_information(Belief.uniform(("left", "right")),
                                {LOOK_A: 0.5, LOOK_B: 0.5}, model)
        assert mi == pytest.approx(1.0, abs=1e-12)

    def test_untagged_classes_zero_bits(self):
        table = {}
        for hyp in ("left", "right"):
            for act, region in ((LOOK_A, "left"), (LOOK_B, "right")):
                cls = "found" if hyp == region else "not-found"
                table[(hyp, act)] = {cls: 1.0}
        model = TabularObservationModel(table)
        mi = mutual_information(Belief.uniform(("left", "right")),
                                {LOOK_A: 0.5, LOOK_B: 0.5}, model)
        assert mi == 0.0


class TestScenarioModels:
    def test_cylinder_branching_ground_truth(self):
        sc = make_scenario("cylinder", 0)
        prior, actions, model = scenario_observation_model(sc)
        gains = {a: expected_info_gain(prior, a, model) for a in actions}
        uncovers = [a for a in actions if a.name == "uncover"]
        others = [a for a in actions if a.name != "uncover"]
        assert len(uncovers) == 2
        assert gains[uncovers[0]] == pytest.approx(gains[uncovers[1]], abs=1e-12)
        assert gains[uncovers[0]] == pytest.approx(1.0, abs=1e-9)
        for a in others:
            assert gains[a] == 0.0

    def test_every_scenario_cross_checked(self):
        from asalab.world.scenarios import SCENARIO_KINDS
        for kind in SCENARIO_KINDS:
            sc = make_scenario(kind, 1)
            prior, actions, model = scenario_observation_model(sc)
            assert len(prior.hypotheses) <= 6
            for act in actions:
                a = expected_info_gain(prior, act, model)
                b = eig_joint_enumeration(prior, act, model)
                assert a == pytest.approx(b, abs=1e-12)
                post_h = prior.entropy() - a
                assert post_h >= -1e-12
