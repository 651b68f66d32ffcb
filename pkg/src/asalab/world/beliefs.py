"""Exact belief filtering and information-gain oracles.

Observation classes are discrete, so every quantity here is computed by
finite enumeration: posterior updates, expected information gain of a
single candidate action (prior entropy minus expected posterior entropy),
and the mutual information between the next observation class and an
action distribution.  All entropies are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ZeroEvidence
from .entities import MacroAction
from .scenarios import Scenario


def entropy_bits(probs) -> float:
    h = 0.0
    for p in probs:
        if p > 0.0:
            h -= p * math.log2(p)
    return h


@dataclass
class Belief:
    """Probability vector over a finite hypothesis set."""

    hypotheses: tuple
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.shape != (len(self.hypotheses),):
            raise ValueError("probability vector length mismatch")
        if np.any(self.probs < -1e-15):
            raise ValueError("negative probability")
        total = float(self.probs.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total}, not 1")

    @classmethod
    def uniform(cls, hypotheses) -> "Belief":
        hypotheses = tuple(hypotheses)
        n = len(hypotheses)
        return cls(hypotheses, np.full(n, 1.0 / n))

    @classmethod
    def from_probs(cls, hypotheses, probs) -> "Belief":
        probs = np.asarray(probs, dtype=float)
        return cls(tuple(hypotheses), probs / probs.sum())

    def prob(self, hyp) -> float:
        return float(self.probs[self.hypotheses.index(hyp)])

    def entropy(self) -> float:
        return entropy_bits(self.probs)


class TabularObservationModel:
    """Likelihood table: (hypothesis, action) -> {obs class: probability}."""

    def __init__(self, table: dict):
        self.table = table

    def likelihood(self, hyp, action) -> dict:
        return self.table[(hyp, action)]

    def obs_classes(self, action, hypotheses) -> list:
        classes = []
        for hyp in hypotheses:
            for cls in self.likelihood(hyp, action):
                if cls not in classes:
                    classes.append(cls)
        return classes


def predictive_distribution(belief: Belief, action, model) -> dict:
    """P(obs class | action) under the current belief."""
    out = {}
    for hyp, prior in zip(belief.hypotheses, belief.probs):
        if prior == 0.0:
            continue
        for cls, lik in model.likelihood(hyp, action).items():
            out[cls] = out.get(cls, 0.0) + prior * lik
    return out


def belief_update(belief: Belief, action, obs_class, model) -> Belief:
    """Posterior proportional to prior times likelihood of the class seen."""
    posterior = np.array([
        prior * model.likelihood(hyp, action).get(obs_class, 0.0)
        for hyp, prior in zip(belief.hypotheses, belief.probs)
    ])
    total = float(posterior.sum())
    if total <= 0.0:
        raise ZeroEvidence(f"observation {obs_class!r} impossible under belief")
    return Belief(belief.hypotheses, posterior / total)


def expected_info_gain(belief: Belief, action, model) -> float:
    """Prior entropy minus expected posterior entropy, in bits.

    Equals the mutual information between the hypothesis and the next
    observation class under the candidate action; always in
    [0, H(belief)].
    """
    prior_h = belief.entropy()
    expected_posterior_h = 0.0
    for cls, p_cls in predictive_distribution(belief, action, model).items():
        if p_cls <= 0.0:
            continue
        posterior = belief_update(belief, action, cls, model)
        expected_posterior_h += p_cls * posterior.entropy()
    return prior_h - expected_posterior_h


def eig_joint_enumeration(belief: Belief, action, model) -> float:
    """Independent oracle for expected_info_gain via the (hyp, obs) joint.

    Sum over the joint of p(h,o) * log2(p(h,o) / (p(h) p(o))).
    """
    marginal = predictive_distribution(belief, action, model)
    total = 0.0
    for hyp, prior in zip(belief.hypotheses, belief.probs):
        if prior == 0.0:
            continue
        for cls, lik in model.likelihood(hyp, action).items():
            joint = prior * lik
            if joint > 0.0:
                total += joint * math.log2(joint / (prior * marginal[cls]))
    return total


def mutual_information(belief: Belief, action_distribution: dict, model) -> float:
    """I(next observation class ; action) for an explicit action distribution.

    Exact enumeration of the joint over (action, observation class) with the
    hypothesis marginalized under the current belief; terms with matching
    conditional and marginal contribute exactly zero, so a deterministic
    action distribution yields exactly 0.0.
    """
    weights = {a: p for a, p in action_distribution.items() if p > 0.0}
    total_w = sum(weights.values())
    if abs(total_w - 1.0) > 1e-9:
        raise ValueError(f"action distribution sums to {total_w}")
    conditionals = {a: predictive_distribution(belief, a, model) for a in weights}
    marginal = {}
    for a, p_a in weights.items():
        for cls, p in conditionals[a].items():
            marginal[cls] = marginal.get(cls, 0.0) + p_a * p
    info = 0.0
    for a, p_a in weights.items():
        for cls, p in conditionals[a].items():
            if p > 0.0:
                info += p_a * p * math.log2(p / marginal[cls])
    return info


def scenario_observation_model(scenario: Scenario) -> tuple:
    """(prior, actions, model) for a scenario's oracle-facing discretization.

    Observation classes are region-tagged: looking at or opening a region
    reports either ("found", region) or ("none", region); actions that
    cannot touch the hidden state report ("none", "idle").
    """
    kind = scenario.kind
    hyps = scenario.hypotheses
    prior = Belief.uniform(hyps)
    idle = {("none", "idle"): 1.0}

    def reveal(region_of_action, hyp):
        if hyp == region_of_action:
            return {("found", region_of_action): 1.0}
        return {("none", region_of_action): 1.0}

    table = {}
    if kind == "croissant":
        actions = [MacroAction.pan(1.05), MacroAction.pan(-1.05),
                   MacroAction.no_op()]
        regions = {actions[0]: "left", actions[1]: "right"}
    elif kind == "cans":
        actions = [MacroAction.rotate_base(-math.pi / 2),
                   MacroAction.rotate_base(-3 * math.pi / 4),
                   MacroAction.rotate_base(math.pi),
                   MacroAction.no_op()]
        regions = {actions[0]: "right", actions[1]: "right-back",
                   actions[2]: "behind"}
    elif kind == "bottle":
        open_act = MacroAction.open("cabinet")
        actions = [open_act, MacroAction.no_op()]
        for hyp in hyps:
            table[(hyp, open_act)] = {("found", hyp): 1.0}
        regions = {}
    elif kind == "cylinder":
        actions = [MacroAction.uncover("bowl_left"),
                   MacroAction.uncover("bowl_right"),
                   MacroAction.pan(0.4), MacroAction.no_op()]
        regions = {actions[0]: "left", actions[1]: "right"}
        for hyp in hyps:
            table[(hyp, actions[2])] = dict(idle)
    elif kind == "ringpeg":
        look = MacroAction.no_op()
        approach = MacroAction.bring_closer("peg")
        actions = [look, approach]
        for hyp in hyps:
            # The peg is visible from the start: looking resolves near/far.
            table[(hyp, look)] = {("found", hyp): 1.0}
            table[(hyp, approach)] = {("found", "near"): 1.0}
        regions = {}
    else:
        raise ValueError(f"unknown scenario kind {kind!r}")

    for action in actions:
        for hyp in hyps:
            if (hyp, action) in table:
                continue
            if action in regions:
                table[(hyp, action)] = reveal(regions[action], hyp)
            else:
                table[(hyp, action)] = dict(idle)
    return prior, actions, TabularObservationModel(table)
