"""Deterministic 2.5-D active-perception world with hidden state."""

from .entities import (
    AgentState,
    ContinuousCommand,
    Entity,
    MacroAction,
    Observation,
    PerturbationEvent,
    StepResult,
    WorldState,
)
from .scenarios import SCENARIO_KINDS, Scenario, SubtaskKind, make_scenario
from .sim import (
    apply_command,
    apply_perturbation,
    entity_quality,
    ground_truth_cognition,
    head_pose,
    observe,
    out_of_view_position,
    step_world,
)
from .beliefs import (
    Belief,
    TabularObservationModel,
    belief_update,
    eig_joint_enumeration,
    entropy_bits,
    expected_info_gain,
    mutual_information,
    predictive_distribution,
    scenario_observation_model,
)

__all__ = [
    "AgentState", "ContinuousCommand", "Entity", "MacroAction", "Observation",
    "PerturbationEvent", "StepResult", "WorldState", "SCENARIO_KINDS",
    "Scenario", "SubtaskKind", "make_scenario", "apply_command",
    "apply_perturbation", "entity_quality", "ground_truth_cognition",
    "head_pose", "observe", "out_of_view_position", "step_world", "Belief",
    "TabularObservationModel", "belief_update", "eig_joint_enumeration",
    "entropy_bits", "expected_info_gain", "mutual_information",
    "predictive_distribution", "scenario_observation_model",
]
