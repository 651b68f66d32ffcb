"""Deployment loop: gate, gripper latch, chassis control, executor."""

from .gate import CognitiveGate, GripperLatch, discretize_gripper, gate_update
from .chassis import ControllerPhase, chassis_step
from .executor import (
    ActionLimits,
    EpisodeRecord,
    SubtaskPlan,
    clip_action,
    run_episode,
    transition_subtask,
)

__all__ = [
    "CognitiveGate", "GripperLatch", "discretize_gripper", "gate_update",
    "ControllerPhase", "chassis_step", "ActionLimits", "EpisodeRecord",
    "SubtaskPlan", "clip_action", "run_episode", "transition_subtask",
]
