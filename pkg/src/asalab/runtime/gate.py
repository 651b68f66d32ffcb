"""Cognitive-gate debouncing and gripper command discretization."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class CognitiveGate:
    """Fires when the score stays above tau for n consecutive updates."""

    tau: float = 0.7
    n: int = 3
    streak: int = 0


def gate_update(gate: CognitiveGate, score: float) -> tuple[CognitiveGate, bool]:
    streak = gate.streak + 1 if score > gate.tau else 0
    fired = streak >= gate.n
    if fired:
        streak = 0
    return replace(gate, streak=streak), fired


@dataclass(frozen=True)
class GripperLatch:
    """Holds the previous commanded width between threshold crossings."""

    previous_w: float
    w_max: float = 0.1


def discretize_gripper(a_grip: float, latch: GripperLatch) -> tuple[float, GripperLatch]:
    """Open above 0.7, close below 0.3, hold the previous width otherwise."""
    if a_grip > 0.7:
        width = latch.w_max
    elif a_grip < 0.3:
        width = 0.0
    else:
        width = latch.previous_w
    return width, replace(latch, previous_w=width)
