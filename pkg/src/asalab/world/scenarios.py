"""Scenario catalog: five hidden-information tasks at desk scale.

Placement randomization follows the collection statistics of the source
demonstrations (side splits per task); every scenario is deterministic in
its seed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..geometry import ChassisState, HeadState
from .entities import AgentState, Entity, WorldState

SCENARIO_KINDS = ("croissant", "cans", "bottle", "cylinder", "ringpeg")

TABLE_Z = 0.80


class SubtaskKind(enum.Enum):
    SEARCH = "search"            # target centered in view
    SEARCH_BIN = "search-bin"    # bin centered in view
    EXPOSE = "expose"            # target no longer occluded
    ENRICH = "enrich"            # visibility quality at the peg >= q_min
    PICK_ALL = "pick-all"        # every target-kind entity held
    PLACE = "place"              # target released inside the goal region
    RETRIEVE = "retrieve"        # target released at the drop point
    DEPOSIT = "deposit"          # all targets released inside the bin
    INSERT = "insert"            # ring inserted on the peg


@dataclass
class Scenario:
    kind: str
    seed: int
    world: WorldState
    agent: AgentState
    hypotheses: tuple
    instructions: list           # [(text, SubtaskKind)]

    @property
    def instruction_texts(self) -> list:
        return [text for text, _ in self.instructions]


def _agent(pitch: float) -> AgentState:
    return AgentState(chassis=ChassisState(0.0, 0.0, 0.0),
                      head=HeadState(pitch=pitch, yaw=0.0))


def _pick_side(rng: np.random.Generator, p_left: float) -> str:
    return "left" if rng.random() < p_left else "right"


def make_scenario(kind: str, seed: int) -> Scenario:
    """Build (world, agent, hypotheses, sub-task instructions) for a task."""
    rng = np.random.default_rng(seed)
    if kind == "croissant":
        side = _pick_side(rng, 0.492)
        bearing = rng.uniform(0.95, 1.15) * (1.0 if side == "left" else -1.0)
        radius = rng.uniform(0.62, 0.75)
        entities = {
            "plate": Entity("plate", "bin",
                            np.array([0.70, 0.0, TABLE_Z])),
            "croissant": Entity("croissant", "target",
                                np.array([radius * np.cos(bearing),
                                          radius * np.sin(bearing), TABLE_Z])),
        }
        world = WorldState(entities, side, ("left", "right"), seed,
                           meta={"target": "croissant", "goal": "plate",
                                 "goal_pos": (0.70, 0.0, TABLE_Z)})
        instructions = [
            ("scan the table for the croissant", SubtaskKind.SEARCH),
            ("pick up the croissant and place it on the plate", SubtaskKind.PLACE),
        ]
        return Scenario(kind, seed, world, _agent(0.55), ("left", "right"),
                        instructions)

    if kind == "cans":
        draw = rng.random()
        if draw < 0.282:
            region, bearing = "behind", np.pi + rng.uniform(-0.15, 0.15)
        elif draw < 0.564:
            region, bearing = "right", -np.pi / 2 + rng.uniform(-0.15, 0.15)
        else:
            region, bearing = "right-back", -3 * np.pi / 4 + rng.uniform(-0.15, 0.15)
        dist = rng.uniform(1.6, 1.9)
        entities = {
            "can_a": Entity("can_a", "target", np.array([0.62, 0.10, TABLE_Z])),
            "can_b": Entity("can_b", "target", np.array([0.62, -0.10, TABLE_Z])),
            "dustbin": Entity("dustbin", "bin",
                              np.array([dist * np.cos(bearing),
                                        dist * np.sin(bearing), 0.35])),
        }
        world = WorldState(entities, region, ("behind", "right", "right-back"),
                           seed, meta={"target": "dustbin", "goal": "dustbin"})
        instructions = [
            ("pick up both cans", SubtaskKind.PICK_ALL),
            ("turn and find the dustbin", SubtaskKind.SEARCH_BIN),
            ("carry the cans to the dustbin and drop them in", SubtaskKind.DEPOSIT),
        ]
        return Scenario(kind, seed, world, _agent(0.55),
                        ("behind", "right", "right-back"), instructions)

    if kind == "bottle":
        tier = "top" if rng.random() < 0.5 else "bottom"
        z = 1.10 if tier == "top" else 0.60
        entities = {
            "cabinet": Entity("cabinet", "shelf-unit",
                              np.array([0.78, 0.0, 0.85]), open_flag=False),
            "bottle": Entity("bottle", "target",
                             np.array([0.78, rng.uniform(-0.05, 0.05), z]),
                             contains="cabinet"),
        }
        world = WorldState(entities, tier, ("top", "bottom"), seed,
                           meta={"target": "bottle", "cover": "cabinet",
                                 "goal_pos": (0.55, 0.15, TABLE_Z)})
        instructions = [
            ("open the cabinet", SubtaskKind.EXPOSE),
            ("take the bottle to the table", SubtaskKind.RETRIEVE),
        ]
        return Scenario(kind, seed, world, _agent(0.45), ("top", "bottom"),
                        instructions)

    if kind == "cylinder":
        side = "left" if rng.random() < 0.5 else "right"
        jitter = lambda: rng.uniform(-0.03, 0.03)  # noqa: E731
        left_pos = np.array([0.68 + jitter(), 0.25 + jitter(), TABLE_Z])
        right_pos = np.array([0.68 + jitter(), -0.25 + jitter(), TABLE_Z])
        under = left_pos if side == "left" else right_pos
        entities = {
            "bowl_left": Entity("bowl_left", "container", left_pos,
                                open_flag=False),
            "bowl_right": Entity("bowl_right", "container", right_pos,
                                 open_flag=False),
            "cylinder": Entity("cylinder", "target", under.copy(),
                               contains=f"bowl_{side}"),
            "goal": Entity("goal", "bin", np.array([0.50, 0.0, TABLE_Z])),
        }
        world = WorldState(entities, side, ("left", "right"), seed,
                           meta={"target": "cylinder", "goal": "goal",
                                 "goal_pos": (0.50, 0.0, TABLE_Z),
                                 "covers": ("bowl_left", "bowl_right")})
        instructions = [
            ("uncover the bowls to find the cylinder", SubtaskKind.EXPOSE),
            ("pick up the cylinder and place it at the goal", SubtaskKind.PLACE),
        ]
        return Scenario(kind, seed, world, _agent(0.55), ("left", "right"),
                        instructions)

    if kind == "ringpeg":
        zone = "near" if rng.random() < 0.492 else "far"
        if zone == "near":
            peg_pos = np.array([0.55 + rng.uniform(-0.03, 0.03),
                                0.12 + rng.uniform(-0.03, 0.03), TABLE_Z])
        else:
            peg_pos = np.array([1.55 + rng.uniform(-0.05, 0.05),
                                0.25 + rng.uniform(-0.05, 0.05), TABLE_Z])
        entities = {
            "peg": Entity("peg", "peg", peg_pos),
            "ring": Entity("ring", "ring", np.array([0.48, -0.20, TABLE_Z])),
        }
        world = WorldState(entities, zone, ("near", "far"), seed,
                           meta={"target": "peg", "ring": "ring",
                                 "near_pos": (0.55, 0.12, TABLE_Z)})
        instructions = [
            ("bring the peg within reach", SubtaskKind.ENRICH),
            ("insert the ring onto the peg", SubtaskKind.INSERT),
        ]
        return Scenario(kind, seed, world, _agent(0.50), ("near", "far"),
                        instructions)

    raise ValueError(f"unknown scenario kind {kind!r}")


def all_instruction_texts() -> list:
    """Every sub-task instruction plus per-task monolithic instructions."""
    texts = []
    for kind in SCENARIO_KINDS:
        sc = make_scenario(kind, 0)
        texts.extend(sc.instruction_texts)
        texts.append(monolithic_instruction(kind))
    # dedupe, stable order
    seen, out = set(), []
    for t in texts:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def monolithic_instruction(kind: str) -> str:
    return {
        "croissant": "find the croissant and place it on the plate",
        "cans": "throw both cans into the dustbin",
        "bottle": "open the cabinet and take the bottle to the table",
        "cylinder": "find the hidden cylinder and place it at the goal",
        "ringpeg": "insert the ring onto the peg",
    }[kind]
