"""World, agent, action, and observation containers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..geometry import ChassisState, HeadState

ENTITY_KINDS = ("target", "container", "shelf-unit", "bin", "peg", "ring")
GRASPABLE_KINDS = ("target", "ring", "peg")


@dataclass
class Entity:
    entity_id: str
    kind: str
    position: np.ndarray        # (3,) world frame, meters
    yaw: float = 0.0
    open_flag: bool = True      # only meaningful for container / shelf-unit
    contains: str | None = None  # id of the container this entity sits inside
    present: bool = True
    inserted_on: str | None = None

    def copy(self) -> "Entity":
        return replace(self, position=self.position.copy())


@dataclass
class WorldState:
    entities: dict
    hypothesis: str
    hypothesis_set: tuple
    seed: int
    meta: dict = field(default_factory=dict)

    def copy(self) -> "WorldState":
        return WorldState(
            entities={k: e.copy() for k, e in self.entities.items()},
            hypothesis=self.hypothesis,
            hypothesis_set=self.hypothesis_set,
            seed=self.seed,
            meta=dict(self.meta),
        )

    def entity(self, entity_id: str) -> Entity:
        return self.entities[entity_id]

    def hidden(self, entity_id: str) -> bool:
        """True when the entity sits inside a closed container or shelf."""
        e = self.entities[entity_id]
        if e.contains is None:
            return False
        parent = self.entities.get(e.contains)
        return parent is not None and not parent.open_flag


@dataclass
class AgentState:
    chassis: ChassisState = field(default_factory=ChassisState)
    head: HeadState = field(default_factory=HeadState)
    eff_left: np.ndarray = field(default_factory=lambda: np.array([0.35, 0.18, 0.95]))
    eff_right: np.ndarray = field(default_factory=lambda: np.array([0.35, -0.18, 0.95]))
    grip_left_w: float = 0.1
    grip_right_w: float = 0.1
    held: dict = field(default_factory=lambda: {"left": None, "right": None})

    def copy(self) -> "AgentState":
        return AgentState(
            chassis=ChassisState(self.chassis.x, self.chassis.y, self.chassis.yaw),
            head=HeadState(self.head.pitch, self.head.yaw),
            eff_left=self.eff_left.copy(),
            eff_right=self.eff_right.copy(),
            grip_left_w=self.grip_left_w,
            grip_right_w=self.grip_right_w,
            held=dict(self.held),
        )

    def effector(self, hand: str) -> np.ndarray:
        return self.eff_left if hand == "left" else self.eff_right


@dataclass
class Observation:
    """Field-of-view percepts plus a proprioception echo."""

    percepts: list
    proprio: dict
    timestamp: float

    def percept_for(self, entity_id: str):
        for p in self.percepts:
            if p.entity_id == entity_id:
                return p
        return None

    def percepts_of_kind(self, kind: str) -> list:
        return [p for p in self.percepts if p.kind == kind]


@dataclass(frozen=True)
class MacroAction:
    """Discrete action for oracle enumeration and scripted protocols."""

    name: str
    value: float = 0.0
    entity: str | None = None
    entity2: str | None = None
    hand: str | None = None
    pose: tuple | None = None

    @classmethod
    def pan(cls, d): return cls("pan", value=d)
    @classmethod
    def tilt(cls, d): return cls("tilt", value=d)
    @classmethod
    def rotate_base(cls, d): return cls("rotate_base", value=d)
    @classmethod
    def advance(cls, d): return cls("advance", value=d)
    @classmethod
    def uncover(cls, eid): return cls("uncover", entity=eid)
    @classmethod
    def open(cls, eid): return cls("open", entity=eid)
    @classmethod
    def grasp(cls, hand, eid): return cls("grasp", hand=hand, entity=eid)
    @classmethod
    def place(cls, hand, pose): return cls("place", hand=hand, pose=tuple(pose))
    @classmethod
    def bring_closer(cls, eid): return cls("bring_closer", entity=eid)
    @classmethod
    def insert(cls, eid, peg): return cls("insert", entity=eid, entity2=peg)
    @classmethod
    def no_op(cls): return cls("no_op")


@dataclass
class StepResult:
    world: WorldState
    agent: AgentState
    observation: Observation
    illegal: bool = False
    reason: str | None = None


@dataclass(frozen=True)
class PerturbationEvent:
    time_s: float
    variant: str                 # "disappearance" | "relocation"
    entity_id: str
    new_position: tuple | None = None


@dataclass
class ContinuousCommand:
    """Low-level command frame applied each control period."""

    base_v: float = 0.0
    base_w: float = 0.0
    head_pitch: float | None = None     # absolute gimbal targets, rad
    head_yaw: float | None = None
    eff_left: np.ndarray | None = None  # world-frame target points
    eff_right: np.ndarray | None = None
    grip_left_w: float | None = None    # width commands, meters
    grip_right_w: float | None = None
    triggers: tuple = ()
