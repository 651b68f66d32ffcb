"""World dynamics: sensing, macro steps, continuous steps, perturbations."""

from __future__ import annotations

import math

import numpy as np

from ..config import LabConfig
from ..dataspace import Percept
from ..errors import UnknownEntity
from ..geometry import MountCalibration, Pose, aggregate_head, wrap_angle
from .entities import (
    GRASPABLE_KINDS,
    AgentState,
    ContinuousCommand,
    MacroAction,
    Observation,
    PerturbationEvent,
    StepResult,
    WorldState,
)
from .scenarios import SubtaskKind

_CLOSED_WIDTH = 0.02   # gripper width treated as closed, m
_OPEN_FRACTION = 0.8   # width above this fraction of w_max counts as open


def head_pose(agent: AgentState, cfg: LabConfig) -> Pose:
    calib = MountCalibration(z_fixed=cfg.geometry.z_fixed)
    return aggregate_head(agent.chassis, agent.head, calib)


def entity_quality(world: WorldState, agent: AgentState, entity_id: str,
                   cfg: LabConfig) -> float:
    """Visibility quality min(1, d_ref / d) from the current head position."""
    pose = head_pose(agent, cfg)
    d = float(np.linalg.norm(world.entity(entity_id).position - pose.translation))
    return min(1.0, cfg.world.d_ref / max(d, 1e-9))


def off_axis_angle(world: WorldState, agent: AgentState, entity_id: str,
                   cfg: LabConfig) -> float:
    pose = head_pose(agent, cfg)
    rel = pose.inverse().transform_point(world.entity(entity_id).position)
    d = float(np.linalg.norm(rel))
    if d < 1e-9:
        return 0.0
    return math.acos(min(1.0, max(-1.0, float(rel[0]) / d)))


def observe(world: WorldState, agent: AgentState, cfg: LabConfig,
            rng: np.random.Generator, timestamp: float = 0.0) -> Observation:
    """Percepts for every present, unoccluded entity inside the FOV cone.

    Positions are reported in the head frame with additive noise of scale
    sigma0 * max(1, d / d_ref); quality is min(1, d_ref / d).
    """
    pose = head_pose(agent, cfg)
    inv = pose.inverse()
    percepts = []
    for eid, e in sorted(world.entities.items()):
        if not e.present or world.hidden(eid):
            continue
        rel = inv.transform_point(e.position)
        d = float(np.linalg.norm(rel))
        if d < 1e-9:
            continue
        if math.acos(min(1.0, max(-1.0, float(rel[0]) / d))) > cfg.world.fov_half_angle:
            continue
        sigma = cfg.world.sigma0 * max(1.0, d / cfg.world.d_ref)
        quality = min(1.0, cfg.world.d_ref / d)
        percepts.append(Percept(
            entity_id=eid,
            kind=e.kind,
            position=rel + rng.normal(0.0, sigma, size=3),
            yaw=wrap_angle(e.yaw - (agent.chassis.yaw + agent.head.yaw)),
            quality=quality,
            open_flag=(e.open_flag if e.kind in ("container", "shelf-unit") else None),
        ))
    proprio = {
        "chassis": (agent.chassis.x, agent.chassis.y, agent.chassis.yaw),
        "head": (agent.head.pitch, agent.head.yaw),
        "eff_left": tuple(float(v) for v in agent.eff_left),
        "eff_right": tuple(float(v) for v in agent.eff_right),
        "grip_left_w": agent.grip_left_w,
        "grip_right_w": agent.grip_right_w,
        "held": dict(agent.held),
    }
    return Observation(percepts=percepts, proprio=proprio, timestamp=timestamp)


def _clamp(v, lo, hi):
    return min(hi, max(lo, v))


def step_world(world: WorldState, agent: AgentState, action: MacroAction,
               cfg: LabConfig, rng: np.random.Generator,
               timestamp: float = 0.0) -> StepResult:
    """Apply one macro action; illegal actions return a flag, never raise."""
    w = world.copy()
    a = agent.copy()
    illegal, reason = False, None
    name = action.name

    if name == "pan":
        lo, hi = cfg.geometry.head_yaw_limits
        a.head.yaw = _clamp(a.head.yaw + action.value, lo, hi)
    elif name == "tilt":
        lo, hi = cfg.geometry.head_pitch_limits
        a.head.pitch = _clamp(a.head.pitch + action.value, lo, hi)
    elif name == "rotate_base":
        a.chassis.yaw = wrap_angle(a.chassis.yaw + action.value)
    elif name == "advance":
        a.chassis.x += action.value * math.cos(a.chassis.yaw)
        a.chassis.y += action.value * math.sin(a.chassis.yaw)
    elif name in ("uncover", "open"):
        e = w.entities.get(action.entity)
        if e is None or not e.present:
            illegal, reason = True, "unknown-entity"
        elif e.kind not in ("container", "shelf-unit"):
            illegal, reason = True, "not-a-cover"
        else:
            e.open_flag = True
    elif name == "grasp":
        e = w.entities.get(action.entity)
        if e is None or not e.present:
            illegal, reason = True, "unknown-entity"
        elif w.hidden(action.entity):
            illegal, reason = True, "occluded"
        elif float(np.linalg.norm(a.effector(action.hand) - e.position)) > cfg.world.reach_radius:
            illegal, reason = True, "out-of-reach"
        elif a.held[action.hand] is not None:
            illegal, reason = True, "hand-busy"
        else:
            a.held[action.hand] = action.entity
            e.contains = None
            if action.hand == "left":
                a.eff_left = e.position.copy()
                a.grip_left_w = 0.0
            else:
                a.eff_right = e.position.copy()
                a.grip_right_w = 0.0
    elif name == "place":
        held = a.held[action.hand]
        if held is None:
            illegal, reason = True, "empty-hand"
        else:
            e = w.entities[held]
            e.position = np.asarray(action.pose, dtype=float)
            a.held[action.hand] = None
            if action.hand == "left":
                a.grip_left_w = cfg.world.w_max
            else:
                a.grip_right_w = cfg.world.w_max
    elif name == "bring_closer":
        e = w.entities.get(action.entity)
        if e is None or not e.present:
            illegal, reason = True, "unknown-entity"
        else:
            horiz = e.position[:2] - np.array([a.chassis.x, a.chassis.y])
            dist = float(np.linalg.norm(horiz))
            if dist > 1e-9:
                scale = cfg.world.bring_near_distance / dist
                e.position = np.array([
                    a.chassis.x + horiz[0] * scale,
                    a.chassis.y + horiz[1] * scale,
                    e.position[2],
                ])
    elif name == "insert":
        ring = w.entities.get(action.entity)
        peg = w.entities.get(action.entity2)
        if ring is None or peg is None:
            illegal, reason = True, "unknown-entity"
        elif entity_quality(w, a, action.entity2, cfg) < cfg.world.q_min:
            illegal, reason = True, "low-visibility"
        else:
            ring.inserted_on = action.entity2
            ring.position = peg.position.copy()
            for hand in ("left", "right"):
                if a.held[hand] == action.entity:
                    a.held[hand] = None
    elif name == "no_op":
        pass
    else:
        illegal, reason = True, f"unknown-action:{name}"

    obs = observe(w, a, cfg, rng, timestamp=timestamp)
    return StepResult(world=w, agent=a, observation=obs,
                      illegal=illegal, reason=reason)


def _slew_scalar(current, target, rate, dt):
    if target is None:
        return current
    delta = target - current
    step = rate * dt
    return current + _clamp(delta, -step, step)


def _slew_point(current, target, speed, dt):
    if target is None:
        return current
    delta = np.asarray(target, dtype=float) - current
    dist = float(np.linalg.norm(delta))
    step = speed * dt
    if dist <= step or dist < 1e-12:
        return np.asarray(target, dtype=float).copy()
    return current + delta * (step / dist)


def apply_command(world: WorldState, agent: AgentState, cmd: ContinuousCommand,
                  dt: float, cfg: LabConfig) -> tuple[WorldState, AgentState, list]:
    """Advance the world one control period under a continuous command.

    Mechanical rate limits apply to the gimbal and effectors; grasp, uncover,
    release, and insertion follow proximity rules.  Returns the produced
    world-side events, e.g. "uncover:bowl_left" or "grasp:right:cylinder".
    """
    w = world.copy()
    a = agent.copy()
    events = []
    ctl = cfg.runtime.controller

    v = _clamp(cmd.base_v, -ctl.v_max, ctl.v_max)
    om = _clamp(cmd.base_w, -ctl.w_max, ctl.w_max)
    a.chassis.x += v * math.cos(a.chassis.yaw) * dt
    a.chassis.y += v * math.sin(a.chassis.yaw) * dt
    a.chassis.yaw = wrap_angle(a.chassis.yaw + om * dt)

    plo, phi = cfg.geometry.head_pitch_limits
    ylo, yhi = cfg.geometry.head_yaw_limits
    a.head.pitch = _clamp(_slew_scalar(a.head.pitch, cmd.head_pitch,
                                       cfg.world.head_rate, dt), plo, phi)
    a.head.yaw = _clamp(_slew_scalar(a.head.yaw, cmd.head_yaw,
                                     cfg.world.head_rate, dt), ylo, yhi)

    a.eff_left = _slew_point(a.eff_left, cmd.eff_left, cfg.world.effector_speed, dt)
    a.eff_right = _slew_point(a.eff_right, cmd.eff_right, cfg.world.effector_speed, dt)
    if cmd.grip_left_w is not None:
        a.grip_left_w = _clamp(cmd.grip_left_w, 0.0, cfg.world.w_max)
    if cmd.grip_right_w is not None:
        a.grip_right_w = _clamp(cmd.grip_right_w, 0.0, cfg.world.w_max)

    # Covers flip open when an effector reaches them.
    for eid, e in w.entities.items():
        if e.kind in ("container", "shelf-unit") and e.present and not e.open_flag:
            d = min(float(np.linalg.norm(a.eff_left - e.position)),
                    float(np.linalg.norm(a.eff_right - e.position)))
            if d <= cfg.world.uncover_radius:
                e.open_flag = True
                events.append(f"uncover:{eid}")

    for trig in cmd.triggers:
        events.extend(_apply_trigger(w, a, trig, cfg))

    for hand in ("left", "right"):
        width = a.grip_left_w if hand == "left" else a.grip_right_w
        point = a.effector(hand)
        held = a.held[hand]
        if held is None and width <= _CLOSED_WIDTH:
            best, best_d = None, cfg.world.grasp_radius
            for eid, e in w.entities.items():
                if e.kind not in GRASPABLE_KINDS or not e.present:
                    continue
                if w.hidden(eid) or e.inserted_on is not None:
                    continue
                if eid in a.held.values():
                    continue
                d = float(np.linalg.norm(point - e.position))
                if d <= best_d:
                    best, best_d = eid, d
            if best is not None:
                a.held[hand] = best
                w.entities[best].contains = None
                events.append(f"grasp:{hand}:{best}")
        elif held is not None and width >= _OPEN_FRACTION * cfg.world.w_max:
            a.held[hand] = None
            e = w.entities[held]
            e.position = point.copy()
            events.append(f"release:{hand}:{held}")
            if e.kind == "ring":
                for pid, peg in w.entities.items():
                    if peg.kind != "peg" or not peg.present:
                        continue
                    if (float(np.linalg.norm(e.position - peg.position))
                            <= cfg.world.insert_radius
                            and entity_quality(w, a, pid, cfg) >= cfg.world.q_min):
                        e.inserted_on = pid
                        e.position = peg.position.copy()
                        events.append(f"insert:{held}:{pid}")
                        break

    # Held entities ride along with their effector.
    for hand in ("left", "right"):
        if a.held[hand] is not None:
            w.entities[a.held[hand]].position = a.effector(hand).copy()

    return w, a, events


def _apply_trigger(w: WorldState, a: AgentState, trig: str, cfg: LabConfig) -> list:
    events = []
    if trig in ("uncover", "open"):
        best, best_d = None, cfg.world.reach_radius
        for eid, e in w.entities.items():
            if e.kind in ("container", "shelf-unit") and e.present and not e.open_flag:
                d = min(float(np.linalg.norm(a.eff_left - e.position)),
                        float(np.linalg.norm(a.eff_right - e.position)))
                if d <= best_d:
                    best, best_d = eid, d
        if best is not None:
            w.entities[best].open_flag = True
            events.append(f"uncover:{best}")
    elif trig.startswith("grasp:"):
        hand = trig.split(":", 1)[1]
        point = a.effector(hand)
        if a.held[hand] is None:
            best, best_d = None, 2.0 * cfg.world.grasp_radius
            for eid, e in w.entities.items():
                if (e.kind in GRASPABLE_KINDS and e.present and not w.hidden(eid)
                        and e.inserted_on is None and eid not in a.held.values()):
                    d = float(np.linalg.norm(point - e.position))
                    if d <= best_d:
                        best, best_d = eid, d
            if best is not None:
                a.held[hand] = best
                w.entities[best].contains = None
                if hand == "left":
                    a.grip_left_w = 0.0
                else:
                    a.grip_right_w = 0.0
                events.append(f"grasp:{hand}:{best}")
    return events


def apply_perturbation(world: WorldState, event: PerturbationEvent) -> WorldState:
    w = world.copy()
    e = w.entities.get(event.entity_id)
    if e is None or not e.present:
        raise UnknownEntity(event.entity_id)
    if event.variant == "disappearance":
        e.present = False
    elif event.variant == "relocation":
        e.position = np.asarray(event.new_position, dtype=float)
        e.contains = None
    else:
        raise ValueError(f"unknown perturbation {event.variant!r}")
    return w


def out_of_view_position(world: WorldState, agent: AgentState, cfg: LabConfig,
                         rng: np.random.Generator, radius_range=(0.62, 0.78),
                         z: float = 0.80) -> np.ndarray:
    """A tabletop position outside the current FOV cone (for relocations)."""
    pose = head_pose(agent, cfg)
    inv = pose.inverse()
    for _ in range(256):
        bearing = rng.uniform(-1.15, 1.15)
        r = rng.uniform(*radius_range)
        cand = np.array([r * math.cos(bearing), r * math.sin(bearing), z])
        rel = inv.transform_point(cand)
        d = float(np.linalg.norm(rel))
        ang = math.acos(min(1.0, max(-1.0, float(rel[0]) / d)))
        if ang > cfg.world.fov_half_angle + 0.1:
            return cand
    return np.array([-0.8, 0.0, z])


def ground_truth_cognition(world: WorldState, agent: AgentState,
                           subtask_kind: SubtaskKind, cfg: LabConfig) -> int:
    """1 iff the sub-task's resolution predicate currently holds."""
    meta = world.meta
    target_id = meta.get("target")

    def centered(eid):
        e = world.entities.get(eid)
        if e is None or not e.present or world.hidden(eid):
            return False
        return off_axis_angle(world, agent, eid, cfg) <= cfg.world.eps_center

    def released_within(eid, pos, radius):
        e = world.entities.get(eid)
        if e is None or not e.present or eid in agent.held.values():
            return False
        return float(np.linalg.norm(e.position[:2] - np.asarray(pos)[:2])) <= radius

    if subtask_kind is SubtaskKind.SEARCH:
        return int(centered(target_id))
    if subtask_kind is SubtaskKind.SEARCH_BIN:
        return int(centered(meta.get("goal", target_id)))
    if subtask_kind is SubtaskKind.EXPOSE:
        e = world.entities.get(target_id)
        return int(e is not None and e.present and not world.hidden(target_id))
    if subtask_kind is SubtaskKind.ENRICH:
        e = world.entities.get(target_id)
        if e is None or not e.present:
            return 0
        return int(entity_quality(world, agent, target_id, cfg) >= cfg.world.q_min)
    if subtask_kind is SubtaskKind.PICK_ALL:
        targets = [eid for eid, e in world.entities.items()
                   if e.kind == "target" and e.present]
        return int(targets and all(eid in agent.held.values() for eid in targets))
    if subtask_kind is SubtaskKind.PLACE:
        return int(released_within(target_id, meta["goal_pos"], cfg.world.goal_radius))
    if subtask_kind is SubtaskKind.RETRIEVE:
        e = world.entities.get(target_id)
        if e is None or world.hidden(target_id):
            return 0
        return int(released_within(target_id, meta["goal_pos"], cfg.world.goal_radius))
    if subtask_kind is SubtaskKind.DEPOSIT:
        goal = world.entities[meta["goal"]]
        targets = [eid for eid, e in world.entities.items()
                   if e.kind == "target" and e.present]
        return int(targets and all(
            released_within(eid, goal.position, 0.25) for eid in targets))
    if subtask_kind is SubtaskKind.INSERT:
        ring = world.entities.get(meta.get("ring"))
        return int(ring is not None and ring.inserted_on is not None)
    raise ValueError(f"unknown sub-task kind {subtask_kind}")
