"""Receding-horizon execution of chunk policies against the world.

Each planning cycle builds the memory window, scores cognition, updates
the gate (transitions take effect from the next cycle), samples a chunk,
and executes its first n_exec rows through action clipping, viewpoint
decomposition, the chassis controller, and the gripper latch.  Every
control step is recorded into an episode-format buffer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..config import LabConfig
from ..dataspace import (
    ACTION_DIM,
    GRIP_LEFT,
    GRIP_RIGHT,
    LEFT_POS,
    RIGHT_POS,
    VIEW_POS,
    VIEW_ROT,
    Episode,
    TrajectorySample,
    annotate_cognition,
    action_from_poses,
)
from ..dataspace.actions import POSITION_BLOCKS, ROTATION_BLOCKS
from ..errors import UnreachableTarget
from ..evalmetrics import MarkerTracker
from ..geometry import (
    ChassisState,
    HeadState,
    MountCalibration,
    Pose,
    Rotation,
    decompose_head,
    rot6d_decode,
    rot_y,
    rot_z,
)
from ..world.entities import ContinuousCommand
from ..world.scenarios import Scenario
from ..world.sim import apply_command, apply_perturbation, head_pose, observe, off_axis_angle
from .chassis import ControllerPhase, chassis_step
from .gate import CognitiveGate, GripperLatch, discretize_gripper, gate_update


@dataclass
class ActionLimits:
    pos_min: float = -3.0
    pos_max: float = 3.0
    step_cap_m: float = 0.05


@dataclass(frozen=True)
class SubtaskPlan:
    instructions: tuple
    kinds: tuple
    index: int = 0

    @property
    def current_instruction(self) -> str:
        return self.instructions[self.index]

    @property
    def current_kind(self):
        return self.kinds[self.index]


def transition_subtask(plan: SubtaskPlan, fired: bool
                       ) -> tuple[SubtaskPlan, bool, bool]:
    """Advance on a fired gate; memory resets on non-final transitions."""
    if not fired:
        return plan, False, False
    if plan.index >= len(plan.instructions) - 1:
        return plan, False, True
    return replace(plan, index=plan.index + 1), True, False


def clip_action(action, limits: ActionLimits, previous=None) -> np.ndarray:
    """Clamp positions into bounds and per-step displacement, renormalize."""
    a = np.array(action, dtype=float)
    for block in POSITION_BLOCKS:
        a[block] = np.clip(a[block], limits.pos_min, limits.pos_max)
        if previous is not None:
            prev = np.asarray(previous)[block]
            delta = a[block] - prev
            dist = float(np.linalg.norm(delta))
            if dist > limits.step_cap_m:
                a[block] = prev + delta * (limits.step_cap_m / dist)
    for block in ROTATION_BLOCKS:
        r = rot6d_decode(a[block])
        a[block] = np.concatenate([r.matrix[:, 0], r.matrix[:, 1]])
    a[GRIP_LEFT] = min(1.0, max(0.0, a[GRIP_LEFT]))
    a[GRIP_RIGHT] = min(1.0, max(0.0, a[GRIP_RIGHT]))
    return a


@dataclass
class EpisodeRecord:
    episode: Episode
    result: dict
    planning_log: list = field(default_factory=list)


def _reachable_target(head_b_world: Pose, pitch_limits) -> Pose:
    """Project a viewpoint target into the gimbal pitch envelope."""
    x_axis = head_b_world.rotation.matrix[:, 0]
    pitch = math.asin(min(1.0, max(-1.0, -float(x_axis[2]))))
    clamped = min(pitch_limits[1], max(pitch_limits[0], pitch))
    if clamped == pitch:
        return head_b_world
    psi = math.atan2(float(x_axis[1]), float(x_axis[0]))
    return Pose(Rotation(rot_z(psi) @ rot_y(clamped)),
                head_b_world.translation.copy())


def run_episode(driver, scenario: Scenario, cfg: LabConfig, *,
                noise_seed: int = 0, policy_seed: int = 0,
                plan: SubtaskPlan | None = None,
                lock_subtask: bool = False,
                max_sim_time_s: float | None = None,
                perturbations=(),
                track_centering: bool = False) -> EpisodeRecord:
    """Drive one scenario episode with a chunk-policy driver."""
    rt = cfg.runtime
    dt = rt.control_period_s
    world = scenario.world.copy()
    agent = scenario.agent.copy()
    calib = MountCalibration(z_fixed=cfg.geometry.z_fixed)
    base = head_pose(agent, cfg)
    base_inv = base.inverse()
    noise_rng = np.random.default_rng(np.random.SeedSequence([scenario.seed, noise_seed]))
    policy_rng = np.random.default_rng(np.random.SeedSequence([policy_seed, 0x9E]))
    driver.begin_episode(scenario, base, policy_rng)

    if plan is None:
        plan = SubtaskPlan(tuple(scenario.instruction_texts),
                           tuple(k for _, k in scenario.instructions))
    gate = CognitiveGate(tau=rt.gate_tau, n=rt.gate_n)
    latches = {"left": GripperLatch(agent.grip_left_w, cfg.world.w_max),
               "right": GripperLatch(agent.grip_right_w, cfg.world.w_max)}
    limits = ActionLimits(rt.position_bounds[0], rt.position_bounds[1],
                          rt.step_velocity_cap_m)
    tracker = MarkerTracker(scenario.kind, cfg)
    tracker.update(world, agent, 0.0, [])

    cap_s = max_sim_time_s if max_sim_time_s is not None else rt.sim_time_cap_s
    step_cap = int(round(cap_s / dt))
    pending = sorted(perturbations, key=lambda e: e.time_s)
    frames = []           # (action_b (29,), percepts, subtask_id)
    action_rows = np.zeros((0, ACTION_DIM))
    planning_log = []
    transitions = []
    centered_series = []
    events_all = []
    memory_floor = 0
    chunk_rows = None
    row_idx = 0
    planning_calls = 0
    phase = ControllerPhase.HEADING_ALIGNMENT
    last_chassis_target = None
    prev_action = None
    terminal = False
    steps_run = 0

    buf_rows = []
    for k in range(step_cap):
        t = k * dt
        while pending and pending[0].time_s <= t + 1e-12:
            world = apply_perturbation(world, pending.pop(0))
        obs = observe(world, agent, cfg, noise_rng, timestamp=t)
        head_b = base_inv.compose(head_pose(agent, cfg))
        left_b = base_inv.compose(Pose(Rotation.identity(), agent.eff_left.copy()))
        right_b = base_inv.compose(Pose(Rotation.identity(), agent.eff_right.copy()))
        row = action_from_poses(head_b, left_b, right_b,
                                agent.grip_left_w / cfg.world.w_max,
                                agent.grip_right_w / cfg.world.w_max)
        buf_rows.append(row)
        frames.append((obs.percepts, plan.index, t))
        if track_centering:
            target_id = world.meta.get("target")
            ent = world.entities.get(target_id)
            vis = ent is not None and ent.present and not world.hidden(target_id)
            centered_series.append(bool(
                vis and off_axis_angle(world, agent, target_id, cfg)
                <= cfg.world.eps_center))
        steps_run = k + 1

        if k % rt.n_exec == 0:
            n_hist = getattr(driver, "n_hist", cfg.data.n_hist)
            window_indices = _window_indices(k, memory_floor, cfg, dt, n_hist)
            plan_input = {
                "observation": obs,
                "window_percepts": [frames[i][0] for i in window_indices],
                "window_proprio": np.stack([buf_rows[i] for i in window_indices]),
                "instruction": plan.current_instruction,
                "subtask_index": plan.index,
                "dt": dt,
                "sim_time": t,
            }
            chunk_rows, score = driver.plan(plan_input)
            planning_calls += 1
            gate, fired = gate_update(gate, score)
            planning_log.append({
                "step": k, "score": float(score), "fired": bool(fired),
                "memory_floor": memory_floor,
                "window_indices": list(window_indices),
                "subtask": plan.index,
            })
            if fired and not lock_subtask:
                plan, reset, terminal = transition_subtask(plan, True)
                if reset:
                    memory_floor = k
                    transitions.append((k, plan.index))
                if terminal:
                    break
            row_idx = 0

        action = clip_action(chunk_rows[min(row_idx, len(chunk_rows) - 1)],
                             limits, previous=prev_action)
        row_idx += 1
        prev_action = action

        view_pose_b = Pose(rot6d_decode(action[VIEW_ROT]), action[VIEW_POS].copy())
        head_target_world = _reachable_target(base.compose(view_pose_b),
                                              cfg.geometry.head_pitch_limits)
        try:
            chassis_t, head_t = decompose_head(
                head_target_world, agent.chassis, agent.head, calib,
                eps_xy=cfg.geometry.eps_xy, yaw_trigger=cfg.geometry.yaw_trigger,
                pitch_limits=cfg.geometry.head_pitch_limits,
                yaw_limits=cfg.geometry.head_yaw_limits)
        except UnreachableTarget:
            chassis_t, head_t = agent.chassis, agent.head
        key = (round(chassis_t.x, 3), round(chassis_t.y, 3), round(chassis_t.yaw, 2))
        if key != last_chassis_target:
            phase = ControllerPhase.HEADING_ALIGNMENT
            last_chassis_target = key
        moved = (abs(chassis_t.x - agent.chassis.x) > 1e-9
                 or abs(chassis_t.y - agent.chassis.y) > 1e-9
                 or abs(chassis_t.yaw - agent.chassis.yaw) > 1e-9)
        if moved:
            v, om, phase = chassis_step(agent.chassis, chassis_t, phase,
                                        rt.controller)
        else:
            v, om = 0.0, 0.0

        eff_l = base.transform_point(action[LEFT_POS])
        eff_r = base.transform_point(action[RIGHT_POS])
        w_l, latches["left"] = discretize_gripper(action[GRIP_LEFT], latches["left"])
        w_r, latches["right"] = discretize_gripper(action[GRIP_RIGHT], latches["right"])
        cmd = ContinuousCommand(
            base_v=v, base_w=om,
            head_pitch=head_t.pitch, head_yaw=head_t.yaw,
            eff_left=eff_l, eff_right=eff_r,
            grip_left_w=w_l, grip_right_w=w_r)
        world, agent, events = apply_command(world, agent, cmd, dt, cfg)
        if events:
            events_all.extend((round(t, 6), e) for e in events)
        tracker.update(world, agent, (k + 1) * dt, events)

    sim_time = steps_run * dt
    episode = _build_episode(scenario, buf_rows, frames, transitions, dt, cfg)
    result = {
        "task": scenario.kind,
        "seed": scenario.seed,
        "markers": tracker.markers,
        "sim_time": sim_time,
        "planning_calls": planning_calls,
        "transitions": transitions,
        "terminal": terminal,
        "step_cap_hit": (not terminal) and steps_run >= step_cap,
        "uncovers": sum(1 for _, e in events_all if e.startswith("uncover:")),
        "events": events_all,
    }
    if track_centering:
        result["centered_series"] = [int(v) for v in centered_series]
    return EpisodeRecord(episode=episode, result=result,
                         planning_log=planning_log)


def _window_indices(k: int, floor: int, cfg: LabConfig, dt: float,
                    n_hist: int | None = None):
    if n_hist is None:
        n_hist = cfg.data.n_hist
    r = max(1, int(round(cfg.data.interval_s / dt)))
    return [max(floor, k - j * r) for j in range(n_hist + 1)]


def _build_episode(scenario, buf_rows, frames, transitions, dt, cfg) -> Episode:
    from ..dataspace import poses_from_action
    samples = []
    for i, (percepts, subtask_id, t) in enumerate(frames):
        head, left, right, gl, gr = poses_from_action(buf_rows[i])
        samples.append(TrajectorySample(
            frame=i, timestamp=t, head=head, left=left, right=right,
            grip_left=gl, grip_right=gr, obs_ref=f"obs-{i:06d}",
            percepts=list(percepts), source="robot-analog",
            subtask_id=subtask_id, cognition=0))
    episode = Episode(
        episode_id=f"{scenario.kind}-run-{scenario.seed}",
        frame_rate_hz=1.0 / dt,
        task_kind=scenario.kind,
        embodiment="robot-analog",
        samples=samples,
        instructions=list(scenario.instruction_texts))
    boundaries = [k + 1 for k, _ in transitions if k + 1 < len(samples)]
    if samples:
        episode = annotate_cognition(episode, boundaries,
                                     cfg.data.completion_window_s)
    return episode
