"""Configuration tree with the documented defaults.

A single JSON file can override any subset of keys; nesting mirrors the
dataclass structure below.  The path is taken from ``ASA_CONFIG`` when set,
or passed explicitly.  Every default named in the README is defined here.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, fields


@dataclass
class GeometryConfig:
    z_fixed: float = 1.4              # constant head height, m
    eps_xy: float = 0.05              # planar-translation trigger for chassis takeover, m
    yaw_trigger: float = 0.7          # composite-yaw deviation trigger, rad
    head_pitch_limits: tuple = (-1.1, 1.1)   # gimbal pitch range, rad
    head_yaw_limits: tuple = (-1.6, 1.6)     # gimbal yaw range, rad


@dataclass
class WorldConfig:
    fov_half_angle: float = 0.6       # rad about the optical axis
    sigma0: float = 0.01              # percept position noise at/below d_ref, m
    d_ref: float = 1.0                # reference range for noise/quality, m
    q_min: float = 0.8                # visibility quality required for insertion
    eps_center: float = 0.15          # centering cone half-angle, rad
    reach_radius: float = 0.85        # macro grasp reach, m
    grasp_radius: float = 0.06        # closed gripper attaches within this, m
    uncover_radius: float = 0.08      # effector proximity that flips a cover open, m
    insert_radius: float = 0.07       # ring release distance for insertion, m
    goal_radius: float = 0.10         # placement tolerance, m
    w_max: float = 0.1                # gripper max open width, m
    effector_speed: float = 0.6       # mechanical effector slew, m/s
    head_rate: float = 2.0            # gimbal slew, rad/s
    bring_near_distance: float = 0.55 # bring_closer parks the entity here, m


@dataclass
class DataConfig:
    human_rate_hz: float = 10.0
    robot_rate_hz: float = 30.0
    completion_window_s: float = 3.0  # cognitive-label suffix per sub-task
    aperture_min_m: float = 0.0
    aperture_max_m: float = 0.18
    thumb_tip: int = 4
    finger_tips: tuple = (8, 12, 16, 20)
    n_hist: int = 5
    interval_s: float = 1.0


@dataclass
class PolicyConfig:
    d_ctx: int = 64
    hidden: int = 64
    d_embed: int = 16
    n_hist: int = 5
    chunk_size: int = 30
    visual_dim: int = 36              # per-frame percept featurization width
    proprio_dim: int = 29


@dataclass
class StageConfig:
    stage: int = 1
    lr: float = 2e-5
    lr_schedule: str = "cosine"
    epochs: int = 10
    chunk_size: int = 30
    alpha_t: float = 0.25
    gamma: float = 2.0
    lambda_t: float = 1.0
    lambda_vr: float = 1.5
    lambda_vp: float = 1.0
    lambda_er: float = 1.0
    lambda_ep: float = 1.0
    lambda_g: float = 1.0
    batch_size: int = 32
    seed: int = 0
    tau_max: float = 0.85   # flow-time sampling cap; Euler queries tau <= 0.8
    optimizer: str = "sgd"  # "sgd" | "adam"


def stage_defaults(stage: int) -> StageConfig:
    """Per-stage hyperparameter rows (learning rate, epochs, loss weights)."""
    if stage == 1:
        return StageConfig(stage=1, lr=2e-5, epochs=10, lambda_t=1.0)
    if stage == 2:
        return StageConfig(stage=2, lr=1e-4, epochs=20, lambda_t=0.5)
    if stage == 3:
        return StageConfig(stage=3, lr=2e-5, epochs=50, lambda_t=0.8)
    raise ValueError(f"unknown stage {stage}")


@dataclass
class ControllerConfig:
    k_v: float = 0.2
    k_w: float = 0.5
    v_min: float = 0.08
    v_max: float = 0.15
    w_min: float = 0.15
    w_max: float = 0.3
    eps_p: float = 0.015              # translational dead zone, m
    eps_psi: float = 0.5              # heading-alignment exit threshold, rad
    eps_theta: float = 0.05           # rotational dead zone, rad


@dataclass
class RuntimeConfig:
    chunk_size: int = 30
    n_exec: int = 10
    denoise_steps: int = 5
    control_period_s: float = 1.0 / 30.0
    gate_tau: float = 0.7
    gate_n: int = 3
    sim_time_cap_s: float = 1000.0
    step_velocity_cap_m: float = 0.05   # per-step positional displacement cap
    position_bounds: tuple = (-3.0, 3.0)
    controller: ControllerConfig = field(default_factory=ControllerConfig)


@dataclass
class EvalConfig:
    st_cap_s: float = 1000.0
    center_hold_steps: int = 10
    scan_window: int = 50
    scan_var_threshold: float = 0.01    # rad^2 of composite yaw over the window
    rescan_limit_steps: int = 150
    recenter_limit_steps: int = 300


@dataclass
class GatewayConfig:
    tick_hz: float = 30.0
    port: int = 8765
    idle_timeout_s: float = 30.0


@dataclass
class LabConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    world: WorldConfig = field(default_factory=WorldConfig)
    data: DataConfig = field(default_factory=DataConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)


def _merge(obj, overrides: dict):
    for key, value in overrides.items():
        if not hasattr(obj, key):
            raise KeyError(f"unknown config key: {key!r}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            _merge(current, value)
        elif isinstance(current, tuple) and isinstance(value, list):
            setattr(obj, key, tuple(value))
        else:
            setattr(obj, key, value)
    return obj


def load_config(path: str | None = None) -> LabConfig:
    """Build a LabConfig: defaults, then the JSON file at `path` or $ASA_CONFIG."""
    cfg = LabConfig()
    path = path or os.environ.get("ASA_CONFIG")
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            _merge(cfg, json.load(fh))
    return cfg


def config_to_dict(cfg) -> dict:
    out = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = config_to_dict(value)
        elif isinstance(value, tuple):
            out[f.name] = list(value)
        else:
            out[f.name] = value
    return out
