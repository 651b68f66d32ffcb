"""End-to-end experiment plumbing: demo corpora, training arms, evaluation.

These helpers reproduce the full pipeline at desk scale: scripted blind
collection of human-analog (10 Hz) and robot-analog (30 Hz) corpora, the
three-stage training schedule for the standard dual-track policy and its
ablation arms (no-memory, monolithic instruction), held-out deployment
evaluation with the exploitative-branching measurement, and the
adversarial perturbation run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import LabConfig, StageConfig, stage_defaults
from .evalmetrics import analyze_robustness, evaluate_trial
from .geometry import Pose
from .policy.features import InstructionVocab
from .policy.model import CognitiveFlowPolicy, LearnedPolicyDriver
from .policy.network import ModelDims, PolicyNetwork
from .policy.scripted import ScriptedChunkPolicy
from .policy.training import build_training_data, train_stage
from .recorder import collect_demo
from .world.entities import PerturbationEvent
from .world.scenarios import make_scenario, monolithic_instruction
from .world.sim import head_pose, out_of_view_position


def demo_episodes(kinds, count_per_kind: int, cfg: LabConfig, rate_hz: float,
                  source: str, seed0: int, anchored: bool = False,
                  max_time_s: float = 120.0):
    """Yield scripted blind-collection episodes, interleaved across kinds."""
    for i in range(count_per_kind):
        for j, kind in enumerate(kinds):
            seed = seed0 + i * len(kinds) + j * 100_000
            scenario = make_scenario(kind, seed)
            episode, result = collect_demo(
                scenario, cfg, rate_hz=rate_hz, source=source,
                noise_seed=seed, anchored=anchored, max_time_s=max_time_s)
            yield episode, result


# Learning rates and epochs for the toy-scale networks; the supplement-table
# stage rows remain the config defaults, these are the desk-scale overrides
# used by the experiment harness (Adam, see decisions log).
TOY_STAGE_OVERRIDES = {
    1: {"lr": 1e-3, "epochs": 12, "optimizer": "adam"},
    2: {"lr": 1e-3, "epochs": 24, "optimizer": "adam"},
    3: {"lr": 3e-4, "epochs": 32, "optimizer": "adam"},
}


def toy_stage_config(stage: int, seed: int = 0, **extra) -> StageConfig:
    cfg = stage_defaults(stage)
    for key, value in TOY_STAGE_OVERRIDES[stage].items():
        setattr(cfg, key, value)
    cfg.seed = seed
    for key, value in extra.items():
        setattr(cfg, key, value)
    return cfg


@dataclass
class ArmSpec:
    """One training arm: the full model or an ablation."""

    name: str = "dual-track"
    n_hist: int = 5
    monolithic: bool = False


def train_arm(arm: ArmSpec, human_episodes, robot_episodes, cfg: LabConfig,
              seed: int = 7, motion_boost: int = 4,
              human_stride: int = 3, robot_stride: int = 8,
              log_path=None) -> CognitiveFlowPolicy:
    """Run the three-stage schedule for one arm on the given corpora."""
    vocab = InstructionVocab()
    dims = ModelDims(n_hist=arm.n_hist, d_ctx=cfg.policy.d_ctx,
                     hidden=cfg.policy.hidden, d_embed=cfg.policy.d_embed,
                     chunk=cfg.policy.chunk_size, vocab=len(vocab))
    network = PolicyNetwork(dims)
    mono_fn = ((lambda ep: monolithic_instruction(ep.task_kind))
               if arm.monolithic else None)
    clamp = not arm.monolithic
    data_h = build_training_data(
        human_episodes, dims, vocab, stride=human_stride,
        clamp_at_subtask=clamp, monolithic_text_fn=mono_fn,
        motion_boost=motion_boost)
    data_r = build_training_data(
        robot_episodes, dims, vocab, stride=robot_stride,
        clamp_at_subtask=clamp, monolithic_text_fn=mono_fn,
        motion_boost=motion_boost)
    params = network.init_params(np.random.default_rng(seed))
    params = train_stage(1, data_h, toy_stage_config(1, seed=seed + 1),
                         network, params, log_path=log_path)
    params = train_stage(2, data_h, toy_stage_config(2, seed=seed + 2),
                         network, params, log_path=log_path)
    params = train_stage(3, data_r, toy_stage_config(3, seed=seed + 3),
                         network, params, log_path=log_path)
    return CognitiveFlowPolicy(dims=dims, vocab=vocab,
                               params=params)


def approach_side_matches(record, scenario, cfg: LabConfig):
    """Exploitative-branching check for the cylinder task.

    After the exposure marker, the approach side is the lateral sign of
    whichever effector comes closest to the revealed target; it must match
    the side the target was actually revealed on.  Returns None when the
    target was never exposed.
    """
    exposed_t = None
    for name, t in record.result["markers"]:
        if name == "exposed":
            exposed_t = t
            break
    if exposed_t is None:
        return None
    base = head_pose(scenario.agent, cfg)
    target_world = scenario.world.entity(
        scenario.world.meta["target"]).position
    target_b = base.inverse().transform_point(target_world)
    acts = record.episode.action_matrix()
    dt = 1.0 / record.episode.frame_rate_hz
    start = min(len(acts) - 1, int(round(exposed_t / dt)))
    best = None
    for sl in (slice(9, 12), slice(18, 21)):
        seg = acts[start:, sl]
        if not len(seg):
            continue
        d = np.linalg.norm(seg - target_b, axis=1)
        i = int(np.argmin(d))
        if best is None or d[i] < best[0]:
            best = (float(d[i]), float(seg[i][1]))
    if best is None or best[0] > 0.3:
        return False
    return bool(np.sign(best[1]) == np.sign(target_b[1]))


@dataclass
class EvalSummary:
    trials: list
    success_rate: float
    branching_rate: float | None
    mean_uncovers: float


def evaluate_arm(policy: CognitiveFlowPolicy, arm: ArmSpec, kind: str,
                 seeds, cfg: LabConfig, max_time_s: float = 60.0,
                 lock_subtask: bool | None = None) -> EvalSummary:
    from .runtime.executor import run_episode

    trials, matches, uncovers = [], [], []
    for seed in seeds:
        scenario = make_scenario(kind, seed)
        driver = LearnedPolicyDriver(
            policy, cfg,
            monolithic_text=(monolithic_instruction(kind)
                             if arm.monolithic else None))
        record = run_episode(
            driver, scenario, cfg, noise_seed=seed, policy_seed=seed,
            max_sim_time_s=max_time_s,
            lock_subtask=(arm.monolithic if lock_subtask is None
                          else lock_subtask))
        trials.append(evaluate_trial(record.result, kind))
        uncovers.append(record.result["uncovers"])
        match = approach_side_matches(record, scenario, cfg)
        if match is not None:
            matches.append(match)
    sr = sum(t.success for t in trials) / len(trials)
    branching = (sum(matches) / len(matches)) if matches else None
    return EvalSummary(trials=trials, success_rate=sr,
                       branching_rate=branching,
                       mean_uncovers=float(np.mean(uncovers)))


def default_perturbation_schedule(scenario, cfg: LabConfig, duration_s: float,
                                  seed: int = 0):
    """Alternating relocations plus one final disappearance over the run."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD15]))
    events = []
    times = np.linspace(duration_s * 0.12, duration_s * 0.88, 4)
    agent = scenario.agent
    for k, t in enumerate(times[:-1]):
        pos = out_of_view_position(scenario.world, agent, cfg, rng)
        events.append(PerturbationEvent(float(t), "relocation",
                                        scenario.world.meta["target"],
                                        tuple(pos)))
    events.append(PerturbationEvent(float(times[-1]), "disappearance",
                                    scenario.world.meta["target"]))
    return events


def robustness_run(driver, kind: str, seed: int, cfg: LabConfig,
                   duration_s: float = 600.0, schedule=None):
    """Deployment run with grasping transitions disabled plus analysis.

    The driver stays locked on the search sub-task for the whole run while
    the target is relocated out of sight and finally removed; the report
    carries re-scan and re-fixation latencies in control steps.
    """
    from .runtime.executor import run_episode

    scenario = make_scenario(kind, seed)
    if schedule is None:
        schedule = default_perturbation_schedule(scenario, cfg, duration_s,
                                                 seed=seed)
    record = run_episode(driver, scenario, cfg, noise_seed=seed,
                         policy_seed=seed, max_sim_time_s=duration_s,
                         lock_subtask=True, perturbations=schedule,
                         track_centering=True)
    report = analyze_robustness(
        record.episode, schedule, record.result["centered_series"], cfg,
        cfg.runtime.control_period_s)
    return record, report, schedule
