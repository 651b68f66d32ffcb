"""Demonstration recording shared by scripted collection and teleoperation.

The recorder steps one world instance at a fixed frame rate, buffers raw
world-frame poses plus percepts, stamps sub-task boundaries, and finalizes
into the episode-base-normalized, cognition-annotated record.  Human-analog
recordings run at 10 Hz and may carry a random rigid world anchor, which
the base-frame normalization must (and does) cancel exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import LabConfig
from .dataspace import Episode, TrajectorySample, annotate_cognition, normalize_gripper
from .errors import EmptyRecording
from .evalmetrics import MarkerTracker
from .geometry import MountCalibration, Pose, Rotation, episode_base_transform, random_pose
from .policy.scripted import ScriptedController
from .world.scenarios import Scenario
from .world.sim import apply_perturbation, head_pose, observe, off_axis_angle


@dataclass
class _RawFrame:
    time: float
    head: Pose
    left: Pose
    right: Pose
    grip_left: float
    grip_right: float
    percepts: list
    events: list = field(default_factory=list)


class DemoRecorder:
    def __init__(self, scenario: Scenario, cfg: LabConfig, rate_hz: float,
                 source: str, noise_seed: int = 0, anchor: Pose | None = None,
                 perturbations=()):
        self.scenario = scenario
        self.cfg = cfg
        self.rate_hz = rate_hz
        self.dt = 1.0 / rate_hz
        self.source = source
        self.world = scenario.world.copy()
        self.agent = scenario.agent.copy()
        self.anchor = anchor or Pose.identity()
        self.rng = np.random.default_rng(
            np.random.SeedSequence([scenario.seed, noise_seed, 0x0B5]))
        self.frames: list[_RawFrame] = []
        self.boundaries: list[int] = []
        self.tracker = MarkerTracker(scenario.kind, cfg)
        self.tracker.update(self.world, self.agent, 0.0, [])
        self.pending = sorted(perturbations, key=lambda e: e.time_s)
        self.events_log: list = []
        self.centered_series: list = []
        self._obs = None

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def time(self) -> float:
        return len(self.frames) * self.dt

    def observation(self):
        """The current frame's observation (cached until the next apply)."""
        if self._obs is None:
            t = self.time
            while self.pending and self.pending[0].time_s <= t + 1e-12:
                self.world = apply_perturbation(self.world, self.pending.pop(0))
            self._obs = observe(self.world, self.agent, self.cfg, self.rng,
                                timestamp=t)
        return self._obs

    def record_and_apply(self, cmd) -> list:
        """Record the current state, then advance it one frame under `cmd`."""
        from .world.sim import apply_command
        obs = self.observation()
        t = self.time
        head = self.anchor.compose(head_pose(self.agent, self.cfg))
        left = self.anchor.compose(Pose(Rotation.identity(), self.agent.eff_left.copy()))
        right = self.anchor.compose(Pose(Rotation.identity(), self.agent.eff_right.copy()))
        self.frames.append(_RawFrame(
            time=t, head=head, left=left, right=right,
            grip_left=normalize_gripper(self.agent.grip_left_w, self.cfg.world.w_max),
            grip_right=normalize_gripper(self.agent.grip_right_w, self.cfg.world.w_max),
            percepts=list(obs.percepts)))
        target_id = self.world.meta.get("target")
        ent = self.world.entities.get(target_id)
        vis = ent is not None and ent.present and not self.world.hidden(target_id)
        self.centered_series.append(bool(
            vis and off_axis_angle(self.world, self.agent, target_id, self.cfg)
            <= self.cfg.world.eps_center))
        self.world, self.agent, events = apply_command(
            self.world, self.agent, cmd, self.dt, self.cfg)
        if events:
            self.events_log.extend((round(t, 6), e) for e in events)
        self.tracker.update(self.world, self.agent, self.time, events)
        self._obs = None
        return events

    def mark_boundary(self):
        if self.frame_count == 0:
            raise EmptyRecording("cannot mark a boundary before any frame")
        if not self.boundaries or self.boundaries[-1] != self.frame_count:
            self.boundaries.append(self.frame_count)

    def finalize(self, episode_id: str) -> tuple[Episode, dict]:
        """Normalize to the episode base frame, annotate, and summarize."""
        if not self.frames:
            raise EmptyRecording("no recorded frames")
        raw = [{"H": f.head, "L": f.left, "R": f.right} for f in self.frames]
        calib = MountCalibration(z_fixed=self.cfg.geometry.z_fixed)
        normalized = episode_base_transform(raw, calib)
        samples = []
        for i, (f, n) in enumerate(zip(self.frames, normalized)):
            samples.append(TrajectorySample(
                frame=i, timestamp=f.time, head=n["H"], left=n["L"],
                right=n["R"], grip_left=f.grip_left, grip_right=f.grip_right,
                obs_ref=f"obs-{i:06d}", percepts=f.percepts,
                source=self.source, subtask_id=0, cognition=0))
        episode = Episode(
            episode_id=episode_id,
            frame_rate_hz=self.rate_hz,
            task_kind=self.scenario.kind,
            embodiment=self.source,
            samples=samples,
            instructions=list(self.scenario.instruction_texts))
        boundaries = [b for b in self.boundaries if b < len(samples)]
        episode = annotate_cognition(episode, boundaries,
                                     self.cfg.data.completion_window_s)
        result = {
            "task": self.scenario.kind,
            "seed": self.scenario.seed,
            "markers": self.tracker.markers,
            "sim_time": self.time,
            "uncovers": sum(1 for _, e in self.events_log
                            if e.startswith("uncover:")),
            "events": self.events_log,
            "centered_series": [int(v) for v in self.centered_series],
        }
        return episode, result


def collect_demo(scenario: Scenario, cfg: LabConfig, rate_hz: float,
                 source: str, *, controller_seed: int | None = None,
                 noise_seed: int = 0, anchored: bool = False,
                 search_only: bool = False, perturbations=(),
                 max_time_s: float = 120.0) -> tuple[Episode, dict]:
    """Run the scripted protocol through the recorder for one episode."""
    anchor = None
    if anchored:
        anchor_rng = np.random.default_rng(
            np.random.SeedSequence([scenario.seed, 0xA4C]))
        anchor = random_pose(anchor_rng, radius=1.5)
    recorder = DemoRecorder(scenario, cfg, rate_hz, source,
                            noise_seed=noise_seed, anchor=anchor,
                            perturbations=perturbations)
    controller = ScriptedController(
        scenario.kind, cfg,
        controller_seed if controller_seed is not None else scenario.seed,
        search_only=search_only)
    max_frames = int(round(max_time_s * rate_hz))
    done = False
    while recorder.frame_count < max_frames and not done:
        obs = recorder.observation()
        step = controller.step(obs, recorder.dt)
        recorder.record_and_apply(step.cmd)
        if step.mark:
            recorder.mark_boundary()
        done = step.done
    episode, result = recorder.finalize(
        f"{scenario.kind}-{source}-{scenario.seed}")
    result["completed"] = done
    return episode, result
