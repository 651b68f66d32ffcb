"""Demonstration episodes: samples, cognitive labels, windows, chunks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import BadJointCount, EmptyEpisode, UnsortedBoundaries
from ..geometry import Pose
from .actions import action_from_poses, ActionChunk

SOURCE_TAGS = ("human-analog", "robot-analog")


@dataclass
class Percept:
    """One sensed entity, expressed in the head frame of the viewing step."""

    entity_id: str
    kind: str
    position: np.ndarray      # (3,) head-relative, meters, noise applied
    yaw: float                # entity yaw relative to head yaw
    quality: float            # visibility quality in (0, 1]
    open_flag: bool | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.entity_id,
            "kind": self.kind,
            "pos": [float(v) for v in self.position],
            "yaw": float(self.yaw),
            "quality": float(self.quality),
            "open": self.open_flag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Percept":
        return cls(
            entity_id=d["id"], kind=d["kind"],
            position=np.asarray(d["pos"], dtype=float),
            yaw=float(d["yaw"]), quality=float(d["quality"]),
            open_flag=d.get("open"),
        )


@dataclass
class TrajectorySample:
    """One timestep of the unified egocentric record (episode-base frame)."""

    frame: int
    timestamp: float
    head: Pose
    left: Pose
    right: Pose
    grip_left: float
    grip_right: float
    obs_ref: str
    percepts: list = field(default_factory=list)
    source: str = "robot-analog"
    subtask_id: int = 0
    cognition: int = 0

    def action_vector(self) -> np.ndarray:
        return action_from_poses(self.head, self.left, self.right,
                                 self.grip_left, self.grip_right)


@dataclass
class Episode:
    episode_id: str
    frame_rate_hz: float
    task_kind: str
    embodiment: str
    samples: list
    instructions: list

    def __len__(self) -> int:
        return len(self.samples)

    def action_matrix(self) -> np.ndarray:
        return np.stack([s.action_vector() for s in self.samples])

    def resolve_observation(self, obs_ref: str):
        for s in self.samples:
            if s.obs_ref == obs_ref:
                return s.percepts
        raise KeyError(obs_ref)

    def validate(self):
        if not self.samples:
            raise EmptyEpisode(self.episode_id)
        last_t = -np.inf
        last_sub = 0
        for s in self.samples:
            if s.timestamp <= last_t:
                raise ValueError(f"timestamps not strictly increasing at frame {s.frame}")
            if s.subtask_id < last_sub or s.subtask_id > last_sub + 1:
                raise ValueError("sub-task ids must be contiguous and ordered")
            last_t = s.timestamp
            last_sub = s.subtask_id
        return self


@dataclass
class MemoryWindow:
    """Current plus N_hist historical entries, newest first."""

    obs_refs: list
    proprio: np.ndarray        # (n_hist + 1, 29), newest first
    frame_indices: list
    interval_s: float

    def __post_init__(self):
        if len(self.obs_refs) != self.proprio.shape[0] or \
                len(self.obs_refs) != len(self.frame_indices):
            raise ValueError("window tracks must have equal length")


def hand_aperture(joints, tip_map=None, bounds=(0.0, 0.18)) -> float:
    """Scalar hand opening from 21 hand joints.

    Mean Euclidean distance from the thumb tip to the other four fingertips,
    linearly mapped through `bounds` and clamped to [0, 1].
    """
    joints = np.asarray(joints, dtype=float)
    if joints.shape != (21, 3):
        raise BadJointCount(f"expected (21, 3) joints, got {joints.shape}")
    if not np.all(np.isfinite(joints)):
        raise BadJointCount("joints must be finite")
    thumb = tip_map["thumb"] if tip_map else 4
    tips = tip_map["tips"] if tip_map else (8, 12, 16, 20)
    lo, hi = bounds
    if not hi > lo:
        raise ValueError("bounds must satisfy min < max")
    mean_d = float(np.mean(np.linalg.norm(joints[list(tips)] - joints[thumb], axis=1)))
    return min(1.0, max(0.0, (mean_d - lo) / (hi - lo)))


def normalize_gripper(width_m: float, max_width_m: float) -> float:
    if max_width_m <= 0:
        raise ValueError("max width must be positive")
    return min(1.0, max(0.0, width_m / max_width_m))


def completion_window(frame_rate_hz: float, window_s: float = 3.0) -> int:
    """Label-suffix length in frames: 90 at 30 Hz, 30 at 10 Hz (both 3 s)."""
    return int(round(window_s * frame_rate_hz))


def annotate_cognition(episode: Episode, boundaries, window_s: float = 3.0) -> Episode:
    """Assign sub-task ids and binary cognition labels from sub-task ends.

    `boundaries` holds the exclusive end frame of each sub-task except the
    last, which always ends at the episode end.  The final `window_s`
    seconds of each sub-task are labeled 1; sub-tasks shorter than the
    window are labeled 1 throughout.
    """
    n = len(episode.samples)
    if n == 0:
        raise EmptyEpisode(episode.episode_id)
    bounds = list(boundaries)
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
        raise UnsortedBoundaries(str(bounds))
    if any(b < 1 or b > n for b in bounds):
        raise UnsortedBoundaries(f"boundary outside episode of {n} frames")
    if not bounds or bounds[-1] < n:
        bounds.append(n)
    w = completion_window(episode.frame_rate_hz, window_s)
    new_samples = []
    start = 0
    for sub_id, end in enumerate(bounds):
        label_from = max(start, end - w)
        for k in range(start, end):
            new_samples.append(replace(
                episode.samples[k], subtask_id=sub_id,
                cognition=1 if k >= label_from else 0))
        start = end
    return replace(episode, samples=new_samples)


def sample_memory_window(episode: Episode, t: int, n_hist: int = 5,
                         interval_s: float = 1.0, floor: int = 0) -> MemoryWindow:
    """Window of frame indices {t, t-r, ..., t-n_hist*r}, clamped at `floor`.

    `floor` moves the clamp boundary forward after a memory clearance; by
    default history saturates at the episode start.
    """
    n = len(episode.samples)
    if not 0 <= t < n:
        raise IndexError(f"t={t} outside episode of {n} frames")
    r = max(1, int(round(interval_s * episode.frame_rate_hz)))
    indices = [max(floor, t - k * r) for k in range(n_hist + 1)]
    refs = [episode.samples[i].obs_ref for i in indices]
    proprio = np.stack([episode.samples[i].action_vector() for i in indices])
    return MemoryWindow(refs, proprio, indices, interval_s)


def extract_chunk(episode: Episode, t: int, k: int = 30) -> ActionChunk:
    """Rows from frames t+1 .. t+K with hold-last padding at the end."""
    n = len(episode.samples)
    if not 0 <= t < n:
        raise IndexError(f"t={t} outside episode of {n} frames")
    rows = [episode.samples[min(t + j, n - 1)].action_vector()
            for j in range(1, k + 1)]
    return ActionChunk(np.stack(rows), episode.frame_rate_hz)
