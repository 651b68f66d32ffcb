"""Success-rate and search-time metrics, markers, and robustness analysis.

Search time runs from a task-specific start marker (episode start, or the
first pick for the can task) to the task's perceptual-resolution marker;
failed searches are capped at 1000 s and failures always enter the mean.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import LabConfig
from .errors import EmptyTrials, MissingMarkers
from .world.scenarios import SubtaskKind
from .world.sim import ground_truth_cognition, off_axis_angle

# (start marker or None for episode start, stop marker) per task kind
ST_RULES = {
    "croissant": (None, "centered"),
    "cans": ("pick", "centered"),
    "bottle": (None, "aligned"),
    "cylinder": (None, "exposed"),
    "ringpeg": (None, "insert-ready"),
}

SUCCESS_MARKERS = {
    "croissant": "placed",
    "cans": "deposited",
    "bottle": "retrieved",
    "cylinder": "placed",
    "ringpeg": "inserted",
}


@dataclass
class TrialResult:
    task_kind: str
    seed: int
    success: bool
    search_time_s: float
    total_time_s: float
    markers: list

    def marker_time(self, name: str):
        for n, t in self.markers:
            if n == name:
                return t
        return None


@dataclass
class TaskMetrics:
    success_rate: float
    mean_search_time_s: float
    trials: int


class MarkerTracker:
    """Derives timestamped task markers from world state while stepping."""

    def __init__(self, kind: str, cfg: LabConfig):
        self.kind = kind
        self.cfg = cfg
        self.markers: list = []
        self._center_streak = 0
        self._seen = set()

    def _emit(self, name: str, t: float):
        if name not in self._seen:
            self._seen.add(name)
            self.markers.append((name, t))

    def update(self, world, agent, t: float, events):
        cfg = self.cfg
        meta = world.meta
        target = meta.get("target")
        for ev in events:
            if ev.startswith("grasp:"):
                eid = ev.split(":")[2]
                ent = world.entities.get(eid)
                if ent is not None and ent.kind == "target":
                    self._emit("pick", t)

        if self.kind in ("croissant", "cans"):
            ccid = target if self.kind == "croissant" else meta.get("goal")
            ent = world.entities.get(ccid)
            visible = (ent is not None and ent.present and not world.hidden(ccid))
            if visible and off_axis_angle(world, agent, ccid, cfg) <= cfg.world.eps_center:
                self._center_streak += 1
                if self._center_streak >= cfg.eval.center_hold_steps:
                    self._emit("centered", t)
            else:
                self._center_streak = 0

        if self.kind in ("cylinder", "bottle"):
            if ground_truth_cognition(world, agent, SubtaskKind.EXPOSE, cfg):
                self._emit("exposed", t)
        if self.kind == "bottle":
            ent = world.entities.get(target)
            if ent is not None and ent.present and not world.hidden(target):
                d = min(float(np.linalg.norm(agent.eff_left - ent.position)),
                        float(np.linalg.norm(agent.eff_right - ent.position)))
                if d <= 0.12:
                    self._emit("aligned", t)
        if self.kind == "ringpeg":
            if ground_truth_cognition(world, agent, SubtaskKind.ENRICH, cfg):
                self._emit("insert-ready", t)

        if self.kind in ("croissant", "cylinder"):
            if ground_truth_cognition(world, agent, SubtaskKind.PLACE, cfg):
                self._emit("placed", t)
        elif self.kind == "bottle":
            if ground_truth_cognition(world, agent, SubtaskKind.RETRIEVE, cfg):
                self._emit("retrieved", t)
        elif self.kind == "cans":
            if ground_truth_cognition(world, agent, SubtaskKind.DEPOSIT, cfg):
                self._emit("deposited", t)
        elif self.kind == "ringpeg":
            if ground_truth_cognition(world, agent, SubtaskKind.INSERT, cfg):
                self._emit("inserted", t)


def evaluate_trial(result: dict, kind: str, cap_s: float = 1000.0) -> TrialResult:
    """Score one recorded run from its result record (markers + timings)."""
    if kind not in ST_RULES:
        raise ValueError(f"unknown task kind {kind!r}")
    markers = [(str(n), float(t)) for n, t in result.get("markers", [])]
    times = {}
    for name, t in markers:
        if name not in times:
            times[name] = t
    start_marker, stop_marker = ST_RULES[kind]
    if start_marker is None:
        start_t = 0.0
    elif start_marker in times:
        start_t = times[start_marker]
    else:
        raise MissingMarkers(f"{kind}: no {start_marker!r} marker")
    if stop_marker in times:
        search_time = times[stop_marker] - start_t
    else:
        search_time = cap_s
    success = SUCCESS_MARKERS[kind] in times
    return TrialResult(
        task_kind=kind,
        seed=int(result.get("seed", -1)),
        success=bool(success),
        search_time_s=float(search_time),
        total_time_s=float(result.get("sim_time", search_time)),
        markers=markers,
    )


def aggregate(trials) -> TaskMetrics:
    trials = list(trials)
    if not trials:
        raise EmptyTrials("no trials to aggregate")
    sr = sum(1 for t in trials if t.success) / len(trials)
    mean_st = float(np.mean([t.search_time_s for t in trials]))
    return TaskMetrics(success_rate=sr, mean_search_time_s=mean_st,
                       trials=len(trials))


# ---------------------------------------------------------------------------
# Robustness analysis over recorded episodes.
# ---------------------------------------------------------------------------

def composite_yaw_series(episode) -> np.ndarray:
    """Viewpoint yaw (episode-base frame) per recorded step."""
    out = np.empty(len(episode.samples))
    for i, s in enumerate(episode.samples):
        m = s.head.rotation.matrix
        out[i] = math.atan2(float(m[1, 0]), float(m[0, 0]))
    return out


def scanning_mask(yaw: np.ndarray, window: int, threshold: float) -> np.ndarray:
    """True where the trailing-window yaw variance exceeds the threshold."""
    mask = np.zeros(len(yaw), dtype=bool)
    for i in range(len(yaw)):
        lo = max(0, i - window + 1)
        seg = yaw[lo:i + 1]
        if len(seg) >= max(2, window // 2):
            # circular-safe: variance of unwrapped segment
            seg = np.unwrap(seg)
            mask[i] = float(np.var(seg)) > threshold
    return mask


@dataclass
class RobustnessReport:
    rescan_latencies: list = field(default_factory=list)
    recenter_latencies: list = field(default_factory=list)
    events: list = field(default_factory=list)
    permanent_fixation: bool = False

    def ok(self, rescan_limit: int, recenter_limit: int) -> bool:
        return (not self.permanent_fixation
                and all(v is not None and v <= rescan_limit
                        for v in self.rescan_latencies)
                and all(v is not None and v <= recenter_limit
                        for v in self.recenter_latencies))


def analyze_robustness(episode, schedule, centered_steps, cfg: LabConfig,
                       control_period: float) -> RobustnessReport:
    """Measure re-scan and re-fixation latencies around perturbation events.

    `schedule` is the applied perturbation list; `centered_steps` is a
    boolean per-step series of the centering predicate recorded during the
    run.  Scanning is detected as trailing-window yaw variance above the
    configured threshold.
    """
    yaw = composite_yaw_series(episode)
    scan = scanning_mask(yaw, cfg.eval.scan_window, cfg.eval.scan_var_threshold)
    centered = np.asarray(centered_steps, dtype=bool)
    n = len(yaw)
    report = RobustnessReport()
    for ev in schedule:
        step = int(round(ev.time_s / control_period))
        if step >= n:
            continue
        after = scan[step:]
        idx = np.argmax(after) if after.any() else None
        latency = int(idx) if idx is not None else None
        report.rescan_latencies.append(latency)
        report.events.append((ev.variant, step))
        if ev.variant == "relocation":
            seg = centered[step:]
            idx = np.argmax(seg) if seg.any() else None
            report.recenter_latencies.append(int(idx) if idx is not None else None)
    # permanent fixation: a long no-scan, no-center stretch at the tail
    tail = max(0, n - 10 * cfg.eval.scan_window)
    tail_scan = scan[tail:]
    tail_centered = centered[tail:]
    if len(tail_scan) > cfg.eval.scan_window:
        quiet = ~(tail_scan | tail_centered)
        report.permanent_fixation = bool(np.mean(quiet) > 0.9)
    return report


# ---------------------------------------------------------------------------
# Report emission.
# ---------------------------------------------------------------------------

def write_reports(rows, csv_path=None, json_path=None):
    """Rows of (task, seeds, metrics) as CSV and a JSON summary."""
    table = [{
        "task": task,
        "trials": metrics.trials,
        "success_rate": round(metrics.success_rate, 4),
        "mean_search_time_s": round(metrics.mean_search_time_s, 3),
    } for task, metrics in rows]
    if csv_path:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(table[0].keys()))
            writer.writeheader()
            writer.writerows(table)
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump({"tasks": table}, fh, indent=2)
    return table
