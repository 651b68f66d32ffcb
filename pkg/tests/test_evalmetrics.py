import numpy as np
import pytest

from asalab.config import load_config
from asalab.errors import EmptyTrials, MissingMarkers
from asalab.evalmetrics import (
    RobustnessReport,
    TrialResult,
    aggregate,
    analyze_robustness,
    composite_yaw_series,
    evaluate_trial,
    scanning_mask,
    write_reports,
)
from asalab.world.entities import PerturbationEvent

CFG = load_config()


def result(markers, sim_time=60.0, kind="croissant", seed=0):
    return {"task": kind, "seed": seed, "markers": markers,
            "sim_time": sim_time}


class TestEvaluateTrial:
    def test_croissant_st_from_episode_start(self):
        tr = evaluate_trial(result([("centered", 26.7), ("placed", 44.0)]),
                            "croissant")
        assert tr.search_time_s == pytest.approx(26.7)
        assert tr.success

    def test_failed_search_capped(self):
        tr = evaluate_trial(result([]), "croissant")
        assert tr.search_time_s == 1000.0
        assert not tr.success

    def test_cans_st_from_pick_marker(self):
        tr = evaluate_trial(
            result([("pick", 10.0), ("centered", 40.0),
                    ("deposited", 70.0)], kind="cans"), "cans")
        assert tr.search_time_s == pytest.approx(30.0)
        assert tr.success

    def test_cans_missing_pick_marker_raises(self):
        with pytest.raises(MissingMarkers):
            evaluate_trial(result([("centered", 10.0)], kind="cans"), "cans")

    def test_st_invariant_to_later_events(self):
        base = [("exposed", 5.0), ("pick", 9.0), ("placed", 30.0)]
        extra = base + [("exposed", 50.0), ("centered", 55.0)]
        a = evaluate_trial(result(base, kind="cylinder"), "cylinder")
        b = evaluate_trial(result(extra, kind="cylinder"), "cylinder")
        assert a.search_time_s == b.search_time_s == pytest.approx(5.0)

    def test_success_requires_completion_marker(self):
        tr = evaluate_trial(result([("exposed", 4.0), ("pick", 8.0)],
                                   kind="cylinder"), "cylinder")
        assert not tr.success


class TestAggregate:
    def test_28_of_30(self):
        trials = [TrialResult("croissant", s, s < 28, 20.0, 30.0, [])
                  for s in range(30)]
        m = aggregate(trials)
        assert m.success_rate == pytest.approx(0.9333, abs=1e-4)

    def test_all_failures(self):
        trials = [TrialResult("croissant", s, False, 1000.0, 1000.0, [])
                  for s in range(5)]
        m = aggregate(trials)
        assert m.success_rate == 0.0
        assert m.mean_search_time_s == 1000.0

    def test_mixed_mean_includes_cap(self):
        trials = [TrialResult("croissant", 0, True, 20.0, 30.0, []),
                  TrialResult("croissant", 1, False, 1000.0, 1000.0, [])]
        assert aggregate(trials).mean_search_time_s == pytest.approx(510.0)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        trials = [TrialResult("croissant", s, bool(rng.integers(2)),
                              float(rng.uniform(5, 900)), 0.0, [])
                  for s in range(40)]
        a = aggregate(trials)
        b = aggregate(list(reversed(trials)))
        assert a == b

    def test_empty(self):
        with pytest.raises(EmptyTrials):
            aggregate([])


class TestScanDetector:
    def test_sweep_is_scanning_hold_is_not(self):
        t = np.arange(600) / 30.0
        sweep = 1.2 * np.sin(2 * np.pi * t / 4.0)
        hold = np.full(600, 0.8) + np.random.default_rng(0).normal(0, 0.002, 600)
        m_sweep = scanning_mask(sweep, CFG.eval.scan_window,
                                CFG.eval.scan_var_threshold)
        m_hold = scanning_mask(hold, CFG.eval.scan_window,
                               CFG.eval.scan_var_threshold)
        assert m_sweep[CFG.eval.scan_window:].mean() > 0.9
        assert m_hold[CFG.eval.scan_window:].mean() < 0.05


class TestRobustnessAnalysis:
    def make_episode(self, yaws, rate=30.0):
        from asalab.dataspace import Episode, TrajectorySample
        from asalab.geometry import Pose, Rotation, rot_z
        samples = []
        for i, y in enumerate(yaws):
            samples.append(TrajectorySample(
                frame=i, timestamp=i / rate,
                head=Pose(Rotation(rot_z(float(y))), np.zeros(3)),
                left=Pose.identity(), right=Pose.identity(),
                grip_left=1.0, grip_right=1.0, obs_ref=f"o{i}",
                percepts=[], source="robot-analog"))
        return Episode("r", rate, "croissant", "robot-analog", samples, ["s"])

    def test_latencies_measured(self):
        rate = 30.0
        hold = np.full(300, 0.9)
        scan = 1.2 * np.sin(2 * np.pi * np.arange(300) / 120.0)
        yaws = np.concatenate([hold, scan, np.full(300, -0.4)])
        episode = self.make_episode(yaws)
        centered = np.zeros(900, dtype=bool)
        centered[:300] = True
        centered[560:] = True
        schedule = [PerturbationEvent(10.0, "relocation", "croissant",
                                      (0.5, 0.5, 0.8))]
        report = analyze_robustness(episode, schedule, centered, CFG,
                                    1.0 / rate)
        assert len(report.rescan_latencies) == 1
        assert report.rescan_latencies[0] is not None
        assert report.rescan_latencies[0] <= CFG.eval.rescan_limit_steps
        assert report.recenter_latencies[0] is not None
        assert report.ok(CFG.eval.rescan_limit_steps,
                         CFG.eval.recenter_limit_steps)

    def test_permanent_fixation_detected(self):
        yaws = np.full(2000, 0.3)
        episode = self.make_episode(yaws)
        centered = np.zeros(2000, dtype=bool)
        schedule = [PerturbationEvent(1.0, "disappearance", "croissant")]
        report = analyze_robustness(episode, schedule, centered, CFG, 1 / 30.0)
        assert report.permanent_fixation
        assert not report.ok(CFG.eval.rescan_limit_steps,
                             CFG.eval.recenter_limit_steps)


def test_write_reports(tmp_path):
    from asalab.evalmetrics import TaskMetrics
    rows = [("cylinder", TaskMetrics(0.925, 12.5, 40))]
    table = write_reports(rows, csv_path=tmp_path / "t.csv",
                          json_path=tmp_path / "t.json")
    assert table[0]["success_rate"] == 0.925
    import csv as _csv
    import json as _json
    with open(tmp_path / "t.csv") as fh:
        rows_csv = list(_csv.DictReader(fh))
    assert rows_csv[0]["task"] == "cylinder"
    data = _json.load(open(tmp_path / "t.json"))
    assert data["tasks"][0]["trials"] == 40
