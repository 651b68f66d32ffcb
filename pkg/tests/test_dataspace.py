import math

import numpy as np
import pytest

from asalab.dataspace import (
    ACTION_DIM,
    Episode,
    Percept,
    TrajectorySample,
    action_from_poses,
    annotate_cognition,
    extract_chunk,
    hand_aperture,
    normalize_gripper,
    poses_from_action,
    read_episode,
    sample_memory_window,
    validate_action,
    validate_episode_file,
    write_episode,
)
from asalab.errors import (
    BadJointCount,
    SchemaViolation,
    UnsortedBoundaries,
    VersionMismatch,
)
from asalab.geometry import Pose, Rotation, random_pose, rot_z


def make_episode(n=20, rate=30.0, source="robot-analog", seed=0,
                 motion=None):
    rng = np.random.default_rng(seed)
    samples = []
    for k in range(n):
        if motion is None:
            head = Pose.identity()
        else:
            head = Pose(Rotation.identity(),
                        np.array([motion * k, 0.0, 0.0]))
        left = Pose(Rotation(rot_z(0.1)), np.array([0.3, 0.2, 0.9]))
        right = Pose(Rotation.identity(), np.array([0.3, -0.2, 0.9]))
        samples.append(TrajectorySample(
            frame=k, timestamp=k / rate, head=head, left=left, right=right,
            grip_left=1.0, grip_right=float(rng.random()),
            obs_ref=f"obs-{k:06d}",
            percepts=[Percept("thing", "target", rng.normal(size=3), 0.1, 0.8)],
            source=source, subtask_id=0, cognition=0))
    return Episode(episode_id=f"ep-{seed}", frame_rate_hz=rate,
                   task_kind="cylinder", embodiment=source, samples=samples,
                   instructions=["find it", "move it"])


class TestActionVector:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        head, left, right = (random_pose(rng) for _ in range(3))
        a = action_from_poses(head, left, right, 0.25, 0.75)
        h2, l2, r2, gl, gr = poses_from_action(a)
        assert h2.almost_equal(head, 1e-12) and l2.almost_equal(left, 1e-12)
        assert r2.almost_equal(right, 1e-12)
        assert (gl, gr) == (0.25, 0.75)
        assert validate_action(a)

    def test_invalid_gripper(self):
        a = action_from_poses(Pose.identity(), Pose.identity(),
                              Pose.identity(), 1.4, 0.0)
        assert not validate_action(a)


class TestHandAperture:
    def test_coincident_tips(self):
        joints = np.zeros((21, 3))
        assert hand_aperture(joints) == 0.0

    def test_max_bound(self):
        joints = np.zeros((21, 3))
        for tip in (8, 12, 16, 20):
            joints[tip] = [0.18, 0.0, 0.0]
        assert hand_aperture(joints) == 1.0

    def test_arithmetic(self):
        joints = np.zeros((21, 3))
        for tip, d in zip((8, 12, 16, 20), (0.04, 0.06, 0.08, 0.10)):
            joints[tip] = [d, 0.0, 0.0]
        assert hand_aperture(joints) == pytest.approx(0.07 / 0.18, abs=1e-12)

    def test_bad_joint_count(self):
        with pytest.raises(BadJointCount):
            hand_aperture(np.zeros((20, 3)))


def test_normalize_gripper():
    assert normalize_gripper(0.0, 0.1) == 0.0
    assert normalize_gripper(0.1, 0.1) == 1.0
    assert normalize_gripper(0.15, 0.1) == 1.0


class TestAnnotateCognition:
    def test_robot_suffix_90(self):
        ep = annotate_cognition(make_episode(200, rate=30.0), [])
        labels = [s.cognition for s in ep.samples]
        assert labels[:110] == [0] * 110
        assert labels[110:] == [1] * 90

    def test_human_suffix_30(self):
        ep = annotate_cognition(make_episode(50, rate=10.0,
                                             source="human-analog"), [])
        labels = [s.cognition for s in ep.samples]
        assert labels[:20] == [0] * 20 and labels[20:] == [1] * 30

    def test_short_subtask_fully_labeled(self):
        ep = annotate_cognition(make_episode(40, rate=30.0), [])
        assert all(s.cognition == 1 for s in ep.samples)

    def test_label_count_matches_rule(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = int(rng.integers(5, 400))
            rate = float(rng.choice([10.0, 30.0]))
            k_bounds = sorted(rng.choice(np.arange(1, n), size=min(3, n - 1),
                                         replace=False).tolist())
            ep = annotate_cognition(make_episode(n, rate=rate), k_bounds)
            w = int(round(3.0 * rate))
            bounds = k_bounds + ([n] if (not k_bounds or k_bounds[-1] < n) else [])
            expected, start = 0, 0
            for end in bounds:
                expected += min(w, end - start)
                start = end
            assert sum(s.cognition for s in ep.samples) == expected
            # labels are a suffix of each sub-task
            start = 0
            for end in bounds:
                seg = [s.cognition for s in ep.samples[start:end]]
                assert seg == sorted(seg)
                start = end

    def test_unsorted_boundaries(self):
        with pytest.raises(UnsortedBoundaries):
            annotate_cognition(make_episode(30), [20, 10])

    def test_subtask_ids_assigned(self):
        ep = annotate_cognition(make_episode(30), [10, 20])
        ids = [s.subtask_id for s in ep.samples]
        assert ids == [0] * 10 + [1] * 10 + [2] * 10


class TestMemoryWindow:
    def test_30hz(self):
        ep = make_episode(500, rate=30.0)
        w = sample_memory_window(ep, 450)
        assert w.frame_indices == [450, 420, 390, 360, 330, 300]

    def test_10hz(self):
        ep = make_episode(120, rate=10.0, source="human-analog")
        w = sample_memory_window(ep, 100)
        assert w.frame_indices == [100, 90, 80, 70, 60, 50]

    def test_clamped_at_start(self):
        ep = make_episode(100, rate=30.0)
        w = sample_memory_window(ep, 60)
        assert w.frame_indices == [60, 30, 0, 0, 0, 0]

    def test_floor_clamp(self):
        ep = make_episode(200, rate=30.0)
        w = sample_memory_window(ep, 100, floor=80)
        assert w.frame_indices == [100, 80, 80, 80, 80, 80]

    def test_shape_and_spacing(self):
        ep = make_episode(400, rate=30.0)
        for t in (0, 5, 133, 399):
            w = sample_memory_window(ep, t)
            assert len(w.obs_refs) == 6 and w.proprio.shape == (6, ACTION_DIM)
            diffs = np.diff(w.frame_indices)
            assert all(d == -30 or w.frame_indices[i + 1] == 0
                       or d >= -30 for i, d in enumerate(diffs))


class TestExtractChunk:
    def test_stationary(self):
        ep = make_episode(100)
        for s in ep.samples:
            s.grip_right = 0.5
        chunk = extract_chunk(ep, 10)
        assert np.allclose(chunk.actions, chunk.actions[0])

    def test_hold_last_padding(self):
        ep = make_episode(50)
        chunk = extract_chunk(ep, 49)
        assert chunk.size == 30
        assert np.allclose(chunk.actions,
                           ep.samples[-1].action_vector()[None, :])

    def test_linear_motion(self):
        ep = make_episode(100, motion=0.03)
        t = 20
        chunk = extract_chunk(ep, t)
        for k in range(30):
            assert chunk.actions[k][0] == pytest.approx(0.03 * (t + 1 + k))

    def test_finite_difference_velocities(self):
        ep = make_episode(100, motion=0.03)
        chunk = extract_chunk(ep, 10)
        vel = np.diff(chunk.actions, axis=0) * ep.frame_rate_hz
        assert np.allclose(vel[:, 0], 0.03 * 30.0)


class TestEpisodeIO:
    def test_round_trip_random(self, tmp_path):
        rng = np.random.default_rng(2)
        for i in range(25):
            ep = annotate_cognition(
                make_episode(int(rng.integers(2, 60)), seed=i), [])
            path = tmp_path / f"ep{i}.jsonl"
            write_episode(ep, path, result={"note": float(rng.random())})
            back, result = read_episode(path)
            assert back.episode_id == ep.episode_id
            assert len(back) == len(ep)
            assert back.instructions == ep.instructions
            for a, b in zip(ep.samples, back.samples):
                assert a.timestamp == b.timestamp
                assert a.head.almost_equal(b.head, tol=0.0)
                assert a.left.almost_equal(b.left, tol=0.0)
                assert a.grip_right == b.grip_right
                assert a.cognition == b.cognition
                assert len(a.percepts) == len(b.percepts)
                for p, q in zip(a.percepts, b.percepts):
                    assert p.entity_id == q.entity_id
                    assert np.array_equal(p.position, q.position)
            assert result is not None

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"record": "sample"}\n')
        with pytest.raises(SchemaViolation):
            read_episode(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "old.jsonl"
        path.write_text('{"record": "header", "schema": "asa-episode/0"}\n')
        with pytest.raises(VersionMismatch):
            read_episode(path)

    def test_handwritten_fixture(self, tmp_path):
        lines = [
            '{"record": "header", "schema": "asa-episode/1", "episode_id": "mini",'
            ' "frame_rate_hz": 30, "task_kind": "cylinder", "embodiment":'
            ' "robot-analog", "instructions": ["a", "b"], "n_frames": 2}',
            '{"record": "sample", "frame": 0, "t": 0.0,'
            ' "head": {"r": [1,0,0,0,1,0,0,0,1], "p": [0,0,1.4]},'
            ' "left": {"r": [1,0,0,0,1,0,0,0,1], "p": [0.3,0.2,0.9]},'
            ' "right": {"r": [1,0,0,0,1,0,0,0,1], "p": [0.3,-0.2,0.9]},'
            ' "grip_l": 1.0, "grip_r": 0.5, "obs_ref": "obs-0",'
            ' "percepts": [], "source": "robot-analog", "subtask": 0, "cog": 0}',
            '{"record": "sample", "frame": 1, "t": 0.0333,'
            ' "head": {"r": [1,0,0,0,1,0,0,0,1], "p": [0,0,1.4]},'
            ' "left": {"r": [1,0,0,0,1,0,0,0,1], "p": [0.3,0.2,0.9]},'
            ' "right": {"r": [1,0,0,0,1,0,0,0,1], "p": [0.3,-0.2,0.9]},'
            ' "grip_l": 1.0, "grip_r": 0.5, "obs_ref": "obs-1",'
            ' "percepts": [{"id": "cyl", "kind": "target", "pos": [1,0,0],'
            ' "yaw": 0.0, "quality": 1.0, "open": null}],'
            ' "source": "robot-analog", "subtask": 1, "cog": 1}',
        ]
        path = tmp_path / "mini.jsonl"
        path.write_text("\n".join(lines) + "\n")
        ep, result = read_episode(path)
        assert result is None
        assert ep.episode_id == "mini" and len(ep) == 2
        assert ep.samples[0].grip_right == 0.5
        assert ep.samples[1].cognition == 1
        assert ep.samples[1].percepts[0].entity_id == "cyl"
        assert np.allclose(ep.samples[0].head.translation, [0, 0, 1.4])
        info = validate_episode_file(path)
        assert info["frames"] == 2

    def test_frame_count_mismatch(self, tmp_path):
        ep = make_episode(5)
        path = tmp_path / "c.jsonl"
        write_episode(ep, path)
        text = path.read_text().splitlines()
        path.write_text("\n".join(text[:-1]) + "\n")  # drop one sample
        with pytest.raises(SchemaViolation):
            read_episode(path)

    def test_17_digit_floats(self, tmp_path):
        ep = make_episode(3)
        ep.samples[1].grip_right = 1.0 / 3.0
        path = tmp_path / "p.jsonl"
        write_episode(ep, path)
        back, _ = read_episode(path)
        assert back.samples[1].grip_right == 1.0 / 3.0
        assert "0.3333333333333333" in path.read_text()
