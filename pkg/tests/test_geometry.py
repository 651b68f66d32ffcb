import math

import numpy as np
import pytest

from asalab.errors import DegenerateInput, EmptyEpisode, UnreachableTarget
from asalab.geometry import (
    ChassisState,
    HeadState,
    MountCalibration,
    Pose,
    Rotation,
    aggregate_head,
    decompose_head,
    episode_base_transform,
    random_pose,
    random_rotation,
    rot6d_decode,
    rot6d_encode,
    rot_y,
    rot_z,
    wrap_angle,
)


def test_wrap_angle_range():
    for a in np.linspace(-12.0, 12.0, 400):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert abs(math.sin(w - a)) < 1e-12


class TestRot6d:
    def test_identity(self):
        assert np.allclose(rot6d_encode(Rotation.identity()),
                           [1, 0, 0, 0, 1, 0])

    def test_rot_z_quarter(self):
        v = rot6d_encode(Rotation(rot_z(math.pi / 2)))
        assert np.allclose(v, [0, 1, 0, -1, 0, 0], atol=1e-12)

    def test_decode_identity(self):
        r = rot6d_decode([1, 0, 0, 0, 1, 0])
        assert np.allclose(r.matrix, np.eye(3))

    def test_decode_removes_scale(self):
        r = rot6d_decode([2, 0, 0, 0, 3, 0])
        assert np.allclose(r.matrix, np.eye(3))

    def test_decode_parallel_columns_raises(self):
        with pytest.raises(DegenerateInput):
            rot6d_decode([1, 0, 0, 1, 0, 0])

    def test_round_trip_1000(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            r = random_rotation(rng)
            back = rot6d_decode(rot6d_encode(r))
            assert np.allclose(back.matrix, r.matrix, atol=1e-9)
            assert back.is_valid(1e-9)


class TestPose:
    def test_compose_inverse_is_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            p = random_pose(rng)
            e = p.compose(p.inverse())
            assert np.allclose(e.rotation.matrix, np.eye(3), atol=1e-9)
            assert np.allclose(e.translation, 0.0, atol=1e-9)

    def test_transform_point(self):
        p = Pose(Rotation(rot_z(math.pi / 2)), np.array([1.0, 0.0, 0.0]))
        out = p.transform_point([1.0, 0.0, 0.0])
        assert np.allclose(out, [1.0, 1.0, 0.0], atol=1e-12)


class TestAggregateHead:
    def test_neutral(self):
        calib = MountCalibration(z_fixed=1.4)
        pose = aggregate_head(ChassisState(), HeadState(), calib)
        assert np.allclose(pose.translation, [0, 0, 1.4])
        assert np.allclose(pose.rotation.matrix, np.eye(3))

    def test_chassis_yaw_only(self):
        calib = MountCalibration(z_fixed=1.4)
        pose = aggregate_head(ChassisState(1.0, 2.0, math.pi / 2),
                              HeadState(), calib)
        assert np.allclose(pose.translation, [1.0, 2.0, 1.4])
        assert np.allclose(pose.rotation.matrix, rot_z(math.pi / 2), atol=1e-12)

    def test_combined_rotation_product(self):
        calib = MountCalibration()
        pose = aggregate_head(ChassisState(0, 0, math.pi / 4),
                              HeadState(pitch=0.3, yaw=math.pi / 4), calib)
        expected = rot_z(math.pi / 2) @ rot_y(0.3)
        assert np.allclose(pose.rotation.matrix, expected, atol=1e-12)


class TestDecomposeHead:
    calib = MountCalibration(z_fixed=1.4)

    def test_pitch_only_keeps_chassis(self):
        current_c = ChassisState(0.3, -0.2, 0.1)
        current_h = HeadState(pitch=0.0, yaw=0.0)
        target = aggregate_head(current_c, HeadState(pitch=0.2, yaw=0.0),
                                self.calib)
        c, h = decompose_head(target, current_c, current_h, self.calib)
        assert (c.x, c.y, c.yaw) == (current_c.x, current_c.y, current_c.yaw)
        assert abs(h.pitch - 0.2) < 1e-9

    def test_large_yaw_rotates_chassis(self):
        current_c = ChassisState(0.0, 0.0, 0.0)
        target = aggregate_head(ChassisState(0, 0, 0.8), HeadState(), self.calib)
        c, h = decompose_head(target, current_c, HeadState(), self.calib)
        assert abs(wrap_angle(c.yaw - 0.8)) < 1e-9
        assert abs(h.yaw) < 1e-9

    def test_round_trip_1000(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            goal_c = ChassisState(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                                  rng.uniform(-math.pi, math.pi))
            goal_h = HeadState(pitch=rng.uniform(-1.0, 1.0), yaw=0.0)
            target = aggregate_head(goal_c, goal_h, self.calib)
            cur_c = ChassisState(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5),
                                 rng.uniform(-math.pi, math.pi))
            cur_h = HeadState(pitch=rng.uniform(-1.0, 1.0),
                              yaw=rng.uniform(-1.5, 1.5))
            c, h = decompose_head(target, cur_c, cur_h, self.calib)
            realized = aggregate_head(c, h, self.calib)
            assert realized.almost_equal(target, tol=1e-6)

    def test_stationary_branch_exact_when_triggers_below(self):
        cur_c = ChassisState(0.5, 0.5, 0.3)
        cur_h = HeadState(pitch=0.1, yaw=0.2)
        target = aggregate_head(cur_c, HeadState(pitch=0.4, yaw=0.5), self.calib)
        c, h = decompose_head(target, cur_c, cur_h, self.calib)
        assert (c.x, c.y, c.yaw) == (cur_c.x, cur_c.y, cur_c.yaw)
        assert aggregate_head(c, h, self.calib).almost_equal(target, tol=1e-6)

    def test_unreachable_pitch(self):
        bad = Pose(Rotation(rot_y(1.5)), np.array([0.0, 0.0, 1.4]))
        with pytest.raises(UnreachableTarget):
            decompose_head(bad, ChassisState(), HeadState(), self.calib)

    def test_chassis_moves_iff_over_thresholds(self):
        cur_c = ChassisState(0.0, 0.0, 0.0)
        cur_h = HeadState()
        below = aggregate_head(ChassisState(0.03, 0.0, 0.0),
                               HeadState(yaw=0.3), self.calib)
        c, _ = decompose_head(below, cur_c, cur_h, self.calib)
        assert (c.x, c.y) == (0.0, 0.0)
        over_xy = aggregate_head(ChassisState(0.2, 0.0, 0.0), HeadState(),
                                 self.calib)
        c, _ = decompose_head(over_xy, cur_c, cur_h, self.calib)
        assert c.x == pytest.approx(0.2)


class TestEpisodeBaseTransform:
    def test_head_identity_at_t0(self):
        rng = np.random.default_rng(1)
        frames = [{"H": random_pose(rng), "L": random_pose(rng),
                   "R": random_pose(rng)} for _ in range(5)]
        out = episode_base_transform(frames, MountCalibration())
        assert out[0]["H"].almost_equal(Pose.identity(), tol=1e-9)

    def test_invariance_to_world_reanchoring(self):
        rng = np.random.default_rng(11)
        frames = [{"H": random_pose(rng), "L": random_pose(rng),
                   "R": random_pose(rng)} for _ in range(8)]
        base_out = episode_base_transform(frames, MountCalibration())
        for _ in range(5):
            anchor = random_pose(rng)
            moved = [{k: anchor.compose(p) for k, p in f.items()} for f in frames]
            out = episode_base_transform(moved, MountCalibration())
            for f0, f1 in zip(base_out, out):
                for key in f0:
                    assert np.allclose(f0[key].rotation.matrix,
                                       f1[key].rotation.matrix, atol=1e-9)
                    assert np.allclose(f0[key].translation,
                                       f1[key].translation, atol=1e-9)

    def test_hand_one_meter_ahead(self):
        rng = np.random.default_rng(5)
        head = random_pose(rng)
        hand = head.compose(Pose(Rotation.identity(), np.array([1.0, 0, 0])))
        out = episode_base_transform([{"H": head, "L": hand}],
                                     MountCalibration())
        assert np.allclose(out[0]["L"].translation, [1.0, 0.0, 0.0], atol=1e-9)

    def test_empty_episode(self):
        with pytest.raises(EmptyEpisode):
            episode_base_transform([], MountCalibration())
