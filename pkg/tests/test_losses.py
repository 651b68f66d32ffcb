"""Loss values, stage hyperparameter defaults, and gradient correctness.

The finite-difference oracle perturbs every coordinate of a small model
configuration; agreement uses |analytic - numeric| <=
1e-4 * max(1, |analytic|, |numeric|), i.e. relative 1e-4 with a unit
floor where both values vanish.
"""

import math

import numpy as np
import pytest

from asalab.config import stage_defaults
from asalab.policy import (
    ModelDims,
    PolicyNetwork,
    component_weight_vector,
    focal_loss,
    focal_loss_grad,
    joint_loss,
)

TINY = ModelDims(visual_dim=5, n_hist=1, d_ctx=6, hidden=5, d_embed=3,
                 chunk=2, vocab=3, noise_proj=4)


class TestFocalLoss:
    def test_reference_value(self):
        # -0.25 * (1 - 0.5)^2 * ln(0.5)
        assert focal_loss(0.5, 1, 0.25, 2.0) == pytest.approx(0.0433217,
                                                              abs=1e-6)

    def test_zero_at_confident_correct(self):
        assert focal_loss(1.0 - 1e-7, 1) == pytest.approx(0.0, abs=1e-12)

    def test_monotone_in_pt(self):
        values = [focal_loss(p, 1) for p in np.linspace(0.05, 0.95, 40)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert focal_loss(0.9, 1) < focal_loss(0.5, 1)

    def test_label_flip(self):
        assert focal_loss(0.2, 0, 0.25, 2.0) == pytest.approx(
            -0.75 * (0.2 ** 2) * math.log(0.8), abs=1e-12)

    def test_gradient_matches_fd(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            p = float(rng.uniform(0.05, 0.95))
            y = int(rng.integers(0, 2))
            g = focal_loss_grad(np.array([p]), np.array([y]))[0]
            eps = 1e-6
            num = (focal_loss(p + eps, y) - focal_loss(p - eps, y)) / (2 * eps)
            assert g == pytest.approx(num, rel=1e-5, abs=1e-9)


class TestJointLoss:
    def test_perfect_prediction_nearly_zero(self):
        cfg = stage_defaults(2)
        v = np.zeros((30, 29))
        loss = joint_loss(v, v, 1.0 - 1e-9, 1, cfg)
        assert loss == pytest.approx(0.0, abs=1e-10)

    def test_viewpoint_rotation_unit_error(self):
        cfg = stage_defaults(2)
        pred = np.zeros((30, 29))
        pred[:, 3:9] = 1.0
        target = np.zeros((30, 29))
        loss = joint_loss(pred, target, 1.0 - 1e-9, 1, cfg)
        assert loss == pytest.approx(1.5 * 6 * 30, abs=1e-6)

    def test_stage3_focal_weight(self):
        cfg = stage_defaults(3)
        v = np.zeros((30, 29))
        base = focal_loss(0.5, 1, cfg.alpha_t, cfg.gamma)
        assert joint_loss(v, v, 0.5, 1, cfg) == pytest.approx(0.8 * base)

    def test_component_weight_layout(self):
        cfg = stage_defaults(2)
        w = component_weight_vector(30, {
            "vr": cfg.lambda_vr, "vp": cfg.lambda_vp, "er": cfg.lambda_er,
            "ep": cfg.lambda_ep, "g": cfg.lambda_g})
        assert w.shape == (870,)
        row = w[:29]
        assert np.all(row[3:9] == 1.5)
        assert np.all(row[0:3] == 1.0)
        assert np.all(row[[27, 28]] == 1.0)


class TestStageDefaults:
    def test_table_rows(self):
        s1, s2, s3 = (stage_defaults(k) for k in (1, 2, 3))
        assert (s1.lr, s1.epochs, s1.lambda_t) == (2e-5, 10, 1.0)
        assert (s2.lr, s2.epochs, s2.lambda_t) == (1e-4, 20, 0.5)
        assert (s3.lr, s3.epochs, s3.lambda_t) == (2e-5, 50, 0.8)
        for s in (s1, s2, s3):
            assert (s.alpha_t, s.gamma) == (0.25, 2.0)
            assert s.lr_schedule == "cosine"
        for s in (s2, s3):
            assert s.chunk_size == 30
            assert (s.lambda_vr, s.lambda_vp, s.lambda_er,
                    s.lambda_ep, s.lambda_g) == (1.5, 1.0, 1.0, 1.0, 1.0)


def _random_batch(rng, dims, n=3):
    return {
        "vis": rng.normal(size=(n, dims.vis_in)),
        "prop": rng.normal(size=(n, dims.prop_in)),
        "instr": rng.integers(0, dims.vocab, size=n),
        "label": rng.integers(0, 2, size=n),
        "noisy": rng.normal(size=(n, dims.dec_out)),
        "tau": rng.random(n) * 0.85,
        "target_v": rng.normal(size=(n, dims.dec_out)),
    }


class TestGradients:
    @pytest.mark.parametrize("mode", ["focal", "joint"])
    def test_analytic_matches_central_differences(self, mode):
        net = PolicyNetwork(TINY)
        cfg = stage_defaults(2)
        rng = np.random.default_rng(5)
        eps = 1e-5
        for draw in range(20):
            params = net.init_params(np.random.default_rng(100 + draw))
            vec = params.vector + rng.normal(0.0, 0.05, params.vector.size)
            batch = _random_batch(rng, TINY)
            _, grad, _ = net.loss_and_grad(vec, batch, cfg, mode)
            num = np.empty_like(grad)
            for i in range(vec.size):
                vp, vm = vec.copy(), vec.copy()
                vp[i] += eps
                vm[i] -= eps
                num[i] = (net.loss_only(vp, batch, cfg, mode)
                          - net.loss_only(vm, batch, cfg, mode)) / (2 * eps)
            scale = np.maximum(1.0, np.maximum(np.abs(grad), np.abs(num)))
            assert np.all(np.abs(grad - num) <= 1e-4 * scale)
