"""Training losses: binary focal loss and the weighted action-velocity loss."""

from __future__ import annotations

import math

import numpy as np

from ..dataspace import ACTION_DIM, COMPONENT_INDICES
from ..errors import ShapeMismatch

_EPS = 1e-7


def focal_loss(p: float, y: int, alpha_t: float = 0.25, gamma: float = 2.0) -> float:
    """-alpha_t * (1 - p_t)^gamma * log(p_t) with the usual class flip.

    p is the predicted probability of label 1; p_t = p when y = 1 else
    1 - p, and the balancing factor flips to 1 - alpha_t for y = 0.
    Probabilities are clamped to [1e-7, 1 - 1e-7] before the log.
    """
    p_t = p if y == 1 else 1.0 - p
    a_t = alpha_t if y == 1 else 1.0 - alpha_t
    p_t = min(1.0 - _EPS, max(_EPS, p_t))
    return -a_t * (1.0 - p_t) ** gamma * math.log(p_t)


def focal_loss_grad(p, y, alpha_t: float = 0.25, gamma: float = 2.0):
    """d focal / d p, vectorized; zero where the clamp is active."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y)
    p_t = np.where(y == 1, p, 1.0 - p)
    a_t = np.where(y == 1, alpha_t, 1.0 - alpha_t)
    clamped = (p_t < _EPS) | (p_t > 1.0 - _EPS)
    p_c = np.clip(p_t, _EPS, 1.0 - _EPS)
    d_pt = a_t * (gamma * (1.0 - p_c) ** (gamma - 1.0) * np.log(p_c)
                  - (1.0 - p_c) ** gamma / p_c)
    d_pt = np.where(clamped, 0.0, d_pt)
    return d_pt * np.where(y == 1, 1.0, -1.0)


def component_weight_vector(chunk_size: int, weights: dict) -> np.ndarray:
    """Per-coordinate loss weights tiled over the K chunk rows.

    `weights` maps component names {vr, vp, er, ep, g} to their lambdas.
    """
    row = np.zeros(ACTION_DIM)
    for name, idx in COMPONENT_INDICES.items():
        row[idx] = weights[name]
    return np.tile(row, chunk_size)


def joint_loss(pred_velocities, target_velocities, pred_score, label, config) -> float:
    """Weighted squared-error action loss plus the weighted focal term.

    Component norms are sums of squared errors over each component's
    coordinates and all chunk rows.
    """
    pred = np.asarray(pred_velocities, dtype=float)
    target = np.asarray(target_velocities, dtype=float)
    if pred.shape != target.shape or pred.shape[-1] != ACTION_DIM:
        raise ShapeMismatch(f"velocity shapes {pred.shape} vs {target.shape}")
    err = pred - target
    weights = {name: getattr(config, f"lambda_{name}")
               for name in COMPONENT_INDICES}
    action_term = 0.0
    for name, idx in COMPONENT_INDICES.items():
        action_term += weights[name] * float(np.sum(err[..., idx] ** 2))
    cog_term = config.lambda_t * focal_loss(
        pred_score, label, config.alpha_t, config.gamma)
    return action_term + cog_term
