"""Forward and backward passes of the toy policy, written out by hand.

Two independent 2-hidden-layer tanh MLPs encode the visual and
proprioceptive memory tracks; a third scores task resolution from the dual
context plus an instruction embedding; a fourth predicts the flow-matching
velocity over a K x 29 action chunk from the same conditioning, the noisy
chunk, and the flow time.  Gradients are assembled into the same flat
layout the parameters use so they can be checked coordinate-by-coordinate
against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataspace import ACTION_DIM
from ..errors import ShapeMismatch
from .features import PERCEPT_FEATURE_DIM
from .losses import component_weight_vector, focal_loss, focal_loss_grad
from .params import PolicyParams, SEGMENT_NAMES


@dataclass(frozen=True)
class ModelDims:
    visual_dim: int = PERCEPT_FEATURE_DIM
    n_hist: int = 5
    d_ctx: int = 64
    hidden: int = 64
    d_embed: int = 16
    chunk: int = 30
    vocab: int = 16
    proprio_dim: int = ACTION_DIM
    noise_proj: int = 16   # low-rank view of the noisy chunk fed to the MLP

    @property
    def vis_in(self) -> int:
        return (self.n_hist + 1) * self.visual_dim

    @property
    def prop_in(self) -> int:
        return (self.n_hist + 1) * self.proprio_dim

    @property
    def head_in(self) -> int:
        return 2 * self.d_ctx + self.d_embed

    @property
    def dec_in(self) -> int:
        return 2 * self.d_ctx + self.d_embed + self.noise_proj + 1

    @property
    def dec_out(self) -> int:
        return self.chunk * ACTION_DIM

    def to_dict(self) -> dict:
        return {
            "visual_dim": self.visual_dim, "n_hist": self.n_hist,
            "d_ctx": self.d_ctx, "hidden": self.hidden,
            "d_embed": self.d_embed, "chunk": self.chunk,
            "vocab": self.vocab, "proprio_dim": self.proprio_dim,
            "noise_proj": self.noise_proj,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelDims":
        return cls(**d)


class _MLP:
    """Shape bookkeeping for one flat 2-hidden-layer MLP segment."""

    def __init__(self, n_in: int, n_hidden: int, n_out: int):
        self.n_in, self.n_hidden, self.n_out = n_in, n_hidden, n_out
        h = n_hidden
        self.size = h * n_in + h + h * h + h + n_out * h + n_out

    def unpack(self, flat: np.ndarray):
        i, h, o = self.n_in, self.n_hidden, self.n_out
        p = 0
        w1 = flat[p:p + h * i].reshape(h, i); p += h * i
        b1 = flat[p:p + h]; p += h
        w2 = flat[p:p + h * h].reshape(h, h); p += h * h
        b2 = flat[p:p + h]; p += h
        w3 = flat[p:p + o * h].reshape(o, h); p += o * h
        b3 = flat[p:p + o]
        return w1, b1, w2, b2, w3, b3

    def init(self, rng: np.random.Generator) -> np.ndarray:
        i, h, o = self.n_in, self.n_hidden, self.n_out
        parts = [
            rng.normal(0.0, 1.0 / np.sqrt(i), size=h * i), np.zeros(h),
            rng.normal(0.0, 1.0 / np.sqrt(h), size=h * h), np.zeros(h),
            rng.normal(0.0, 1.0 / np.sqrt(h), size=o * h), np.zeros(o),
        ]
        return np.concatenate(parts)

    def forward(self, flat: np.ndarray, x: np.ndarray):
        w1, b1, w2, b2, w3, b3 = self.unpack(flat)
        h1 = np.tanh(x @ w1.T + b1)
        h2 = np.tanh(h1 @ w2.T + b2)
        y = h2 @ w3.T + b3
        return y, (x, h1, h2)

    def backward(self, flat: np.ndarray, grad_flat: np.ndarray, cache, dy):
        """Accumulates parameter grads into grad_flat; returns d(input)."""
        w1, _, w2, _, w3, _ = self.unpack(flat)
        gw1, gb1, gw2, gb2, gw3, gb3 = self.unpack(grad_flat)
        x, h1, h2 = cache
        gw3 += dy.T @ h2
        gb3 += dy.sum(axis=0)
        dz2 = (dy @ w3) * (1.0 - h2 * h2)
        gw2 += dz2.T @ h1
        gb2 += dz2.sum(axis=0)
        dz1 = (dz2 @ w2) * (1.0 - h1 * h1)
        gw1 += dz1.T @ x
        gb1 += dz1.sum(axis=0)
        return dz1 @ w1


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_SKIP_DEGREE = 5   # flow-time basis size of the noisy-chunk bypass


def _skip_basis(tau: np.ndarray) -> np.ndarray:
    """Flow-time features for the bypass gain: low-order polynomial terms
    plus one rational term matching the 1/(1 - tau) shape of the
    noise-cancelling component of the rectified-flow velocity."""
    tau = np.asarray(tau, dtype=float).reshape(-1, 1)
    return np.concatenate([
        np.ones_like(tau), tau, tau ** 2, tau ** 3,
        1.0 / (1.0 - 0.97 * tau),
    ], axis=1)


def _skip_gain_init() -> np.ndarray:
    """Least-squares fit of -1/(1 - tau) in the bypass basis.

    Starting from the exact noise-cancelling gain of the rectified-flow
    velocity leaves only the low-rank data term for gradient descent.
    """
    grid = np.linspace(0.0, 0.85, 128)
    phi = _skip_basis(grid)
    target = -1.0 / (1.0 - grid)
    coef, *_ = np.linalg.lstsq(phi, target, rcond=None)
    return coef


class PolicyNetwork:
    """Stateless forward/backward math over flat parameter vectors.

    The flow decoder combines four parts, all inside one segment:
      v = (1/(1-tau)) * (MLP(ctx, emb, N a_noisy, tau) + S prop_now)
          + (P phi(tau)) * a_noisy
    The noisy-chunk bypass P cancels the full-rank noise component of the
    velocity target (its gains start at the analytic fit of -1/(1-tau));
    the MLP sees the noisy chunk only through the low-rank projection N,
    which carries enough of the noise to select among behavior modes
    without letting it swamp the context features; the linear readout S
    of the newest proprioceptive frame starts as a tiled identity so the
    initial data term is "hold the current pose".  With every parameter
    zero the field is identically zero.
    """

    def __init__(self, dims: ModelDims):
        self.dims = dims
        self.blocks = {
            "visual_encoder": _MLP(dims.vis_in, dims.hidden, dims.d_ctx),
            "proprio_encoder": _MLP(dims.prop_in, dims.hidden, dims.d_ctx),
            "cognitive_head": _MLP(dims.head_in, dims.hidden, 1),
            "flow_decoder": _MLP(dims.dec_in, dims.hidden, dims.dec_out),
        }
        self.skip_size = dims.dec_out * _SKIP_DEGREE
        self.prop_skip_size = dims.dec_out * dims.proprio_dim
        self.noise_proj_size = dims.noise_proj * dims.dec_out
        self.embed_size = dims.vocab * dims.d_embed
        segments, offset = {}, 0
        for name in SEGMENT_NAMES:
            if name == "instruction_embedding":
                size = self.embed_size
            elif name == "flow_decoder":
                size = (self.blocks[name].size + self.skip_size
                        + self.prop_skip_size + self.noise_proj_size)
            else:
                size = self.blocks[name].size
            segments[name] = (offset, size)
            offset += size
        self.segments = segments
        self.n_params = offset

    # -- parameter handling -------------------------------------------------

    def init_params(self, rng: np.random.Generator) -> PolicyParams:
        vec = np.empty(self.n_params)
        for name, (start, size) in self.segments.items():
            if name == "instruction_embedding":
                vec[start:start + size] = rng.normal(0.0, 0.3, size=size)
            elif name == "flow_decoder":
                mlp = self.blocks[name]
                vec[start:start + mlp.size] = mlp.init(rng)
                lo = start + mlp.size
                vec[lo:lo + self.skip_size] = np.tile(
                    _skip_gain_init(), self.dims.dec_out)
                lo += self.skip_size
                hold = np.tile(np.eye(self.dims.proprio_dim),
                               (self.dims.chunk, 1))
                vec[lo:lo + self.prop_skip_size] = hold.reshape(-1)
                lo += self.prop_skip_size
                vec[lo:start + size] = rng.normal(
                    0.0, 1.0 / np.sqrt(self.dims.dec_out),
                    size=self.noise_proj_size)
            else:
                vec[start:start + size] = self.blocks[name].init(rng)
        return PolicyParams(vec, dict(self.segments), self.dims.to_dict())

    def zeros_params(self) -> PolicyParams:
        return PolicyParams(np.zeros(self.n_params), dict(self.segments),
                            self.dims.to_dict())

    def skip_slice(self) -> tuple:
        """(start, end) of the noise-bypass gains inside the flat vector."""
        start, _ = self.segments["flow_decoder"]
        lo = start + self.blocks["flow_decoder"].size
        return lo, lo + self.skip_size

    def wrap(self, vector: np.ndarray) -> PolicyParams:
        return PolicyParams(vector, dict(self.segments), self.dims.to_dict())

    def _seg(self, vector: np.ndarray, name: str) -> np.ndarray:
        start, size = self.segments[name]
        return vector[start:start + size]

    def embedding_table(self, vector: np.ndarray) -> np.ndarray:
        return self._seg(vector, "instruction_embedding").reshape(
            self.dims.vocab, self.dims.d_embed)

    # -- forward passes ------------------------------------------------------

    def encode(self, vector, vis, prop):
        """Dual-track contexts; each is a function of its own track only."""
        vis = np.atleast_2d(vis)
        prop = np.atleast_2d(prop)
        cv, cache_v = self.blocks["visual_encoder"].forward(
            self._seg(vector, "visual_encoder"), vis)
        cp, cache_p = self.blocks["proprio_encoder"].forward(
            self._seg(vector, "proprio_encoder"), prop)
        return cv, cp, (cache_v, cache_p)

    def score(self, vector, cv, cp, emb):
        x = np.concatenate([cv, cp, emb], axis=1)
        logits, cache = self.blocks["cognitive_head"].forward(
            self._seg(vector, "cognitive_head"), x)
        return _sigmoid(logits[:, 0]), logits[:, 0], cache

    def _flow_parts(self, vector):
        seg = self._seg(vector, "flow_decoder")
        mlp = self.blocks["flow_decoder"]
        lo = mlp.size
        skip = seg[lo:lo + self.skip_size].reshape(self.dims.dec_out, _SKIP_DEGREE)
        lo += self.skip_size
        hold = seg[lo:lo + self.prop_skip_size].reshape(
            self.dims.dec_out, self.dims.proprio_dim)
        lo += self.prop_skip_size
        nproj = seg[lo:].reshape(self.dims.noise_proj, self.dims.dec_out)
        return seg, mlp, skip, hold, nproj

    def velocity(self, vector, cv, cp, emb, noisy, tau, prop_now=None):
        noisy = np.atleast_2d(noisy)
        tau = np.asarray(tau, dtype=float).reshape(-1, 1)
        if prop_now is None:
            prop_now = np.zeros((noisy.shape[0], self.dims.proprio_dim))
        prop_now = np.atleast_2d(prop_now)
        seg, mlp, skip, hold, nproj = self._flow_parts(vector)
        z = noisy @ nproj.T                           # (B, noise_proj)
        x = np.concatenate([cv, cp, emb, z, tau], axis=1)
        y, mlp_cache = mlp.forward(seg[:mlp.size], x)
        phi = _skip_basis(tau)                        # (B, degree)
        gains = phi @ skip.T                          # (B, dec_out)
        # Fixed 1/(1 - tau) output scaling: with the bypass at its analytic
        # gains, the data term's optimal output is the chunk itself, O(1).
        scale = 1.0 / np.maximum(1.0 - tau, 0.15)     # (B, 1)
        v = scale * (y + prop_now @ hold.T) + gains * noisy
        return v, (mlp_cache, noisy, phi, scale, prop_now)

    # -- loss + gradient -----------------------------------------------------

    def loss_only(self, vector, batch, cfg, mode: str) -> float:
        """Forward-only loss (used by the finite-difference oracle)."""
        vis, prop = batch["vis"], batch["prop"]
        ids = np.asarray(batch["instr"], dtype=int)
        labels = np.asarray(batch["label"], dtype=int)
        cv, cp, _ = self.encode(vector, vis, prop)
        emb = self.embedding_table(vector)[ids]
        p, _, _ = self.score(vector, cv, cp, emb)
        fl = np.array([focal_loss(pi, yi, cfg.alpha_t, cfg.gamma)
                       for pi, yi in zip(p, labels)])
        if mode == "focal":
            return float(fl.mean())
        weights = component_weight_vector(
            self.dims.chunk,
            {k: getattr(cfg, f"lambda_{k}") for k in
             ("vr", "vp", "er", "ep", "g")})
        v, _ = self.velocity(vector, cv, cp, emb, batch["noisy"], batch["tau"],
                             prop_now=batch["prop"][:, :self.dims.proprio_dim])
        err = v - batch["target_v"]
        action_terms = (weights * err * err).sum(axis=1)
        return float((action_terms + cfg.lambda_t * fl).mean())

    def loss_and_grad(self, vector, batch, cfg, mode: str):
        """Mean per-sample loss over the batch and its full gradient.

        `mode` is "focal" (cognition only) or "joint" (action + cognition).
        The batch dict carries vis/prop windows, instruction ids, labels,
        and for joint mode the noisy chunks, flow times, and velocity
        targets, each stacked along the batch axis.
        """
        dims = self.dims
        vis, prop = batch["vis"], batch["prop"]
        ids = np.asarray(batch["instr"], dtype=int)
        labels = np.asarray(batch["label"], dtype=int)
        n = vis.shape[0]
        grad = np.zeros_like(vector)

        cv, cp, (cache_v, cache_p) = self.encode(vector, vis, prop)
        table = self.embedding_table(vector)
        emb = table[ids]

        p, logits, cache_c = self.score(vector, cv, cp, emb)
        fl = np.array([focal_loss(pi, yi, cfg.alpha_t, cfg.gamma)
                       for pi, yi in zip(p, labels)])
        d_p = focal_loss_grad(p, labels, cfg.alpha_t, cfg.gamma)
        d_logit = d_p * p * (1.0 - p)

        d_cv = np.zeros_like(cv)
        d_cp = np.zeros_like(cp)
        d_emb = np.zeros_like(emb)
        parts = {}

        if mode == "focal":
            loss = float(fl.mean())
            d_logit = d_logit / n
            parts["focal"] = loss
        elif mode == "joint":
            noisy, tau = batch["noisy"], batch["tau"]
            target_v = batch["target_v"]
            if target_v.shape != (n, dims.dec_out):
                raise ShapeMismatch(f"target velocities {target_v.shape}")
            weights = component_weight_vector(
                dims.chunk,
                {k: getattr(cfg, f"lambda_{k}") for k in
                 ("vr", "vp", "er", "ep", "g")})
            prop_now = batch["prop"][:, :dims.proprio_dim]
            v, cache_d = self.velocity(vector, cv, cp, emb, noisy, tau,
                                       prop_now=prop_now)
            err = v - target_v
            action_terms = (weights * err * err).sum(axis=1)
            loss = float((action_terms + cfg.lambda_t * fl).mean())
            parts["action"] = float(action_terms.mean())
            parts["focal"] = float(fl.mean())
            d_v = 2.0 * weights * err / n
            mlp_cache, noisy_in, phi, scale, prop_in = cache_d
            seg, mlp, _, _, nproj = self._flow_parts(vector)
            gseg = self._seg(grad, "flow_decoder")
            lo = mlp.size
            gskip = gseg[lo:lo + self.skip_size].reshape(
                self.dims.dec_out, _SKIP_DEGREE)
            gskip += (d_v * noisy_in).T @ phi
            lo += self.skip_size
            ghold = gseg[lo:lo + self.prop_skip_size].reshape(
                self.dims.dec_out, self.dims.proprio_dim)
            ghold += (d_v * scale).T @ prop_in
            lo += self.prop_skip_size
            gproj = gseg[lo:].reshape(self.dims.noise_proj, self.dims.dec_out)
            d_x = mlp.backward(seg[:mlp.size], gseg[:mlp.size],
                               mlp_cache, d_v * scale)
            zlo = 2 * dims.d_ctx + dims.d_embed
            gproj += d_x[:, zlo:zlo + dims.noise_proj].T @ noisy_in
            c = dims.d_ctx
            d_cv += d_x[:, :c]
            d_cp += d_x[:, c:2 * c]
            d_emb += d_x[:, 2 * c:2 * c + dims.d_embed]
            d_logit = cfg.lambda_t * d_logit / n
        else:
            raise ValueError(f"unknown loss mode {mode!r}")

        d_xc = self.blocks["cognitive_head"].backward(
            self._seg(vector, "cognitive_head"),
            self._seg(grad, "cognitive_head"), cache_c, d_logit[:, None])
        c = dims.d_ctx
        d_cv += d_xc[:, :c]
        d_cp += d_xc[:, c:2 * c]
        d_emb += d_xc[:, 2 * c:2 * c + dims.d_embed]

        self.blocks["visual_encoder"].backward(
            self._seg(vector, "visual_encoder"),
            self._seg(grad, "visual_encoder"), cache_v, d_cv)
        self.blocks["proprio_encoder"].backward(
            self._seg(vector, "proprio_encoder"),
            self._seg(grad, "proprio_encoder"), cache_p, d_cp)
        g_table = self._seg(grad, "instruction_embedding").reshape(
            dims.vocab, dims.d_embed)
        np.add.at(g_table, ids, d_emb)
        return loss, grad, parts


def euler_sample(velocity_fn, size: int, n_steps: int,
                 rng: np.random.Generator, init: np.ndarray | None = None):
    """Integrate a velocity field from unit-variance noise.

    a <- a + (1/n) * v(a, k/n) for k = 0..n-1.  `velocity_fn` maps a flat
    action array and a flow time to a velocity of the same shape.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    a = rng.standard_normal(size) if init is None else np.array(init, dtype=float)
    for k in range(n_steps):
        a = a + velocity_fn(a, k / n_steps) / n_steps
    return a
