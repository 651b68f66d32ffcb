"""High-level policy object over the flat-parameter network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataspace import ACTION_DIM, ActionChunk, MemoryWindow, normalize_action
from .features import InstructionVocab, featurize_window
from .network import ModelDims, PolicyNetwork, euler_sample
from .params import PolicyParams, load_checkpoint, save_checkpoint


@dataclass
class DualContext:
    visual: np.ndarray
    proprio: np.ndarray
    prop_now: np.ndarray | None = None   # newest proprioceptive frame (29,)


class CognitiveFlowPolicy:
    """Dual-track memory encoders, cognitive head, and flow action decoder.

    Holds the parameter vector and instruction vocabulary; exposes
    fit/predict-shaped entry points (`fit` delegates to the stage trainer,
    `predict_chunk` samples an action chunk for a memory window).
    """

    def __init__(self, dims: ModelDims | None = None,
                 vocab: InstructionVocab | None = None,
                 params: PolicyParams | None = None, seed: int = 0):
        self.vocab = vocab or InstructionVocab()
        self.dims = dims or ModelDims(vocab=len(self.vocab))
        if self.dims.vocab != len(self.vocab):
            raise ValueError("dims.vocab must match the vocabulary size")
        self.network = PolicyNetwork(self.dims)
        self.params = params if params is not None else \
            self.network.init_params(np.random.default_rng(seed))

    # -- sklearn-style surface ----------------------------------------------

    def get_params(self) -> dict:
        return {"dims": self.dims.to_dict(), "vector": self.params.vector.copy()}

    def set_params(self, vector: np.ndarray) -> "CognitiveFlowPolicy":
        if vector.shape != self.params.vector.shape:
            raise ValueError("parameter vector shape mismatch")
        self.params = self.network.wrap(np.asarray(vector, dtype=float).copy())
        return self

    def fit(self, data, stage_cfg, log_path=None) -> "CognitiveFlowPolicy":
        from .training import train_stage
        self.params = train_stage(stage_cfg.stage, data, stage_cfg,
                                  self.network, self.params, log_path=log_path)
        return self

    # -- spec operations ------------------------------------------------------

    def encode_context(self, window: MemoryWindow, percept_lists) -> DualContext:
        vis, prop = featurize_window(percept_lists, window.proprio)
        return self.context_from_features(vis, prop)

    def context_from_features(self, vis, prop) -> DualContext:
        cv, cp, _ = self.network.encode(self.params.vector, vis, prop)
        prop_now = np.asarray(prop, dtype=float).reshape(-1)[
            :self.dims.proprio_dim].copy()
        return DualContext(visual=cv[0], proprio=cp[0], prop_now=prop_now)

    def cognitive_score(self, context: DualContext, instruction: str) -> float:
        emb = self._embedding(instruction)
        p, _, _ = self.network.score(
            self.params.vector, context.visual[None], context.proprio[None],
            emb[None])
        return float(p[0])

    def flow_velocity(self, noisy_chunk, tau: float, context: DualContext,
                      instruction: str) -> np.ndarray:
        emb = self._embedding(instruction)
        flat = np.asarray(noisy_chunk, dtype=float).reshape(1, -1)
        prop_now = None if context.prop_now is None else context.prop_now[None]
        v, _ = self.network.velocity(
            self.params.vector, context.visual[None], context.proprio[None],
            emb[None], flat, np.array([tau]), prop_now=prop_now)
        return v[0].reshape(self.dims.chunk, ACTION_DIM)

    def sample_chunk(self, context: DualContext, instruction: str,
                     rng: np.random.Generator, n_steps: int = 5,
                     frame_rate_hz: float = 30.0,
                     normalize: bool = True) -> ActionChunk:
        def field(a_flat, tau):
            return self.flow_velocity(a_flat.reshape(self.dims.chunk, ACTION_DIM),
                                      tau, context, instruction).reshape(-1)

        flat = euler_sample(field, self.dims.chunk * ACTION_DIM, n_steps, rng)
        rows = flat.reshape(self.dims.chunk, ACTION_DIM)
        if normalize:
            rows = np.stack([normalize_action(r) for r in rows])
        return ActionChunk(rows, frame_rate_hz)

    # -- persistence -----------------------------------------------------------

    def save(self, path, extra: dict | None = None) -> str:
        extra = dict(extra or {})
        extra["vocab"] = self.vocab.texts[1:]
        return save_checkpoint(self.params, path, extra=extra)

    @classmethod
    def load(cls, path) -> "CognitiveFlowPolicy":
        params = load_checkpoint(path)
        dims = ModelDims.from_dict(params.dims)
        import json as _json  # header re-read for the vocabulary
        with open(path, "rb") as fh:
            fh.readline()
            import struct as _struct
            (hlen,) = _struct.unpack("<I", fh.read(4))
            header = _json.loads(fh.read(hlen).decode("utf-8"))
        texts = header.get("extra", {}).get("vocab")
        vocab = InstructionVocab(texts) if texts is not None else InstructionVocab()
        return cls(dims=dims, vocab=vocab, params=params)

    def _embedding(self, instruction: str) -> np.ndarray:
        table = self.network.embedding_table(self.params.vector)
        return table[self.vocab.index(instruction)]


class LearnedPolicyDriver:
    """Adapter running a trained policy inside the deployment loop."""

    def __init__(self, policy: CognitiveFlowPolicy, cfg,
                 monolithic_text: str | None = None):
        self.policy = policy
        self.cfg = cfg
        self.monolithic_text = monolithic_text
        self.n_hist = policy.dims.n_hist   # executor sizes windows from this
        self._rng = None
        self._frame_rate = 1.0 / cfg.runtime.control_period_s

    def begin_episode(self, scenario, base, rng):
        self._rng = rng

    def plan(self, plan_input) -> tuple[np.ndarray, float]:
        vis, prop = featurize_window(plan_input["window_percepts"],
                                     plan_input["window_proprio"])
        context = self.policy.context_from_features(vis, prop)
        instruction = (self.monolithic_text if self.monolithic_text is not None
                       else plan_input["instruction"])
        score = self.policy.cognitive_score(context, instruction)
        chunk = self.policy.sample_chunk(
            context, instruction, self._rng,
            n_steps=self.cfg.runtime.denoise_steps,
            frame_rate_hz=self._frame_rate)
        return chunk.actions, score
