"""Stage-wise training on featurized demonstration windows.

Stage 1 updates only the visual encoder, instruction embedding, and
cognitive head on human-analog data with the focal loss; stage 2 unfreezes
everything and adds the action-velocity loss; stage 3 repeats stage 2 on
robot-analog data.  Flow-matching targets follow the linear noise-to-data
path: a_tau = (1 - tau) a0 + tau a1 with velocity target a1 - a0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ..dataspace import ACTION_DIM
from ..errors import EmptyDataset, WrongSourceTag
from .features import InstructionVocab, featurize_percepts, viewpoint_pose
from .network import ModelDims, PolicyNetwork
from .params import PolicyParams

STAGE_SOURCES = {1: "human-analog", 2: "human-analog", 3: "robot-analog"}
STAGE_TRAINABLE = {
    1: ("visual_encoder", "cognitive_head", "instruction_embedding"),
    2: ("visual_encoder", "proprio_encoder", "cognitive_head",
        "flow_decoder", "instruction_embedding"),
    3: ("visual_encoder", "proprio_encoder", "cognitive_head",
        "flow_decoder", "instruction_embedding"),
}


@dataclass
class TrainingData:
    vis: np.ndarray           # (N, (n_hist+1) * visual_dim) float32
    prop: np.ndarray          # (N, (n_hist+1) * 29) float32
    instr: np.ndarray         # (N,) int32
    label: np.ndarray         # (N,) int8
    chunk_target: np.ndarray  # (N, K * 29) float32
    source: str
    n_episodes: int

    def __len__(self) -> int:
        return self.vis.shape[0]


def episode_windows(episode, dims: ModelDims, vocab: InstructionVocab,
                    stride: int | None = None, interval_s: float = 1.0,
                    clamp_at_subtask: bool = True,
                    monolithic_text: str | None = None):
    """Yield (vis, prop, instr_id, label, chunk_target) rows for one episode.

    History windows clamp at sub-task starts to match deployment-time
    memory clearance, unless `clamp_at_subtask` is off (monolithic runs).
    """
    samples = episode.samples
    n = len(samples)
    if n == 0:
        return
    act = episode.action_matrix().astype(np.float64)
    vis_rows = np.stack([
        featurize_percepts(s.percepts, head_pose=viewpoint_pose(act[i]))
        for i, s in enumerate(samples)
    ])
    subtask = np.array([s.subtask_id for s in samples])
    labels = np.array([s.cognition for s in samples])
    floors = np.zeros(n, dtype=int)
    if clamp_at_subtask:
        start = 0
        for k in range(1, n):
            if subtask[k] != subtask[k - 1]:
                start = k
            floors[k] = start
    r = max(1, int(round(interval_s * episode.frame_rate_hz)))
    k_chunk = dims.chunk
    if stride is None:
        stride = max(1, int(round(episode.frame_rate_hz * 0.3)))
    for t in range(0, n, stride):
        idxs = [max(int(floors[t]), t - j * r) for j in range(dims.n_hist + 1)]
        vis = vis_rows[idxs].reshape(-1)
        prop = act[idxs].reshape(-1)
        rows = [act[min(t + j, n - 1)] for j in range(1, k_chunk + 1)]
        chunk = np.concatenate(rows)
        if monolithic_text is not None:
            instr_id = vocab.index(monolithic_text)
        else:
            text = episode.instructions[int(subtask[t])] \
                if subtask[t] < len(episode.instructions) else ""
            instr_id = vocab.index(text)
        yield vis, prop, instr_id, int(labels[t]), chunk


def build_training_data(episodes, dims: ModelDims, vocab: InstructionVocab,
                        stride: int | None = None,
                        clamp_at_subtask: bool = True,
                        monolithic_text_fn=None,
                        motion_boost: int = 1,
                        motion_threshold_m: float = 0.08) -> TrainingData:
    """Featurize episodes into training windows.

    `motion_boost` > 1 duplicates windows whose target chunk moves any
    positional block by more than `motion_threshold_m`; holds and dwells
    dominate demonstrations, and without re-balancing the decoder regresses
    motion onsets toward hold.
    """
    vis_l, prop_l, instr_l, label_l, chunk_l = [], [], [], [], []
    sources = set()
    n_eps = 0
    for ep in episodes:
        n_eps += 1
        sources.update(s.source for s in ep.samples)
        mono = monolithic_text_fn(ep) if monolithic_text_fn else None
        for vis, prop, instr, label, chunk in episode_windows(
                ep, dims, vocab, stride=stride,
                clamp_at_subtask=clamp_at_subtask, monolithic_text=mono):
            vis_l.append(vis.astype(np.float32))
            prop_l.append(prop.astype(np.float32))
            instr_l.append(instr)
            label_l.append(label)
            chunk_l.append(chunk.astype(np.float32))
    if not vis_l:
        raise EmptyDataset("no training windows produced")
    if len(sources) != 1:
        raise WrongSourceTag(f"mixed source tags {sorted(sources)}")
    data = TrainingData(
        vis=np.stack(vis_l), prop=np.stack(prop_l),
        instr=np.asarray(instr_l, dtype=np.int32),
        label=np.asarray(label_l, dtype=np.int8),
        chunk_target=np.stack(chunk_l),
        source=sources.pop(), n_episodes=n_eps)
    if motion_boost > 1:
        # positional blocks plus the viewpoint rotation: head scans move
        # almost no position coordinate but must be re-balanced too
        track = [c for s in (slice(0, 3), slice(3, 9), slice(9, 12),
                             slice(18, 21)) for c in range(s.start, s.stop)]
        rows = data.chunk_target.reshape(len(data), dims.chunk, ACTION_DIM)
        motion = np.abs(rows[:, :, track]
                        - data.prop[:, None, track]).max(axis=(1, 2))
        moving = np.where(motion > motion_threshold_m)[0]
        idx = np.concatenate([np.arange(len(data))]
                             + [moving] * (motion_boost - 1))
        data = TrainingData(data.vis[idx], data.prop[idx], data.instr[idx],
                            data.label[idx], data.chunk_target[idx],
                            data.source, data.n_episodes)
    return data


def _epoch_lr(cfg, epoch: int) -> float:
    if cfg.lr_schedule == "cosine":
        return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * epoch / max(1, cfg.epochs)))
    return cfg.lr


def train_stage(stage: int, data: TrainingData, cfg, network: PolicyNetwork,
                params: PolicyParams, log_path=None) -> PolicyParams:
    """Run one training stage; frozen segments are left bitwise untouched."""
    if len(data) == 0:
        raise EmptyDataset("empty training data")
    expected = STAGE_SOURCES[stage]
    if data.source != expected:
        raise WrongSourceTag(
            f"stage {stage} expects {expected} data, got {data.source}")
    mode = "focal" if stage == 1 else "joint"
    mask = params.segment_mask(STAGE_TRAINABLE[stage])
    # The noisy-chunk bypass stays at its analytic initialization: its
    # gradient direction is noise-dominated and drifting it reintroduces
    # residual sampling noise.
    skip_lo, skip_hi = network.skip_slice()
    mask[skip_lo:skip_hi] = False
    rng = np.random.default_rng(cfg.seed)
    vec = params.vector.copy()
    n = len(data)
    k29 = network.dims.chunk * ACTION_DIM
    use_adam = getattr(cfg, "optimizer", "sgd") == "adam"
    if use_adam:
        m1 = np.zeros_like(vec)
        m2 = np.zeros_like(vec)
        b1, b2, eps_opt, t_opt = 0.9, 0.999, 1e-8, 0
    log_rows = []
    for epoch in range(cfg.epochs):
        lr = _epoch_lr(cfg, epoch)
        order = rng.permutation(n)
        epoch_loss, epoch_action, epoch_focal, batches = 0.0, 0.0, 0.0, 0
        for lo in range(0, n, cfg.batch_size):
            sel = order[lo:lo + cfg.batch_size]
            batch = {
                "vis": data.vis[sel].astype(np.float64),
                "prop": data.prop[sel].astype(np.float64),
                "instr": data.instr[sel],
                "label": data.label[sel],
            }
            if mode == "joint":
                target = data.chunk_target[sel].astype(np.float64)
                tau = rng.random(len(sel)) * getattr(cfg, "tau_max", 1.0)
                noise = rng.standard_normal((len(sel), k29))
                batch["noisy"] = (1.0 - tau)[:, None] * noise + tau[:, None] * target
                batch["tau"] = tau
                batch["target_v"] = target - noise
            loss, grad, parts = network.loss_and_grad(vec, batch, cfg, mode)
            if use_adam:
                t_opt += 1
                m1 = b1 * m1 + (1 - b1) * grad
                m2 = b2 * m2 + (1 - b2) * grad * grad
                step = (m1 / (1 - b1 ** t_opt)) / (
                    np.sqrt(m2 / (1 - b2 ** t_opt)) + eps_opt)
                vec[mask] -= lr * step[mask]
            else:
                vec[mask] -= lr * grad[mask]
            epoch_loss += loss
            epoch_action += parts.get("action", 0.0)
            epoch_focal += parts.get("focal", 0.0)
            batches += 1
        log_rows.append({
            "epoch": epoch, "stage": stage, "lr": lr,
            "loss": epoch_loss / batches,
            "action_loss": epoch_action / batches,
            "focal_loss": epoch_focal / batches,
        })
    if log_path is not None:
        _append_log(log_path, log_rows)
    return network.wrap(vec)


def three_stage_train(network: PolicyNetwork, params: PolicyParams,
                      datasets: dict, configs: dict,
                      log_path=None) -> PolicyParams:
    """Run the stages present in `datasets` in ascending order."""
    for stage in sorted(datasets):
        params = train_stage(stage, datasets[stage], configs[stage],
                             network, params, log_path=log_path)
    return params


def _append_log(path, rows):
    if not rows:
        return
    import os
    exists = os.path.exists(path)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        if not exists:
            writer.writeheader()
        writer.writerows(rows)
