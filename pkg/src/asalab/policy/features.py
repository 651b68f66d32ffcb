"""Structured-percept featurization and the instruction vocabulary.

Visual features are per-kind aggregates of the head-relative percepts:
presence, bearing, elevation, scaled distance, quality, open fraction, and
(when the viewing pose is available) the nearest percept re-expressed in
the episode base frame, for each of the six entity kinds in a fixed order.
The base-frame coordinates come from the window's own viewpoint pose, so
they carry no information beyond the percept stream plus proprioception.
"""

from __future__ import annotations

import math

import numpy as np

from ..dataspace.actions import VIEW_POS, VIEW_ROT
from ..geometry import Pose, rot6d_decode
from ..world.entities import ENTITY_KINDS
from ..world.scenarios import all_instruction_texts

_FEATS_PER_KIND = 9
PERCEPT_FEATURE_DIM = len(ENTITY_KINDS) * _FEATS_PER_KIND
_DIST_SCALE = 1.5


def featurize_percepts(percepts, head_pose: Pose | None = None) -> np.ndarray:
    """Fixed-width feature vector for one frame's percept list."""
    out = np.zeros(PERCEPT_FEATURE_DIM)
    for k, kind in enumerate(ENTITY_KINDS):
        of_kind = [p for p in percepts if p.kind == kind]
        base = k * _FEATS_PER_KIND
        if not of_kind:
            continue
        nearest = min(of_kind, key=lambda p: float(np.linalg.norm(p.position)))
        x, y, z = (float(v) for v in nearest.position)
        horiz = math.hypot(x, y)
        d = math.sqrt(x * x + y * y + z * z)
        out[base + 0] = 1.0
        out[base + 1] = math.atan2(y, x)
        out[base + 2] = math.atan2(z, horiz) if horiz > 1e-9 else 0.0
        out[base + 3] = min(d, 3.0) / _DIST_SCALE
        out[base + 4] = nearest.quality
        opens = [p.open_flag for p in of_kind if p.open_flag is not None]
        out[base + 5] = float(np.mean(opens)) if opens else 0.0
        if head_pose is not None:
            out[base + 6:base + 9] = head_pose.transform_point(nearest.position)
    return out


def viewpoint_pose(proprio_row) -> Pose:
    row = np.asarray(proprio_row, dtype=float)
    return Pose(rot6d_decode(row[VIEW_ROT]), row[VIEW_POS].copy())


def featurize_window(percept_lists, proprio_rows) -> tuple[np.ndarray, np.ndarray]:
    """Flatten a memory window into the two encoder track inputs.

    `percept_lists` and `proprio_rows` are ordered newest first, matching
    the memory window layout; each frame's base-frame percept coordinates
    use that frame's own viewpoint pose.
    """
    prop = np.asarray(proprio_rows, dtype=float)
    vis = np.concatenate([
        featurize_percepts(ps, head_pose=viewpoint_pose(prop[i]))
        for i, ps in enumerate(percept_lists)
    ])
    return vis, prop.reshape(-1)


class InstructionVocab:
    """Stable instruction-text -> embedding-row mapping; row 0 is unknown."""

    def __init__(self, texts=None):
        self.texts = ["<unknown>"] + list(texts if texts is not None
                                          else all_instruction_texts())
        self._index = {t: i for i, t in enumerate(self.texts)}

    def __len__(self) -> int:
        return len(self.texts)

    def index(self, text: str) -> int:
        return self._index.get(text, 0)
