"""The unified 29-D action vector and K-step action chunks.

Layout (column order): viewpoint position (3) + viewpoint 6D rotation (6) +
left effector position (3) + left 6D rotation (6) + right effector position
(3) + right 6D rotation (6) + left gripper (1) + right gripper (1).
Positions in meters, grippers normalized to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from ..geometry import Pose, Rotation, rot6d_decode, rot6d_encode

ACTION_DIM = 29
VIEW_POS = slice(0, 3)
VIEW_ROT = slice(3, 9)
LEFT_POS = slice(9, 12)
LEFT_ROT = slice(12, 18)
RIGHT_POS = slice(18, 21)
RIGHT_ROT = slice(21, 27)
GRIP_LEFT = 27
GRIP_RIGHT = 28

POSITION_BLOCKS = (VIEW_POS, LEFT_POS, RIGHT_POS)
ROTATION_BLOCKS = (VIEW_ROT, LEFT_ROT, RIGHT_ROT)

# Loss-component partition over the 29 coordinates.
COMPONENT_INDICES = {
    "vp": list(range(0, 3)),
    "vr": list(range(3, 9)),
    "ep": list(range(9, 12)) + list(range(18, 21)),
    "er": list(range(12, 18)) + list(range(21, 27)),
    "g": [GRIP_LEFT, GRIP_RIGHT],
}


def action_from_poses(head: Pose, left: Pose, right: Pose,
                      grip_left: float, grip_right: float) -> np.ndarray:
    a = np.empty(ACTION_DIM)
    a[VIEW_POS] = head.translation
    a[VIEW_ROT] = rot6d_encode(head.rotation)
    a[LEFT_POS] = left.translation
    a[LEFT_ROT] = rot6d_encode(left.rotation)
    a[RIGHT_POS] = right.translation
    a[RIGHT_ROT] = rot6d_encode(right.rotation)
    a[GRIP_LEFT] = grip_left
    a[GRIP_RIGHT] = grip_right
    return a


def poses_from_action(a) -> tuple[Pose, Pose, Pose, float, float]:
    a = np.asarray(a, dtype=float)
    if a.shape != (ACTION_DIM,):
        raise ShapeMismatch(f"expected ({ACTION_DIM},), got {a.shape}")
    head = Pose(rot6d_decode(a[VIEW_ROT]), a[VIEW_POS].copy())
    left = Pose(rot6d_decode(a[LEFT_ROT]), a[LEFT_POS].copy())
    right = Pose(rot6d_decode(a[RIGHT_ROT]), a[RIGHT_POS].copy())
    return head, left, right, float(a[GRIP_LEFT]), float(a[GRIP_RIGHT])


def validate_action(a, tol: float = 1e-6) -> bool:
    """True iff both rotation blocks decode and grippers are in [0, 1]."""
    a = np.asarray(a, dtype=float)
    if a.shape != (ACTION_DIM,) or not np.all(np.isfinite(a)):
        return False
    try:
        for block in ROTATION_BLOCKS:
            rot6d_decode(a[block])
    except Exception:
        return False
    return bool(-tol <= a[GRIP_LEFT] <= 1 + tol and -tol <= a[GRIP_RIGHT] <= 1 + tol)


def normalize_action(a) -> np.ndarray:
    """Re-orthonormalize the 6D blocks and clamp grippers into range."""
    a = np.array(a, dtype=float)
    for block in ROTATION_BLOCKS:
        a[block] = rot6d_encode(rot6d_decode(a[block]))
    a[GRIP_LEFT] = min(1.0, max(0.0, a[GRIP_LEFT]))
    a[GRIP_RIGHT] = min(1.0, max(0.0, a[GRIP_RIGHT]))
    return a


@dataclass
class ActionChunk:
    """K future action vectors at the source frame rate."""

    actions: np.ndarray          # (K, 29)
    frame_rate_hz: float

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=float)
        if self.actions.ndim != 2 or self.actions.shape[1] != ACTION_DIM:
            raise ShapeMismatch(f"chunk must be (K, {ACTION_DIM})")
        if self.actions.shape[0] < 1:
            raise ShapeMismatch("chunk needs K >= 1 rows")

    @property
    def size(self) -> int:
        return self.actions.shape[0]

    def is_valid(self) -> bool:
        return all(validate_action(row) for row in self.actions)
