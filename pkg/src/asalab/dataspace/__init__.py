"""Canonical 29-D egocentric action space and the demonstration record."""

from .actions import (
    ACTION_DIM,
    COMPONENT_INDICES,
    GRIP_LEFT,
    GRIP_RIGHT,
    LEFT_POS,
    LEFT_ROT,
    RIGHT_POS,
    RIGHT_ROT,
    VIEW_POS,
    VIEW_ROT,
    ActionChunk,
    action_from_poses,
    normalize_action,
    poses_from_action,
    validate_action,
)
from .episode import (
    Episode,
    MemoryWindow,
    Percept,
    TrajectorySample,
    annotate_cognition,
    extract_chunk,
    hand_aperture,
    normalize_gripper,
    sample_memory_window,
)
from .io import (
    SCHEMA_VERSION,
    read_episode,
    validate_episode_file,
    write_episode,
)

__all__ = [
    "ACTION_DIM", "COMPONENT_INDICES", "GRIP_LEFT", "GRIP_RIGHT",
    "LEFT_POS", "LEFT_ROT", "RIGHT_POS", "RIGHT_ROT", "VIEW_POS", "VIEW_ROT",
    "ActionChunk", "action_from_poses", "normalize_action", "poses_from_action",
    "validate_action", "Episode", "MemoryWindow", "Percept", "TrajectorySample",
    "annotate_cognition", "extract_chunk", "hand_aperture", "normalize_gripper",
    "sample_memory_window", "SCHEMA_VERSION", "read_episode",
    "validate_episode_file", "write_episode",
]
