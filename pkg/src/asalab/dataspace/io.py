"""Episode persistence: JSON Lines, one header then one object per sample.

Floats are serialized with 17 significant digits so a write/read round trip
is lossless.  Files are written atomically (temp file + rename).  A
trailing "result" record may follow the samples; the runtime uses it for
per-episode outcome data.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from ..errors import SchemaViolation, VersionMismatch
from ..geometry import Pose, Rotation
from .episode import Episode, Percept, TrajectorySample, SOURCE_TAGS

SCHEMA_VERSION = "asa-episode/1"

_SAMPLE_FIELDS = {"record", "frame", "t", "head", "left", "right",
                  "grip_l", "grip_r", "obs_ref", "percepts", "source",
                  "subtask", "cog"}


def _fmt(value) -> str:
    if isinstance(value, float) or isinstance(value, np.floating):
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError("non-finite float in episode record")
        return format(float(value), ".17g")
    if isinstance(value, (bool, type(None))):
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    if isinstance(value, dict):
        items = (f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in value.items())
        return "{" + ", ".join(items) + "}"
    raise TypeError(f"cannot serialize {type(value)!r}")


def _pose_to_obj(p: Pose) -> dict:
    return {"r": [float(v) for v in p.rotation.matrix.reshape(9)],
            "p": [float(v) for v in p.translation]}


def _pose_from_obj(obj, line: int) -> Pose:
    try:
        m = np.asarray(obj["r"], dtype=float).reshape(3, 3)
        t = np.asarray(obj["p"], dtype=float)
        return Pose(Rotation(m), t)
    except Exception as exc:
        raise SchemaViolation(f"bad pose object ({exc})", line=line)


def _sample_to_line(s: TrajectorySample) -> str:
    return _fmt({
        "record": "sample",
        "frame": s.frame,
        "t": s.timestamp,
        "head": _pose_to_obj(s.head),
        "left": _pose_to_obj(s.left),
        "right": _pose_to_obj(s.right),
        "grip_l": s.grip_left,
        "grip_r": s.grip_right,
        "obs_ref": s.obs_ref,
        "percepts": [p.to_dict() for p in s.percepts],
        "source": s.source,
        "subtask": s.subtask_id,
        "cog": s.cognition,
    })


def write_episode(episode: Episode, path, result: dict | None = None) -> str:
    """Write atomically; returns the final path."""
    episode.validate()
    header = {
        "record": "header",
        "schema": SCHEMA_VERSION,
        "episode_id": episode.episode_id,
        "frame_rate_hz": episode.frame_rate_hz,
        "task_kind": episode.task_kind,
        "embodiment": episode.embodiment,
        "instructions": list(episode.instructions),
        "n_frames": len(episode.samples),
    }
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(_fmt(header) + "\n")
            for s in episode.samples:
                fh.write(_sample_to_line(s) + "\n")
            if result is not None:
                fh.write(_fmt({"record": "result", **result}) + "\n")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def _parse_header(obj: dict, line: int) -> dict:
    if obj.get("record") != "header":
        raise SchemaViolation("first line must be the header record", line=line)
    version = obj.get("schema")
    if version is None:
        raise SchemaViolation("header missing 'schema'", line=line)
    if version != SCHEMA_VERSION:
        raise VersionMismatch(f"expected {SCHEMA_VERSION}, got {version}")
    for key in ("episode_id", "frame_rate_hz", "task_kind", "embodiment",
                "instructions", "n_frames"):
        if key not in obj:
            raise SchemaViolation(f"header missing {key!r}", line=line)
    return obj


def _parse_sample(obj: dict, line: int) -> TrajectorySample:
    missing = _SAMPLE_FIELDS - set(obj)
    if missing:
        raise SchemaViolation(f"sample missing fields {sorted(missing)}", line=line)
    if obj["source"] not in SOURCE_TAGS:
        raise SchemaViolation(f"unknown source tag {obj['source']!r}", line=line)
    return TrajectorySample(
        frame=int(obj["frame"]),
        timestamp=float(obj["t"]),
        head=_pose_from_obj(obj["head"], line),
        left=_pose_from_obj(obj["left"], line),
        right=_pose_from_obj(obj["right"], line),
        grip_left=float(obj["grip_l"]),
        grip_right=float(obj["grip_r"]),
        obs_ref=str(obj["obs_ref"]),
        percepts=[Percept.from_dict(p) for p in obj["percepts"]],
        source=obj["source"],
        subtask_id=int(obj["subtask"]),
        cognition=int(obj["cog"]),
    )


def read_episode(path) -> tuple[Episode, dict | None]:
    """Parse an episode file; returns (episode, result-record-or-None)."""
    samples = []
    header = None
    result = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"invalid JSON ({exc.msg})", line=lineno)
            if header is None:
                header = _parse_header(obj, lineno)
                continue
            kind = obj.get("record")
            if kind == "sample":
                if result is not None:
                    raise SchemaViolation("sample after result record", line=lineno)
                samples.append(_parse_sample(obj, lineno))
            elif kind == "result":
                result = {k: v for k, v in obj.items() if k != "record"}
            else:
                raise SchemaViolation(f"unknown record type {kind!r}", line=lineno)
    if header is None:
        raise SchemaViolation("empty file: missing header", line=1)
    if header["n_frames"] != len(samples):
        raise SchemaViolation(
            f"header says {header['n_frames']} frames, file has {len(samples)}")
    episode = Episode(
        episode_id=str(header["episode_id"]),
        frame_rate_hz=float(header["frame_rate_hz"]),
        task_kind=str(header["task_kind"]),
        embodiment=str(header["embodiment"]),
        samples=samples,
        instructions=list(header["instructions"]),
    )
    episode.validate()
    return episode, result


def validate_episode_file(path) -> dict:
    """Raise SchemaViolation/VersionMismatch on bad files; returns a summary."""
    episode, result = read_episode(path)
    return {
        "episode_id": episode.episode_id,
        "frames": len(episode.samples),
        "task_kind": episode.task_kind,
        "subtasks": len(episode.instructions),
        "has_result": result is not None,
    }
