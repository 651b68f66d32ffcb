"""Flat parameter vector with a named-segment layout, plus checkpoint I/O.

Checkpoint format: magic line, 4-byte little-endian header length, a JSON
header carrying the layout descriptor and a config hash, then the raw
little-endian float64 parameter array.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from ..errors import SchemaViolation, VersionMismatch

_MAGIC = b"ASAPOLICY1\n"

SEGMENT_NAMES = ("visual_encoder", "proprio_encoder", "cognitive_head",
                 "flow_decoder", "instruction_embedding")


@dataclass
class PolicyParams:
    """Parameter vector whose named segments partition it exactly."""

    vector: np.ndarray
    segments: dict            # name -> (offset, size)
    dims: dict                # model dimension record for reconstruction

    def __post_init__(self):
        covered = sorted(self.segments.values())
        offset = 0
        for start, size in covered:
            if start != offset:
                raise ValueError("segments must partition the vector")
            offset += size
        if offset != self.vector.size:
            raise ValueError("segments must cover the whole vector")

    def segment(self, name: str) -> np.ndarray:
        start, size = self.segments[name]
        return self.vector[start:start + size]

    def segment_mask(self, names) -> np.ndarray:
        mask = np.zeros(self.vector.size, dtype=bool)
        for name in names:
            start, size = self.segments[name]
            mask[start:start + size] = True
        return mask

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.vector.copy(), dict(self.segments),
                            dict(self.dims))


def config_hash(obj) -> str:
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def save_checkpoint(params: PolicyParams, path, extra: dict | None = None) -> str:
    header = {
        "segments": {k: list(v) for k, v in params.segments.items()},
        "dims": params.dims,
        "config_hash": config_hash(params.dims),
        "n_params": int(params.vector.size),
    }
    if extra:
        header["extra"] = extra
    blob = json.dumps(header).encode("utf-8")
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(params.vector.astype("<f8").tobytes())
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return path


def load_checkpoint(path) -> PolicyParams:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise VersionMismatch(f"bad checkpoint magic {magic!r}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    if data.size != header["n_params"]:
        raise SchemaViolation(
            f"expected {header['n_params']} params, file holds {data.size}")
    segments = {k: tuple(v) for k, v in header["segments"].items()}
    return PolicyParams(data.copy(), segments, dict(header["dims"]))
