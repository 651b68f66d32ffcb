"""Wire protocol "asa-teleop/1": JSON text frames over one connection.

Client messages:
  hello              {"type", "version"}
  start              {"type", "scenario", "seed"}
  cmd                {"type", "seq", "head": {"dp", "dy"}, "base": {"v", "w"},
                      "eff_left": [dx, dy, dz], "eff_right": [dx, dy, dz],
                      "grip_left": "open"|"close"|null, "grip_right": ...,
                      "triggers": [str, ...]}
  mark_subtask_done  {"type"}
  save               {"type"}
  bye                {"type"}

Server messages:
  hello  {"type", "version", "session", "scenarios"}
  obs    {"type", "tick", "time", "phase", "subtask", "percepts",
          "proprio", "last_seq"}
  save   {"type", "path", "frames"}
  error  {"type", "code", "message"}
  bye    {"type", "reason"}

Command application is last-writer-wins per server tick; `seq` must be
strictly increasing within a session.
"""

from __future__ import annotations

import numbers

from ..errors import ProtocolError

PROTOCOL_VERSION = "asa-teleop/1"

CLIENT_TYPES = ("hello", "start", "cmd", "mark_subtask_done", "save", "bye")
SERVER_TYPES = ("hello", "obs", "save", "error", "bye")
GRIP_WORDS = ("open", "close")
TRIGGER_WORDS = ("uncover", "open", "grasp:left", "grasp:right")


def _require(cond: bool, code: str, message: str):
    if not cond:
        raise ProtocolError(code, message)


def _is_num(v) -> bool:
    return isinstance(v, numbers.Real) and not isinstance(v, bool)


def _check_vec3(v, name: str):
    _require(isinstance(v, (list, tuple)) and len(v) == 3
             and all(_is_num(x) for x in v), "bad-field", f"{name} must be [x, y, z]")


def validate_message(msg) -> dict:
    """Validate one client message; raises ProtocolError on violations."""
    _require(isinstance(msg, dict), "bad-frame", "message must be a JSON object")
    mtype = msg.get("type")
    _require(mtype in CLIENT_TYPES, "unknown-type", f"unknown type {mtype!r}")
    if mtype == "hello":
        _require(msg.get("version") == PROTOCOL_VERSION, "unsupported-version",
                 f"server speaks {PROTOCOL_VERSION}")
    elif mtype == "start":
        _require(isinstance(msg.get("scenario"), str), "bad-field",
                 "start.scenario must be a string")
        _require(isinstance(msg.get("seed"), int) and not isinstance(msg.get("seed"), bool),
                 "bad-field", "start.seed must be an integer")
    elif mtype == "cmd":
        _require(isinstance(msg.get("seq"), int) and not isinstance(msg.get("seq"), bool),
                 "bad-field", "cmd.seq must be an integer")
        head = msg.get("head", {"dp": 0.0, "dy": 0.0})
        _require(isinstance(head, dict) and _is_num(head.get("dp", 0.0))
                 and _is_num(head.get("dy", 0.0)), "bad-field", "cmd.head")
        base = msg.get("base", {"v": 0.0, "w": 0.0})
        _require(isinstance(base, dict) and _is_num(base.get("v", 0.0))
                 and _is_num(base.get("w", 0.0)), "bad-field", "cmd.base")
        for key in ("eff_left", "eff_right"):
            if msg.get(key) is not None:
                _check_vec3(msg[key], f"cmd.{key}")
        for key in ("grip_left", "grip_right"):
            val = msg.get(key)
            _require(val is None or val in GRIP_WORDS, "bad-field",
                     f"cmd.{key} must be one of {GRIP_WORDS} or null")
        triggers = msg.get("triggers", [])
        _require(isinstance(triggers, list)
                 and all(t in TRIGGER_WORDS for t in triggers),
                 "bad-field", f"cmd.triggers entries must be in {TRIGGER_WORDS}")
    return msg
