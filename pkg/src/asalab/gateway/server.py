"""Teleoperation sessions: a sans-io engine plus the ASGI wiring.

The engine consumes validated client messages and produces reply
messages; a fixed-rate tick advances the world, applies the latest
command (last-writer-wins), and streams observations.  The ASGI app
bridges one WebSocket per session onto an engine and an asyncio ticker.
"""

from __future__ import annotations

import asyncio
import json
import os
import secrets

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from ..config import LabConfig
from ..dataspace import write_episode
from ..errors import EmptyRecording, ProtocolError
from ..recorder import DemoRecorder
from ..world.entities import ContinuousCommand
from ..world.scenarios import SCENARIO_KINDS, make_scenario
from .protocol import PROTOCOL_VERSION, validate_message

PHASES = ("lobby", "blind-wait", "live", "saved")


class SessionEngine:
    """One teleoperation session; transport-agnostic."""

    def __init__(self, cfg: LabConfig, out_dir: str, session_id: str | None = None):
        self.cfg = cfg
        self.out_dir = out_dir
        self.session_id = session_id or secrets.token_hex(4)
        self.phase = "lobby"
        self.greeted = False
        self.recorder: DemoRecorder | None = None
        self.scenario = None
        self.last_seq = -1
        self.latest_cmd: dict | None = None
        self.tick_count = 0
        self.ticks_since_message = 0
        self.subtask_index = 0
        self.saved_path = None
        self.closed = False

    # -- message handling ------------------------------------------------------

    def handle_message(self, msg) -> list:
        self.ticks_since_message = 0
        try:
            validate_message(msg)
        except ProtocolError as exc:
            self.closed = True
            return [{"type": "error", "code": exc.code, "message": str(exc)}]
        mtype = msg["type"]
        try:
            if mtype == "hello":
                return self._on_hello()
            if mtype == "start":
                return self._on_start(msg)
            if mtype == "cmd":
                return self._on_cmd(msg)
            if mtype == "mark_subtask_done":
                return self._on_mark()
            if mtype == "save":
                return self._on_save()
            if mtype == "bye":
                self.closed = True
                return [{"type": "bye", "reason": "client"}]
        except ProtocolError as exc:
            self.closed = True
            return [{"type": "error", "code": exc.code, "message": str(exc)}]
        return []

    def _on_hello(self) -> list:
        if self.greeted:
            raise ProtocolError("bad-state", "duplicate hello")
        self.greeted = True
        return [{"type": "hello", "version": PROTOCOL_VERSION,
                 "session": self.session_id,
                 "scenarios": list(SCENARIO_KINDS)}]

    def _on_start(self, msg) -> list:
        if not self.greeted:
            raise ProtocolError("bad-state", "start before hello")
        if self.phase != "lobby":
            raise ProtocolError("bad-state", f"start in phase {self.phase}")
        kind = msg["scenario"]
        if kind not in SCENARIO_KINDS:
            raise ProtocolError("bad-field", f"unknown scenario {kind!r}")
        self.scenario = make_scenario(kind, int(msg["seed"]))
        self.recorder = DemoRecorder(
            self.scenario, self.cfg, rate_hz=self.cfg.gateway.tick_hz,
            source="robot-analog", noise_seed=int(msg["seed"]))
        self.phase = "blind-wait"
        return []

    def _on_cmd(self, msg) -> list:
        if self.phase not in ("blind-wait", "live"):
            raise ProtocolError("bad-state", f"cmd in phase {self.phase}")
        seq = msg["seq"]
        if seq <= self.last_seq:
            raise ProtocolError("bad-seq",
                                f"seq {seq} not greater than {self.last_seq}")
        self.last_seq = seq
        self.latest_cmd = msg
        return []

    def _on_mark(self) -> list:
        if self.phase != "live":
            raise ProtocolError("bad-state", "mark before any live frame")
        self.recorder.mark_boundary()
        total = len(self.scenario.instructions)
        self.subtask_index = min(self.subtask_index + 1, total - 1)
        return []

    def _on_save(self) -> list:
        if self.phase == "saved":
            return [{"type": "error", "code": "already-saved",
                     "message": "episode already saved"}]
        if self.phase != "live" or self.recorder is None \
                or self.recorder.frame_count == 0:
            return [{"type": "error", "code": "empty-recording",
                     "message": "nothing recorded yet"}]
        try:
            episode, result = self.recorder.finalize(
                f"{self.scenario.kind}-teleop-{self.scenario.seed}-{self.session_id}")
        except EmptyRecording as exc:
            return [{"type": "error", "code": "empty-recording", "message": str(exc)}]
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(
            self.out_dir, f"{episode.episode_id}.jsonl")
        write_episode(episode, path, result={
            "task": result["task"], "seed": result["seed"],
            "markers": result["markers"], "sim_time": result["sim_time"],
        })
        self.saved_path = path
        self.phase = "saved"
        return [{"type": "save", "path": path,
                 "frames": len(episode.samples)}]

    # -- ticking ----------------------------------------------------------------

    def _command_frame(self) -> ContinuousCommand:
        msg = self.latest_cmd or {}
        head = msg.get("head", {})
        base = msg.get("base", {})
        agent = self.recorder.agent
        dp = float(head.get("dp", 0.0))
        dy = float(head.get("dy", 0.0))
        cmd = ContinuousCommand(
            base_v=float(base.get("v", 0.0)),
            base_w=float(base.get("w", 0.0)),
            head_pitch=agent.head.pitch + dp if dp else None,
            head_yaw=agent.head.yaw + dy if dy else None,
            triggers=tuple(msg.get("triggers", [])),
        )
        for hand in ("left", "right"):
            delta = msg.get(f"eff_{hand}")
            if delta is not None and any(delta):
                target = agent.effector(hand) + np.asarray(delta, dtype=float)
                if hand == "left":
                    cmd.eff_left = target
                else:
                    cmd.eff_right = target
            word = msg.get(f"grip_{hand}")
            if word is not None:
                width = self.cfg.world.w_max if word == "open" else 0.0
                if hand == "left":
                    cmd.grip_left_w = width
                else:
                    cmd.grip_right_w = width
        return cmd

    def tick(self) -> list:
        """Advance one server tick; returns messages to send."""
        if self.closed:
            return []
        self.tick_count += 1
        self.ticks_since_message += 1
        idle_limit = self.cfg.gateway.idle_timeout_s * self.cfg.gateway.tick_hz
        if self.ticks_since_message > idle_limit:
            self.closed = True
            return [{"type": "bye", "reason": "idle-timeout"}]
        if self.phase not in ("blind-wait", "live"):
            return []
        if self.phase == "blind-wait":
            self.phase = "live"
        obs = self.recorder.observation()
        self.recorder.record_and_apply(self._command_frame())
        # one command consumed per tick; deltas do not repeat automatically
        self.latest_cmd = None
        total = len(self.scenario.instructions)
        return [{
            "type": "obs",
            "tick": self.tick_count,
            "time": obs.timestamp,
            "phase": self.phase,
            "subtask": {
                "index": self.subtask_index,
                "text": self.scenario.instruction_texts[self.subtask_index],
                "total": total,
            },
            "percepts": [p.to_dict() for p in obs.percepts],
            "proprio": obs.proprio,
            "last_seq": self.last_seq,
        }]


def create_app(cfg: LabConfig | None = None, out_dir: str = "episodes",
               static_dir: str | None = None):
    """FastAPI app with the /ws teleop endpoint and optional static client."""
    cfg = cfg or LabConfig()
    app = FastAPI(title="asalab teleop gateway")

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "protocol": PROTOCOL_VERSION}

    @app.websocket("/ws")
    async def ws_endpoint(ws: "WebSocket"):
        await ws.accept()
        engine = SessionEngine(cfg, out_dir)
        send_lock = asyncio.Lock()

        async def send(messages):
            for m in messages:
                async with send_lock:
                    await ws.send_text(json.dumps(m))

        async def ticker():
            period = 1.0 / cfg.gateway.tick_hz
            while not engine.closed:
                await asyncio.sleep(period)
                await send(engine.tick())

        task = asyncio.create_task(ticker())
        try:
            while not engine.closed:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    msg = None
                await send(engine.handle_message(msg))
            await ws.close()
        except WebSocketDisconnect:
            pass
        finally:
            task.cancel()

    if static_dir and os.path.isdir(static_dir):
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
