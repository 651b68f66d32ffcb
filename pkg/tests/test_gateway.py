import json

import numpy as np
import pytest

from asalab.config import load_config
from asalab.dataspace import read_episode
from asalab.errors import ProtocolError
from asalab.gateway import PROTOCOL_VERSION, SessionEngine, validate_message

CFG = load_config()


def hello():
    return {"type": "hello", "version": PROTOCOL_VERSION}


def start(kind="cylinder", seed=7):
    return {"type": "start", "scenario": kind, "seed": seed}


def cmd(seq, **kw):
    base = {"type": "cmd", "seq": seq}
    base.update(kw)
    return base


class ScriptedClient:
    """Drives an engine through a full blind cylinder session."""

    def __init__(self, engine, seed=7):
        self.engine = engine
        self.seq = 0
        self.messages = []
        self.send(hello())
        self.send(start(seed=seed))

    def send(self, msg):
        replies = self.engine.handle_message(msg)
        self.messages.extend(replies)
        return replies

    def tick(self, n=1, command=None):
        out = []
        for _ in range(n):
            if command is not None:
                self.seq += 1
                self.send(cmd(self.seq, **command))
            msgs = self.engine.tick()
            self.messages.extend(msgs)
            out.extend(msgs)
        return out


class TestProtocolValidation:
    def test_wrong_version(self):
        engine = SessionEngine(CFG, "unused")
        replies = engine.handle_message({"type": "hello",
                                         "version": "asa-teleop/0"})
        assert replies[0]["type"] == "error"
        assert replies[0]["code"] == "unsupported-version"
        assert engine.closed

    def test_unknown_type_rejected(self):
        with pytest.raises(ProtocolError):
            validate_message({"type": "warp"})

    def test_cmd_field_validation(self):
        with pytest.raises(ProtocolError):
            validate_message(cmd(1, grip_left="half"))
        with pytest.raises(ProtocolError):
            validate_message(cmd(1, eff_left=[1.0, 2.0]))
        validate_message(cmd(1, head={"dp": 0.1, "dy": -0.2},
                             base={"v": 0.1, "w": 0.0},
                             eff_left=[0.0, 0.0, 0.01], grip_left="close",
                             triggers=["uncover"]))

    def test_sequence_numbers_strictly_increase(self, tmp_path):
        engine = SessionEngine(CFG, str(tmp_path))
        engine.handle_message(hello())
        engine.handle_message(start())
        engine.tick()
        assert engine.handle_message(cmd(1)) == []
        replies = engine.handle_message(cmd(1))
        assert replies[0]["code"] == "bad-seq"
        assert engine.closed


class TestSessionLifecycle:
    def test_hello_reply_carries_catalog(self, tmp_path):
        engine = SessionEngine(CFG, str(tmp_path))
        replies = engine.handle_message(hello())
        assert replies[0]["type"] == "hello"
        assert replies[0]["version"] == PROTOCOL_VERSION
        assert "cylinder" in replies[0]["scenarios"]

    def test_obs_streaming_and_phases(self, tmp_path):
        engine = SessionEngine(CFG, str(tmp_path))
        client = ScriptedClient(engine)
        assert engine.phase == "blind-wait"
        obs = client.tick()[0]
        assert engine.phase == "live"
        assert obs["type"] == "obs"
        assert obs["subtask"]["index"] == 0
        assert {"percepts", "proprio", "tick", "last_seq"} <= set(obs)

    def test_save_before_frames_is_error(self, tmp_path):
        engine = SessionEngine(CFG, str(tmp_path))
        engine.handle_message(hello())
        engine.handle_message(start())
        replies = engine.handle_message({"type": "save"})
        assert replies[0]["code"] == "empty-recording"
        assert not engine.closed

    def test_idle_timeout_sends_bye(self, tmp_path):
        engine = SessionEngine(CFG, str(tmp_path))
        engine.handle_message(hello())
        engine.handle_message(start())
        limit = int(CFG.gateway.idle_timeout_s * CFG.gateway.tick_hz)
        msgs = []
        for _ in range(limit + 2):
            msgs.extend(engine.tick())
        assert msgs[-1]["type"] == "bye"
        assert engine.closed


class TestBlindInvariant:
    def test_hidden_target_never_on_wire(self, tmp_path):
        engine = SessionEngine(CFG, str(tmp_path))
        client = ScriptedClient(engine, seed=3)
        client.tick(60)  # no uncovering commands: target stays hidden
        for msg in client.messages:
            blob = json.dumps(msg)
            assert "hypothesis" not in blob
            if msg["type"] == "obs":
                ids = {p["id"] for p in msg["percepts"]}
                assert "cylinder" not in ids
                assert "cylinder" not in json.dumps(msg["proprio"])

    def test_target_appears_only_after_uncover(self, tmp_path):
        engine = SessionEngine(CFG, str(tmp_path))
        client = ScriptedClient(engine, seed=3)
        side = engine.scenario.world.hypothesis
        bowl = f"bowl_{side}"
        pos = engine.scenario.world.entities[bowl].position
        # drive the right effector onto the hiding bowl via deltas
        for _ in range(200):
            eff = np.asarray(engine.recorder.agent.eff_right)
            delta = (pos - eff)
            step = delta / max(1.0, np.linalg.norm(delta) / 0.02)
            out = client.tick(1, command={
                "eff_right": [float(v) for v in step]})
            if any(p["id"] == "cylinder"
                   for m in out for p in m.get("percepts", [])):
                break
        else:
            pytest.fail("cylinder never revealed")


class TestRecordDemo:
    def drive_session(self, tmp_path, seed=5):
        engine = SessionEngine(CFG, str(tmp_path))
        client = ScriptedClient(engine, seed=seed)
        client.tick(120)
        client.send({"type": "mark_subtask_done"})
        client.tick(150, command={"head": {"dp": 0.0, "dy": 0.002}})
        reply = client.send({"type": "save"})
        return engine, client, reply

    def test_full_session_saves_valid_episode(self, tmp_path):
        engine, client, reply = self.drive_session(tmp_path)
        assert reply[0]["type"] == "save"
        episode, result = read_episode(reply[0]["path"])
        assert len(episode) == reply[0]["frames"] == 270
        assert episode.task_kind == "cylinder"
        # boundary at 120 -> two sub-tasks with suffix labels (90-frame rule)
        ids = [s.subtask_id for s in episode.samples]
        assert ids == [0] * 120 + [1] * 150
        labels = [s.cognition for s in episode.samples]
        assert labels[:30] == [0] * 30 and labels[30:120] == [1] * 90
        assert labels[120:180] == [0] * 60 and labels[180:] == [1] * 90

    def test_second_save_rejected(self, tmp_path):
        engine, client, reply = self.drive_session(tmp_path)
        again = client.send({"type": "save"})
        assert again[0]["type"] == "error"
        assert again[0]["code"] == "already-saved"

    def test_same_seed_same_commands_identical_episode(self, tmp_path):
        paths = []
        for run in range(2):
            out = tmp_path / f"run{run}"
            engine = SessionEngine(CFG, str(out), session_id="fixed")
            client = ScriptedClient(engine, seed=11)
            client.tick(30, command={"head": {"dp": 0.001, "dy": -0.003}})
            client.send({"type": "mark_subtask_done"})
            client.tick(95)
            reply = client.send({"type": "save"})
            paths.append(reply[0]["path"])
        a, b = (open(p).read() for p in paths)
        assert a == b


def test_asgi_ws_handshake():
    from fastapi.testclient import TestClient

    from asalab.gateway.server import create_app

    app = create_app(CFG, out_dir="/tmp/asa-test-episodes")
    client = TestClient(app)
    assert client.get("/healthz").json()["protocol"] == PROTOCOL_VERSION
    with client.websocket_connect("/ws") as ws:
        ws.send_text(json.dumps(hello()))
        reply = json.loads(ws.receive_text())
        assert reply["type"] == "hello"
        ws.send_text(json.dumps({"type": "bye"}))
        reply = json.loads(ws.receive_text())
        assert reply["type"] == "bye"
