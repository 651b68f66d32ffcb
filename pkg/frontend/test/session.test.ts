// Full session flow against a scripted fake server speaking asa-teleop/1.

import { describe, expect, it } from "vitest";

import { buildCommand, initialBindingState, keyDown } from "../src/input.js";
import type { Percept } from "../src/protocol.js";
import type { SocketLike } from "../src/session.js";
import { Session } from "../src/session.js";

class FakeServer implements SocketLike {
  onmessage: ((ev: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onopen: (() => void) | null = null;
  received: Array<Record<string, unknown>> = [];
  tick = 0;
  started = false;
  saved = false;
  lastSeq = -1;
  revealed = false;

  open(): void {
    this.onopen?.();
  }

  private reply(msg: unknown): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }

  send(data: string): void {
    const msg = JSON.parse(data);
    this.received.push(msg);
    switch (msg.type) {
      case "hello":
        this.reply({ type: "hello", version: "asa-teleop/1", session: "t1",
                     scenarios: ["cylinder"] });
        break;
      case "start":
        this.started = true;
        break;
      case "cmd":
        if (msg.seq <= this.lastSeq) {
          this.reply({ type: "error", code: "bad-seq", message: "stale" });
          return;
        }
        this.lastSeq = msg.seq;
        if ((msg.triggers ?? []).includes("uncover")) this.revealed = true;
        break;
      case "save":
        if (this.tick === 0) {
          this.reply({ type: "error", code: "empty-recording",
                       message: "nothing recorded yet" });
        } else {
          this.saved = true;
          this.reply({ type: "save", path: "episodes/cyl-7.jsonl",
                       frames: this.tick });
        }
        break;
      case "bye":
        this.onclose?.();
        break;
    }
  }

  emitObs(subtaskIndex = 0): void {
    this.tick += 1;
    const percepts: Percept[] = [
      { id: "bowl_right", kind: "container", pos: [0.9, -0.25, -0.5],
        yaw: 0, quality: 1.0, open: this.revealed },
      { id: "bowl_left", kind: "container", pos: [0.9, 0.25, -0.5],
        yaw: 0, quality: 1.0, open: false },
    ];
    if (this.revealed) {
      percepts.push({ id: "cylinder", kind: "target", pos: [0.92, -0.25, -0.5],
                      yaw: 0, quality: 0.9, open: null });
    }
    this.reply({
      type: "obs", tick: this.tick, time: this.tick / 30, phase: "live",
      subtask: { index: subtaskIndex, text: subtaskIndex === 0
        ? "uncover the bowls to find the cylinder"
        : "pick up the cylinder and place it at the goal", total: 2 },
      percepts,
      proprio: { chassis: [0, 0, 0], head: [0.55, 0],
                 eff_left: [0.35, 0.18, 0.95], eff_right: [0.35, -0.18, 0.95],
                 grip_left_w: 0.1, grip_right_w: 0.1,
                 held: { left: null, right: null } },
      last_seq: this.lastSeq,
    });
  }

  close(): void {
    this.onclose?.();
  }
}

describe("session flow", () => {
  it("completes a full cylinder session: connect, start, operate, mark, save", () => {
    const server = new FakeServer();
    const session = new Session(server, () => 42);
    server.open();
    expect(session.vm.phase).toBe("lobby");
    expect(session.vm.scenarios).toContain("cylinder");

    session.start("cylinder", 7);
    expect(server.received.some((m) => m.type === "start")).toBe(true);

    server.emitObs();
    expect(session.vm.phase).toBe("live");
    expect(session.vm.subtaskText).toContain("uncover");

    // operate: send per-tick commands incl. an uncover trigger
    let binding = keyDown(initialBindingState(), "x");
    for (let i = 0; i < 5; i++) {
      const { cmd, next } = buildCommand(binding);
      binding = next;
      session.send(cmd);
      server.emitObs();
    }
    const ids = session.vm.obs!.percepts.map((p) => p.id);
    expect(ids).toContain("cylinder"); // reveal arrived over the wire only

    session.markSubtaskDone();
    server.emitObs(1);
    expect(session.vm.subtaskText).toContain("pick up the cylinder");

    session.save();
    expect(session.vm.phase).toBe("saved");
    expect(session.vm.savedPath).toBe("episodes/cyl-7.jsonl");
    expect(server.saved).toBe(true);
  });

  it("save on an empty recording surfaces the error", () => {
    const server = new FakeServer();
    const session = new Session(server);
    server.open();
    session.start("cylinder", 1);
    session.save();
    expect(session.vm.lastError).toContain("empty-recording");
    expect(session.vm.phase).not.toBe("saved");
  });

  it("client state never contains hypothesis information", () => {
    const server = new FakeServer();
    const session = new Session(server);
    server.open();
    session.start("cylinder", 3);
    for (let i = 0; i < 10; i++) server.emitObs();
    const state = JSON.stringify(session.vm);
    expect(state).not.toContain("hypothesis");
    // the hidden cylinder is absent until the server reveals it
    expect(session.vm.obs!.percepts.map((p) => p.id)).not.toContain("cylinder");
  });

  it("disconnect freezes the last frame", () => {
    const server = new FakeServer();
    const session = new Session(server);
    server.open();
    session.start("cylinder", 1);
    server.emitObs();
    server.close();
    expect(session.vm.connectionHealthy).toBe(false);
    expect(session.vm.obs).not.toBeNull();
  });
});
