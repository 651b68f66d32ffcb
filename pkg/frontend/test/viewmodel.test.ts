import { describe, expect, it } from "vitest";

import type { ObsMsg } from "../src/protocol.js";
import { initialViewModel, markDisconnected, reduce } from "../src/viewmodel.js";

function obs(partial: Partial<ObsMsg> = {}): ObsMsg {
  return {
    type: "obs", tick: 1, time: 0.0333, phase: "live",
    subtask: { index: 0, text: "scan the table", total: 2 },
    percepts: [], proprio: {
      chassis: [0, 0, 0], head: [0.5, 0],
      eff_left: [0.35, 0.18, 0.95], eff_right: [0.35, -0.18, 0.95],
      grip_left_w: 0.1, grip_right_w: 0.1,
      held: { left: null, right: null },
    },
    last_seq: -1,
    ...partial,
  };
}

describe("view model reducer", () => {
  it("hello enters the lobby with the catalog", () => {
    const vm = reduce(initialViewModel(), {
      type: "hello", version: "asa-teleop/1", session: "ab12",
      scenarios: ["cylinder"],
    }, 1000);
    expect(vm.phase).toBe("lobby");
    expect(vm.scenarios).toEqual(["cylinder"]);
    expect(vm.connectionHealthy).toBe(true);
  });

  it("obs moves to live and carries the instruction", () => {
    let vm = initialViewModel();
    vm = reduce(vm, obs(), 123);
    expect(vm.phase).toBe("live");
    expect(vm.subtaskText).toBe("scan the table");
    expect(vm.lastTickAt).toBe(123);
  });

  it("renders only wire data: no hidden-state fields exist", () => {
    const vm = reduce(initialViewModel(), obs(), 0);
    expect(JSON.stringify(vm)).not.toContain("hypothesis");
  });

  it("save stores the path and phase", () => {
    const vm = reduce(initialViewModel(), {
      type: "save", path: "episodes/x.jsonl", frames: 300,
    }, 0);
    expect(vm.phase).toBe("saved");
    expect(vm.savedPath).toBe("episodes/x.jsonl");
  });

  it("errors surface verbatim without killing the session", () => {
    const vm = reduce(initialViewModel(), {
      type: "error", code: "empty-recording", message: "nothing recorded yet",
    }, 0);
    expect(vm.lastError).toBe("empty-recording: nothing recorded yet");
    expect(vm.phase).toBe("disconnected"); // unchanged initial phase
  });

  it("disconnect freezes health", () => {
    let vm = reduce(initialViewModel(), obs(), 5);
    vm = markDisconnected(vm);
    expect(vm.connectionHealthy).toBe(false);
    expect(vm.obs).not.toBeNull(); // frozen frame stays renderable
  });
});
