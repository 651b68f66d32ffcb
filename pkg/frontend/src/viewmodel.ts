// Single view model fed exclusively by server messages: the client owns no
// scenario ground truth, only what arrived over the wire.

import type { ObsMsg, ServerMsg } from "./protocol.js";

export type Phase = "disconnected" | "lobby" | "blind-wait" | "live" | "saved";

export interface ViewModel {
  phase: Phase;
  session: string | null;
  scenarios: string[];
  obs: ObsMsg | null;
  subtaskText: string;
  savedPath: string | null;
  lastError: string | null;
  connectionHealthy: boolean;
  lastTickAt: number; // ms timestamp of the latest obs
}

export function initialViewModel(): ViewModel {
  return {
    phase: "disconnected",
    session: null,
    scenarios: [],
    obs: null,
    subtaskText: "",
    savedPath: null,
    lastError: null,
    connectionHealthy: false,
    lastTickAt: 0,
  };
}

export function reduce(vm: ViewModel, msg: ServerMsg, nowMs: number): ViewModel {
  switch (msg.type) {
    case "hello":
      return {
        ...vm,
        phase: "lobby",
        session: msg.session ?? null,
        scenarios: msg.scenarios ?? [],
        connectionHealthy: true,
      };
    case "obs":
      return {
        ...vm,
        phase: msg.phase === "live" ? "live" : vm.phase,
        obs: msg,
        subtaskText: msg.subtask.text,
        connectionHealthy: true,
        lastTickAt: nowMs,
      };
    case "save":
      return { ...vm, phase: "saved", savedPath: msg.path ?? null };
    case "error":
      return { ...vm, lastError: `${msg.code}: ${msg.message}` };
    case "bye":
      return { ...vm, phase: "disconnected", connectionHealthy: false };
    default:
      return vm;
  }
}

export function markDisconnected(vm: ViewModel): ViewModel {
  return { ...vm, connectionHealthy: false, phase: "disconnected" };
}
