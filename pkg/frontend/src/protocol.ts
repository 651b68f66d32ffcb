// Wire protocol "asa-teleop/1": JSON text frames, one message per frame.
// The client only ever sees percepts and its own proprioception echo; no
// message carries hidden world state.

export const PROTOCOL_VERSION = "asa-teleop/1";

export type GripWord = "open" | "close";
export type Trigger = "uncover" | "open" | "grasp:left" | "grasp:right";

export interface Percept {
  id: string;
  kind: string;
  pos: [number, number, number]; // head-relative, meters
  yaw: number;
  quality: number;
  open: boolean | null;
}

export interface Proprio {
  chassis: [number, number, number];
  head: [number, number];
  eff_left: [number, number, number];
  eff_right: [number, number, number];
  grip_left_w: number;
  grip_right_w: number;
  held: { left: string | null; right: string | null };
}

export interface HelloMsg { type: "hello"; version: string; session?: string; scenarios?: string[] }
export interface StartMsg { type: "start"; scenario: string; seed: number }
export interface CmdMsg {
  type: "cmd";
  seq: number;
  head?: { dp: number; dy: number };
  base?: { v: number; w: number };
  eff_left?: [number, number, number];
  eff_right?: [number, number, number];
  grip_left?: GripWord | null;
  grip_right?: GripWord | null;
  triggers?: Trigger[];
}
export interface MarkMsg { type: "mark_subtask_done" }
export interface SaveMsg { type: "save"; path?: string; frames?: number }
export interface ByeMsg { type: "bye"; reason?: string }
export interface ErrorMsg { type: "error"; code: string; message: string }
export interface ObsMsg {
  type: "obs";
  tick: number;
  time: number;
  phase: string;
  subtask: { index: number; text: string; total: number };
  percepts: Percept[];
  proprio: Proprio;
  last_seq: number;
}

export type ServerMsg = HelloMsg | ObsMsg | SaveMsg | ErrorMsg | ByeMsg;
export type ClientMsg = HelloMsg | StartMsg | CmdMsg | MarkMsg | SaveMsg | ByeMsg;

const GRIP_WORDS = ["open", "close"];
const TRIGGER_WORDS = ["uncover", "open", "grasp:left", "grasp:right"];

function isNum(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isVec3(v: unknown): boolean {
  return Array.isArray(v) && v.length === 3 && v.every(isNum);
}

// Validates a message the client is about to send; throws on violations so
// a malformed binding can never reach the wire.
export function validateClientMessage(msg: ClientMsg): ClientMsg {
  switch (msg.type) {
    case "hello":
      if (msg.version !== PROTOCOL_VERSION) throw new Error("bad hello.version");
      return msg;
    case "start":
      if (typeof msg.scenario !== "string") throw new Error("bad start.scenario");
      if (!Number.isInteger(msg.seed)) throw new Error("bad start.seed");
      return msg;
    case "cmd": {
      if (!Number.isInteger(msg.seq)) throw new Error("bad cmd.seq");
      if (msg.head && !(isNum(msg.head.dp) && isNum(msg.head.dy)))
        throw new Error("bad cmd.head");
      if (msg.base && !(isNum(msg.base.v) && isNum(msg.base.w)))
        throw new Error("bad cmd.base");
      for (const key of ["eff_left", "eff_right"] as const) {
        const v = msg[key];
        if (v != null && !isVec3(v)) throw new Error(`bad cmd.${key}`);
      }
      for (const key of ["grip_left", "grip_right"] as const) {
        const v = msg[key];
        if (v != null && !GRIP_WORDS.includes(v)) throw new Error(`bad cmd.${key}`);
      }
      if (msg.triggers && !msg.triggers.every((t) => TRIGGER_WORDS.includes(t)))
        throw new Error("bad cmd.triggers");
      return msg;
    }
    case "mark_subtask_done":
    case "save":
    case "bye":
      return msg;
    default:
      throw new Error(`unknown client message type ${(msg as { type: string }).type}`);
  }
}

export function parseServerMessage(raw: string): ServerMsg {
  const msg = JSON.parse(raw) as ServerMsg;
  if (!msg || typeof msg !== "object" || typeof msg.type !== "string")
    throw new Error("malformed frame");
  if (!["hello", "obs", "save", "error", "bye"].includes(msg.type))
    throw new Error(`unknown server message type ${msg.type}`);
  return msg;
}
