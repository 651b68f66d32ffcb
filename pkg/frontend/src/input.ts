// Keyboard bindings -> one cmd message per client tick with the
// last-sampled values. Defaults:
//   arrows      pan/tilt the head
//   w/s a/d     chassis forward-back / rotate
//   i/k j/l u/o right effector x/y/z    (t/g f/h r/y left effector)
//   q / e       toggle right / left gripper
//   x           discrete uncover trigger
//   m           mark sub-task done       enter  save

import type { CmdMsg, GripWord, Trigger } from "./protocol.js";
import { validateClientMessage } from "./protocol.js";

export interface BindingState {
  held: Set<string>;
  gripLeft: GripWord;
  gripRight: GripWord;
  pendingTriggers: Trigger[];
  seq: number;
}

export function initialBindingState(): BindingState {
  return { held: new Set(), gripLeft: "open", gripRight: "open",
           pendingTriggers: [], seq: 0 };
}

export function keyDown(state: BindingState, key: string): BindingState {
  const held = new Set(state.held);
  held.add(key);
  let { gripLeft, gripRight } = state;
  const triggers = [...state.pendingTriggers];
  if (key === "q") gripRight = gripRight === "open" ? "close" : "open";
  if (key === "e") gripLeft = gripLeft === "open" ? "close" : "open";
  if (key === "x") triggers.push("uncover");
  return { ...state, held, gripLeft, gripRight, pendingTriggers: triggers };
}

export function keyUp(state: BindingState, key: string): BindingState {
  const held = new Set(state.held);
  held.delete(key);
  return { ...state, held };
}

const PAN_STEP = 0.035;
const TILT_STEP = 0.025;
const BASE_V = 0.15;
const BASE_W = 0.3;
const EFF_STEP = 0.015;

function axis(held: Set<string>, plus: string, minus: string, step: number): number {
  return (held.has(plus) ? step : 0) - (held.has(minus) ? step : 0);
}

// Builds the tick's cmd from the currently held keys; always emits, even
// when everything is zero, so the server sees a fresh command each tick.
export function buildCommand(state: BindingState): { cmd: CmdMsg; next: BindingState } {
  const h = state.held;
  const seq = state.seq + 1;
  const cmd: CmdMsg = {
    type: "cmd",
    seq,
    head: {
      dy: axis(h, "ArrowLeft", "ArrowRight", PAN_STEP),
      dp: axis(h, "ArrowDown", "ArrowUp", TILT_STEP),
    },
    base: {
      v: axis(h, "w", "s", BASE_V),
      w: axis(h, "a", "d", BASE_W),
    },
    eff_right: [
      axis(h, "i", "k", EFF_STEP),
      axis(h, "j", "l", EFF_STEP),
      axis(h, "u", "o", EFF_STEP),
    ],
    eff_left: [
      axis(h, "t", "g", EFF_STEP),
      axis(h, "f", "h", EFF_STEP),
      axis(h, "r", "y", EFF_STEP),
    ],
    grip_left: state.gripLeft,
    grip_right: state.gripRight,
    triggers: state.pendingTriggers,
  };
  validateClientMessage(cmd);
  return { cmd, next: { ...state, seq, pendingTriggers: [] } };
}
