// Session flow over any WebSocket-like transport: connect -> hello ->
// start -> stream commands/observations -> mark boundaries -> save.

import type { ClientMsg } from "./protocol.js";
import { PROTOCOL_VERSION, parseServerMessage, validateClientMessage } from "./protocol.js";
import type { ViewModel } from "./viewmodel.js";
import { initialViewModel, markDisconnected, reduce } from "./viewmodel.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onopen: (() => void) | null;
}

export class Session {
  vm: ViewModel = initialViewModel();
  private listeners: Array<(vm: ViewModel) => void> = [];

  constructor(private socket: SocketLike, private now: () => number = Date.now) {
    socket.onopen = () => this.send({ type: "hello", version: PROTOCOL_VERSION });
    socket.onmessage = (ev) => {
      const msg = parseServerMessage(ev.data);
      this.vm = reduce(this.vm, msg, this.now());
      this.emit();
    };
    socket.onclose = () => {
      this.vm = markDisconnected(this.vm);
      this.emit();
    };
  }

  onChange(fn: (vm: ViewModel) => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.vm);
  }

  send(msg: ClientMsg): void {
    this.socket.send(JSON.stringify(validateClientMessage(msg)));
  }

  start(scenario: string, seed: number): void {
    this.send({ type: "start", scenario, seed });
    this.vm = { ...this.vm, phase: "blind-wait" };
    this.emit();
  }

  markSubtaskDone(): void {
    this.send({ type: "mark_subtask_done" });
  }

  save(): void {
    this.send({ type: "save" });
  }

  bye(): void {
    this.send({ type: "bye" });
    this.socket.close();
  }
}
