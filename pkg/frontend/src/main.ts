// Browser bootstrap: wires the WebSocket session, keyboard input at the
// client tick, and the canvas renderer into one loop.

import { buildCommand, initialBindingState, keyDown, keyUp } from "./input.js";
import { drawView } from "./render.js";
import { Session } from "./session.js";

const TICK_MS = 1000 / 30;
const STALE_MS = 500;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function main(): void {
  const canvas = el<HTMLCanvasElement>("view");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("no 2d context");
  const status = el<HTMLDivElement>("status");
  const instruction = el<HTMLDivElement>("instruction");
  const scenarioSel = el<HTMLSelectElement>("scenario");
  const seedInput = el<HTMLInputElement>("seed");
  const startBtn = el<HTMLButtonElement>("start");
  const markBtn = el<HTMLButtonElement>("mark");
  const saveBtn = el<HTMLButtonElement>("save");

  const url = `ws://${location.host}/ws`;
  const session = new Session(new WebSocket(url) as never);
  let binding = initialBindingState();

  session.onChange((vm) => {
    status.textContent = vm.lastError
      ? `phase=${vm.phase}  ${vm.lastError}`
      : vm.savedPath
        ? `saved: ${vm.savedPath}`
        : `phase=${vm.phase}  session=${vm.session ?? "-"}`;
    instruction.textContent = vm.subtaskText || "(waiting for start)";
    if (vm.scenarios.length && scenarioSel.options.length === 0) {
      for (const kind of vm.scenarios) {
        const opt = document.createElement("option");
        opt.value = kind;
        opt.textContent = kind;
        scenarioSel.appendChild(opt);
      }
    }
  });

  startBtn.addEventListener("click", () => {
    session.start(scenarioSel.value || "cylinder",
                  parseInt(seedInput.value || "0", 10));
  });
  markBtn.addEventListener("click", () => session.markSubtaskDone());
  saveBtn.addEventListener("click", () => session.save());

  window.addEventListener("keydown", (ev) => {
    if (ev.key === "m") session.markSubtaskDone();
    else if (ev.key === "Enter") session.save();
    else binding = keyDown(binding, ev.key);
  });
  window.addEventListener("keyup", (ev) => { binding = keyUp(binding, ev.key); });

  setInterval(() => {
    if (session.vm.phase === "live" || session.vm.phase === "blind-wait") {
      const { cmd, next } = buildCommand(binding);
      binding = next;
      session.send(cmd);
    }
  }, TICK_MS);

  const loop = () => {
    const vm = session.vm;
    const frozen = !vm.connectionHealthy
      || (vm.phase === "live" && Date.now() - vm.lastTickAt > STALE_MS);
    drawView(ctx, vm.obs, canvas.width, canvas.height, frozen);
    requestAnimationFrame(loop);
  };
  requestAnimationFrame(loop);
}

window.addEventListener("DOMContentLoaded", main);
