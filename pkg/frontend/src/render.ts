// Egocentric 2-D wedge view: percepts drawn in head-relative coordinates,
// bearing mapped to the horizontal axis, distance to the radial axis, and
// visibility quality to glyph opacity. Entities outside the percept list
// simply do not exist for the renderer.

import type { ObsMsg, Percept } from "./protocol.js";

export const FOV_HALF_ANGLE = 0.6; // rad, mirrors the server configuration

export interface Placement {
  x: number;
  y: number;
  radius: number;
  opacity: number;
  label: string;
  kind: string;
}

export function bearingOf(p: Percept): number {
  return Math.atan2(p.pos[1], p.pos[0]);
}

export function distanceOf(p: Percept): number {
  const [x, y, z] = p.pos;
  return Math.sqrt(x * x + y * y + z * z);
}

// Projects one percept into wedge canvas coordinates. The wedge apex sits
// at the bottom-center; bearing 0 points straight up.
export function project(
  p: Percept, width: number, height: number, maxRange = 2.5,
): Placement | null {
  const bearing = bearingOf(p);
  if (Math.abs(bearing) > FOV_HALF_ANGLE) return null;
  const r = Math.min(distanceOf(p), maxRange) / maxRange;
  const apexX = width / 2;
  const apexY = height * 0.95;
  const span = height * 0.88;
  const angle = (bearing / FOV_HALF_ANGLE) * (Math.PI / 5);
  return {
    x: apexX - Math.sin(angle) * r * span,
    y: apexY - Math.cos(angle) * r * span,
    radius: Math.max(4, 14 * Math.min(1, 1 / Math.max(distanceOf(p), 0.3))),
    opacity: Math.max(0.15, Math.min(1, p.quality)),
    label: p.id,
    kind: p.kind,
  };
}

const KIND_COLORS: Record<string, string> = {
  target: "#e4593b",
  container: "#3b82e4",
  "shelf-unit": "#8455d8",
  bin: "#3bb273",
  peg: "#d8a755",
  ring: "#c4c41f",
};

export function drawView(
  ctx: CanvasRenderingContext2D, obs: ObsMsg | null,
  width: number, height: number, frozen: boolean,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#101318";
  ctx.fillRect(0, 0, width, height);

  // FOV wedge
  const apexX = width / 2;
  const apexY = height * 0.95;
  ctx.beginPath();
  ctx.moveTo(apexX, apexY);
  const wedge = Math.PI / 5;
  ctx.arc(apexX, apexY, height * 0.9, -Math.PI / 2 - wedge, -Math.PI / 2 + wedge);
  ctx.closePath();
  ctx.fillStyle = "#1a2230";
  ctx.fill();

  if (obs) {
    for (const p of obs.percepts) {
      const g = project(p, width, height);
      if (!g) continue;
      ctx.globalAlpha = g.opacity;
      ctx.fillStyle = KIND_COLORS[g.kind] ?? "#aaaaaa";
      ctx.beginPath();
      ctx.arc(g.x, g.y, g.radius, 0, 2 * Math.PI);
      ctx.fill();
      if (p.open === false) {
        ctx.strokeStyle = "#ffffff";
        ctx.lineWidth = 2;
        ctx.stroke();
      }
      ctx.globalAlpha = 1;
      ctx.fillStyle = "#d5d9e0";
      ctx.font = "11px monospace";
      ctx.fillText(g.label, g.x + g.radius + 3, g.y + 3);
    }
  }

  if (frozen) {
    ctx.fillStyle = "rgba(16, 19, 24, 0.6)";
    ctx.fillRect(0, 0, width, height);
    ctx.fillStyle = "#e4593b";
    ctx.font = "bold 18px monospace";
    ctx.textAlign = "center";
    ctx.fillText("CONNECTION LOST - frame frozen", width / 2, height / 2);
    ctx.textAlign = "start";
  }
}
