// 2D map rendering: occupancy grid, robot pose triangle, planned path,
// detection markers. The drawing context is structurally typed so tests can
// check render calls without a real canvas.

import { MapMeta } from "./protocol.js";
import { UiState } from "./state.js";

export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
}

export interface Viewport {
  scale: number; // pixels per meter
  offsetX: number;
  offsetY: number;
  canvasHeight: number;
}

/** Uniform world-to-canvas fit with the y axis flipped (canvas y grows
 * downward, world y grows upward). */
export function fitViewport(meta: MapMeta, canvasW: number, canvasH: number): Viewport {
  const worldW = meta.width * meta.resolution;
  const worldH = meta.height * meta.resolution;
  const scale = Math.min(canvasW / worldW, canvasH / worldH);
  const offsetX = (canvasW - worldW * scale) / 2 - meta.origin[0] * scale;
  const offsetY = (canvasH - worldH * scale) / 2 - meta.origin[1] * scale;
  return { scale, offsetX, offsetY, canvasHeight: canvasH };
}

export function worldToCanvas(vp: Viewport, x: number, y: number): [number, number] {
  return [x * vp.scale + vp.offsetX, vp.canvasHeight - (y * vp.scale + vp.offsetY)];
}

const COLORS = {
  background: "#f8f7f2",
  wall: "#3c3a36",
  path: "#4a90d9",
  robot: "#c0392b",
  detection: "#2e7d32",
  goalOk: "#2e7d32",
  goalBad: "#c0392b",
  text: "#222",
};

export function renderMap(ctx: Ctx2D, meta: MapMeta, state: UiState,
                          canvasW: number, canvasH: number): void {
  const vp = fitViewport(meta, canvasW, canvasH);
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, canvasW, canvasH);

  const cell = meta.resolution * vp.scale;
  for (let row = 0; row < meta.cells.length; row++) {
    const line = meta.cells[row];
    if (!line) continue;
    // row 0 of the metadata is the top of the map
    const worldY = (meta.height - 1 - row) * meta.resolution + meta.origin[1];
    for (let col = 0; col < line.length; col++) {
      if (line[col] !== "#") continue;
      const worldX = col * meta.resolution + meta.origin[0];
      const [px, py] = worldToCanvas(vp, worldX, worldY + meta.resolution);
      ctx.fillStyle = COLORS.wall;
      ctx.fillRect(px, py, cell + 0.5, cell + 0.5);
    }
  }

  if (state.navPath && state.navPath.waypoints.length > 1) {
    ctx.strokeStyle = COLORS.path;
    ctx.lineWidth = 2;
    ctx.beginPath();
    state.navPath.waypoints.forEach(([x, y], i) => {
      const [px, py] = worldToCanvas(vp, x, y);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
  }

  for (const det of state.detections) {
    const [px, py] = worldToCanvas(vp, det.x, det.y);
    ctx.fillStyle = COLORS.detection;
    ctx.beginPath();
    ctx.arc(px, py, 4, 0, Math.PI * 2);
    ctx.fill();
    ctx.font = "11px sans-serif";
    ctx.fillText(det.label, px + 6, py - 6);
  }

  const goal = state.navPath?.waypoints.at(-1);
  if (goal) {
    const [px, py] = worldToCanvas(vp, goal[0], goal[1]);
    const navState = state.navStatus?.state;
    ctx.strokeStyle = navState === "succeeded" ? COLORS.goalOk
      : navState === "aborted" || navState === "timed_out" ? COLORS.goalBad
      : COLORS.path;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(px, py, 7, 0, Math.PI * 2);
    ctx.stroke();
  }

  if (state.pose) {
    const { x, y, theta } = state.pose;
    const size = 0.25; // meters
    const tip = worldToCanvas(vp, x + size * Math.cos(theta), y + size * Math.sin(theta));
    const left = worldToCanvas(vp, x + size * 0.6 * Math.cos(theta + 2.5),
                               y + size * 0.6 * Math.sin(theta + 2.5));
    const right = worldToCanvas(vp, x + size * 0.6 * Math.cos(theta - 2.5),
                                y + size * 0.6 * Math.sin(theta - 2.5));
    ctx.fillStyle = COLORS.robot;
    ctx.beginPath();
    ctx.moveTo(tip[0], tip[1]);
    ctx.lineTo(left[0], left[1]);
    ctx.lineTo(right[0], right[1]);
    ctx.closePath();
    ctx.fill();
  }
}
