// Grid renderer over a minimal drawing surface so tests can run headless.
// Default view applies a visibility mask matching the agent's egocentric
// radius; spectate mode shows everything.

import { RenderFrame } from "./protocol.js";

export interface DrawSurface {
  fillRect(x: number, y: number, w: number, h: number, color: string): void;
  fillCircle(cx: number, cy: number, r: number, color: string): void;
  fillTriangle(x1: number, y1: number, x2: number, y2: number, x3: number, y3: number, color: string): void;
  strokeRect(x: number, y: number, w: number, h: number, color: string): void;
  text(x: number, y: number, s: string, color: string): void;
  clear(): void;
}

export const VIEW_RADIUS = 2;

const COLOR_MAP: Record<string, string> = {
  black: "#222222",
  purple: "#8a2be2",
  yellow: "#e6c800",
};

export interface RenderOptions {
  cell: number; // pixel size of one grid cell
  masked: boolean; // fog beyond the player's egocentric radius
  viewerSeat: number;
}

export function visibleCells(frame: RenderFrame, seat: number): Set<string> {
  const me = frame.players.find((p) => p.index === seat);
  const out = new Set<string>();
  if (!me) return out;
  for (let dx = -VIEW_RADIUS; dx <= VIEW_RADIUS; dx++) {
    for (let dy = -VIEW_RADIUS; dy <= VIEW_RADIUS; dy++) {
      out.add(`${me.x + dx},${me.y + dy}`);
    }
  }
  return out;
}

export function drawFrame(s: DrawSurface, frame: RenderFrame, opts: RenderOptions): void {
  const c = opts.cell;
  s.clear();
  const fog = opts.masked ? visibleCells(frame, opts.viewerSeat) : null;
  const walls = new Set(frame.walls.map(([x, y]) => `${x},${y}`));
  for (let y = 0; y < frame.height; y++) {
    for (let x = 0; x < frame.width; x++) {
      const key = `${x},${y}`;
      const seen = fog === null || fog.has(key);
      let color = walls.has(key) ? "#555555" : "#d8e8d8";
      if (!seen) color = "#9aa59a";
      s.fillRect(x * c, y * c, c, c, color);
      s.strokeRect(x * c, y * c, c, c, "#b0b0b0");
    }
  }
  for (const o of frame.objects) {
    const key = `${o.x},${o.y}`;
    if (fog !== null && !fog.has(key)) continue;
    if (o.held_by !== null) continue; // carried objects render with the player
    drawGlyph(s, o.shape, o.color, o.x * c, o.y * c, c, o.frozen);
  }
  for (const p of frame.players) {
    const key = `${p.x},${p.y}`;
    if (fog !== null && !fog.has(key) && p.index !== opts.viewerSeat) continue;
    const cx = p.x * c + c / 2;
    const cy = p.y * c + c / 2;
    s.fillCircle(cx, cy, c * 0.32, p.index === opts.viewerSeat ? "#1565c0" : "#c62828");
    s.text(p.x * c + c * 0.38, p.y * c + c * 0.62, String(p.index), "#ffffff");
    if (p.holding !== null) {
      const held = frame.objects.find((o) => o.id === p.holding);
      if (held) drawGlyph(s, held.shape, held.color, p.x * c + c * 0.55, p.y * c, c * 0.45, false);
    }
  }
}

function drawGlyph(s: DrawSurface, shape: string, color: string, px: number, py: number, c: number, frozen: boolean): void {
  const fill = COLOR_MAP[color] ?? "#ff00ff";
  const pad = c * 0.18;
  if (shape === "cube") {
    s.fillRect(px + pad, py + pad, c - 2 * pad, c - 2 * pad, fill);
  } else if (shape === "sphere") {
    s.fillCircle(px + c / 2, py + c / 2, c / 2 - pad, fill);
  } else {
    s.fillTriangle(px + c / 2, py + pad, px + pad, py + c - pad, px + c - pad, py + c - pad, fill);
  }
  if (frozen) {
    s.strokeRect(px + pad / 2, py + pad / 2, c - pad, c - pad, "#00bcd4");
  }
}

export function panelLines(opts: {
  goal: string;
  rules: string[];
  scores: number[];
  trialIndex: number;
  trialsTotal: number;
  ticksLeft: number;
}): string[] {
  const lines = [
    `goal: ${opts.goal}`,
    `trial ${opts.trialIndex + 1} of ${opts.trialsTotal}`,
    `ticks left: ${opts.ticksLeft}`,
    `score: ${opts.scores.join(" / ")}`,
    "rules:",
  ];
  if (opts.rules.length === 0) lines.push("  (none)");
  for (const r of opts.rules) lines.push(`  ${r}`);
  return lines;
}
