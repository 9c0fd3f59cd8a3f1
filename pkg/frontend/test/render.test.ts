import { describe, expect, it } from "vitest";

import { drawFrame, DrawSurface, panelLines, visibleCells } from "../src/render.js";
import { ReplayPlayer } from "../src/replay.js";
import { FrameMsg, RenderFrame } from "../src/protocol.js";

class RecordingSurface implements DrawSurface {
  ops: string[] = [];
  clear() { this.ops.push("clear"); }
  fillRect(x: number, y: number, w: number, h: number, color: string) {
    this.ops.push(`rect:${x},${y},${color}`);
  }
  strokeRect() { this.ops.push("stroke"); }
  fillCircle(cx: number, cy: number, r: number, color: string) {
    this.ops.push(`circle:${cx},${cy},${color}`);
  }
  fillTriangle(x1: number, y1: number, _x2: number, _y2: number, _x3: number, _y3: number, color: string) {
    this.ops.push(`tri:${x1},${y1},${color}`);
  }
  text(_x: number, _y: number, s: string) { this.ops.push(`text:${s}`); }
}

function frame(): RenderFrame {
  return {
    width: 7, height: 5,
    walls: [[3, 0]],
    objects: [
      { id: 0, shape: "sphere", color: "yellow", x: 1, y: 1, frozen: false, held_by: null },
      { id: 1, shape: "cube", color: "black", x: 6, y: 4, frozen: true, held_by: null },
    ],
    players: [{ index: 0, x: 2, y: 2, facing: 1, holding: null }],
    goal_text: "near(player0, yellow sphere)",
    rule_panel: ["a rule exists (hidden)"],
    scores: [3],
    trial_index: 1, trials_total: 3, ticks_left: 4,
  };
}

describe("grid renderer", () => {
  it("draws every cell and visible glyphs", () => {
    const s = new RecordingSurface();
    drawFrame(s, frame(), { cell: 10, masked: false, viewerSeat: 0 });
    const rects = s.ops.filter((o) => o.startsWith("rect:"));
    expect(rects.length).toBeGreaterThanOrEqual(35); // 7x5 grid
    expect(s.ops.some((o) => o.startsWith("circle:15,15"))).toBe(true); // sphere at (1,1)
    expect(s.ops.some((o) => o.startsWith("circle:25,25"))).toBe(true); // player
  });

  it("masks cells beyond the egocentric radius", () => {
    const cells = visibleCells(frame(), 0);
    expect(cells.has("1,1")).toBe(true);   // within radius 2 of (2,2)
    expect(cells.has("6,4")).toBe(false);  // far corner
    const s = new RecordingSurface();
    drawFrame(s, frame(), { cell: 10, masked: true, viewerSeat: 0 });
    // The frozen cube at (6,4) is fogged out: no glyph at 60,40.
    expect(s.ops.some((o) => o.startsWith("rect:62"))).toBe(false);
  });

  it("renders the briefing panel with hidden-rule placeholders intact", () => {
    const lines = panelLines({
      goal: "g", rules: ["a rule exists (hidden)"], scores: [1, 2],
      trialIndex: 0, trialsTotal: 3, ticksLeft: 9,
    });
    expect(lines).toContain("  a rule exists (hidden)");
    expect(lines[1]).toBe("trial 1 of 3");
  });
});

describe("replay player", () => {
  function fakeFrames(n: number): FrameMsg[] {
    return Array.from({ length: n }, (_, i) => ({
      type: "frame" as const, session_id: "s", seq: i + 1,
      frame: frame(), reward: 0, trial_done: false, episode_done: i === n - 1,
    }));
  }

  it("steps, clamps at the ends, and pauses", () => {
    const seen: number[] = [];
    const rp = new ReplayPlayer(fakeFrames(3), 4, (_f, i) => seen.push(i));
    rp.step();
    rp.step();
    rp.step();
    rp.step(); // clamped
    expect(seen).toEqual([0, 1, 2]);
    rp.step(-1);
    expect(seen[seen.length - 1]).toBe(1);
    rp.setSpeed(2);
    expect(rp.playing).toBe(false);
  });
});
