// Browser entry: connect form, canvas grid, briefing/rule panel, score strip.

import { SessionClient, SocketLike } from "./client.js";
import { keyToAction } from "./input.js";
import { FrameMsg } from "./protocol.js";
import { DrawSurface, drawFrame, panelLines } from "./render.js";
import { ReplayPlayer } from "./replay.js";

const CELL = 40;

function canvasSurface(ctx: CanvasRenderingContext2D, w: number, h: number): DrawSurface {
  return {
    clear: () => ctx.clearRect(0, 0, w, h),
    fillRect: (x, y, ww, hh, color) => {
      ctx.fillStyle = color;
      ctx.fillRect(x, y, ww, hh);
    },
    strokeRect: (x, y, ww, hh, color) => {
      ctx.strokeStyle = color;
      ctx.strokeRect(x, y, ww, hh);
    },
    fillCircle: (cx, cy, r, color) => {
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc(cx, cy, r, 0, Math.PI * 2);
      ctx.fill();
    },
    fillTriangle: (x1, y1, x2, y2, x3, y3, color) => {
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.moveTo(x1, y1);
      ctx.lineTo(x2, y2);
      ctx.lineTo(x3, y3);
      ctx.closePath();
      ctx.fill();
    },
    text: (x, y, s, color) => {
      ctx.fillStyle = color;
      ctx.font = "12px monospace";
      ctx.fillText(s, x, y);
    },
  };
}

function el<T extends HTMLElement>(id: string): T {
  const out = document.getElementById(id);
  if (!out) throw new Error(`missing element ${id}`);
  return out as T;
}

export function start(): void {
  const canvas = el<HTMLCanvasElement>("grid");
  const ctx = canvas.getContext("2d")!;
  const panel = el<HTMLPreElement>("panel");
  const status = el<HTMLDivElement>("status");
  const maskedBox = el<HTMLInputElement>("masked");
  const frames: FrameMsg[] = [];
  let client: SessionClient | null = null;
  let replay: ReplayPlayer | null = null;

  function redraw(): void {
    if (!client) return;
    const f = replay?.current() ?? client.state.frame;
    if (f) {
      canvas.width = f.frame.width * CELL;
      canvas.height = f.frame.height * CELL;
      drawFrame(canvasSurface(ctx, canvas.width, canvas.height), f.frame, {
        cell: CELL,
        masked: maskedBox.checked,
        viewerSeat: client.state.seat,
      });
      panel.textContent = panelLines({
        goal: f.frame.goal_text,
        rules: f.frame.rule_panel,
        scores: f.frame.scores,
        trialIndex: f.frame.trial_index,
        trialsTotal: f.frame.trials_total,
        ticksLeft: f.frame.ticks_left,
      }).join("\n");
    } else if (client.state.briefing) {
      const b = client.state.briefing;
      panel.textContent = [
        `trial ${b.trial_index + 1} of ${b.trials_total}: read the briefing,`,
        "press Enter when ready.",
        `goal: ${b.goal_text}`,
        "rules:",
        ...b.rules.map((r) => `  ${r}`),
      ].join("\n");
    }
    status.textContent = `phase: ${client.state.phase}`
      + (client.state.errorText ? ` | ${client.state.errorText}` : "");
  }

  el<HTMLButtonElement>("connect").onclick = () => {
    const url = el<HTMLInputElement>("server").value;
    const taskId = el<HTMLInputElement>("task").value;
    const k = parseInt(el<HTMLInputElement>("k").value, 10);
    const ws = new WebSocket(url) as unknown as SocketLike;
    client = new SessionClient(ws);
    client.onMessage((msg) => {
      if (msg.type === "frame") frames.push(msg);
      redraw();
    });
    (ws as unknown as WebSocket).onopen = () => {
      client!.join({ task_id: taskId, k });
      redraw();
    };
  };

  el<HTMLButtonElement>("replayBtn").onclick = () => {
    if (!client || frames.length === 0) return;
    replay = new ReplayPlayer(frames.slice(), 4, () => redraw());
    replay.play();
  };

  window.addEventListener("keydown", (ev) => {
    if (!client) return;
    const mapped = keyToAction(ev.key);
    if (mapped === null) return;
    ev.preventDefault();
    if (mapped === "ready") {
      client.ready();
    } else if (client.state.phase === "playing") {
      client.sendAction(mapped.move, mapped.grab, mapped.drop);
    }
  });
}

if (typeof document !== "undefined" && document.getElementById("grid")) {
  start();
}
