// Headless scripted client (node): joins a server, plays fixed action
// scripts through the turn-based clock, and returns the full message log.
// Used by the end-to-end tests and handy for protocol debugging.

import WebSocket from "ws";

import { SessionClient, SocketLike } from "./client.js";
import { FrameMsg, ServerMsg } from "./protocol.js";

export interface ScriptedResult {
  messages: ServerMsg[];
  frames: FrameMsg[];
  trialRewards: number[];
  frameRewardSums: number[];
}

function wrap(ws: WebSocket): SocketLike {
  const like: SocketLike = {
    send: (d) => ws.send(d),
    close: () => ws.close(),
    onmessage: null,
    onclose: null,
    onopen: null,
  };
  ws.on("message", (data) => like.onmessage?.({ data: data.toString() }));
  ws.on("close", () => like.onclose?.());
  ws.on("open", () => like.onopen?.());
  return like;
}

export async function playScripted(
  url: string,
  taskId: string,
  k: number,
  actionsPerTrial: { move: number; grab: boolean; drop: boolean }[],
  seed = 7,
): Promise<ScriptedResult> {
  const ws = new WebSocket(url);
  const sock = wrap(ws);
  const client = new SessionClient(sock);
  const messages: ServerMsg[] = [];
  const frames: FrameMsg[] = [];
  const frameRewardSums: number[] = [];
  let cursor = 0;
  let trial = 0;

  const done = new Promise<number[]>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("episode timeout")), 30_000);
    client.onMessage((msg) => {
      messages.push(msg);
      if (msg.type === "error") {
        clearTimeout(timer);
        reject(new Error(msg.error));
        return;
      }
      if (msg.type === "briefing") {
        trial = msg.trial_index;
        cursor = 0;
        frameRewardSums[trial] = 0;
        client.ready();
        const a = actionsPerTrial[cursor++ % actionsPerTrial.length];
        client.sendAction(a.move, a.grab, a.drop);
      } else if (msg.type === "frame") {
        frames.push(msg);
        frameRewardSums[trial] += msg.reward;
        if (!msg.trial_done && !msg.episode_done) {
          const a = actionsPerTrial[cursor++ % actionsPerTrial.length];
          client.sendAction(a.move, a.grab, a.drop);
        }
      } else if (msg.type === "episode_end") {
        clearTimeout(timer);
        resolve(msg.trial_rewards);
      }
    });
  });

  await new Promise<void>((resolve) => {
    sock.onopen = () => resolve();
  });
  client.join({ task_id: taskId, k, tick_rate: 0, seed });
  const trialRewards = await done;
  client.close();
  return { messages, frames, trialRewards, frameRewardSums };
}
