// Wire protocol "xlm-proto/1": JSON text frames over a websocket.
// The server is authoritative; the client renders only what it is sent.

export const PROTOCOL_VERSION = "xlm-proto/1";

export interface RenderFrame {
  width: number;
  height: number;
  walls: [number, number][];
  objects: {
    id: number;
    shape: string;
    color: string;
    x: number;
    y: number;
    frozen: boolean;
    held_by: number | null;
  }[];
  players: { index: number; x: number; y: number; facing: number; holding: number | null }[];
  goal_text: string;
  rule_panel: string[];
  scores: number[];
  trial_index: number;
  trials_total: number;
  ticks_left: number;
}

export interface BriefingMsg {
  type: "briefing";
  session_id: string;
  seq: number;
  goal_text: string;
  rules: string[];
  trial_index: number;
  trials_total: number;
  trials_remaining: number;
  trial_length: number;
  tick_rate: number;
  seat: number;
}

export interface FrameMsg {
  type: "frame";
  session_id: string;
  seq: number;
  frame: RenderFrame;
  reward: number;
  trial_done: boolean;
  episode_done: boolean;
}

export interface JoinedMsg {
  type: "joined";
  session_id: string;
  seq: number;
  task_id: string;
  k: number;
  seat: number;
}

export interface TrialEndMsg {
  type: "trial_end";
  session_id: string;
  seq: number;
  trial_rewards: number[];
}

export interface EpisodeEndMsg {
  type: "episode_end";
  session_id: string;
  seq: number;
  trial_rewards: number[];
  complete: boolean;
}

export interface ErrorMsg {
  type: "error";
  session_id: string;
  seq: number;
  error: string;
}

export type ServerMsg =
  | JoinedMsg
  | BriefingMsg
  | FrameMsg
  | TrialEndMsg
  | EpisodeEndMsg
  | ErrorMsg;

export interface ActionMsg {
  type: "action";
  session_id: string;
  move: number; // 0 none, 1 N, 2 E, 3 S, 4 W
  grab: boolean;
  drop: boolean;
}

export class ProtocolError extends Error {}

export function decodeServerMessage(text: string): ServerMsg {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (e) {
    throw new ProtocolError(`malformed JSON: ${e}`);
  }
  const msg = raw as Record<string, unknown>;
  if (typeof msg !== "object" || msg === null || typeof msg.type !== "string") {
    throw new ProtocolError("message must be an object with a type");
  }
  const proto = (msg.proto as string) ?? PROTOCOL_VERSION;
  if (proto !== PROTOCOL_VERSION) {
    throw new ProtocolError(`protocol version mismatch: ${proto}`);
  }
  const known = ["joined", "briefing", "frame", "trial_end", "episode_end", "error"];
  if (!known.includes(msg.type)) {
    throw new ProtocolError(`unknown server message type ${msg.type}`);
  }
  return msg as unknown as ServerMsg;
}

export function encodeClientMessage(
  msg: Record<string, unknown> & { type: string },
): string {
  return JSON.stringify({ proto: PROTOCOL_VERSION, ...msg });
}
