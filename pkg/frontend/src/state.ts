// Client-side session state: a cursor over server messages. The client never
// simulates; deleting it cannot change a recorded score.

import {
  BriefingMsg,
  EpisodeEndMsg,
  FrameMsg,
  ProtocolError,
  ServerMsg,
} from "./protocol.js";

export type Phase = "disconnected" | "joining" | "briefing" | "playing" | "finished" | "error";

export class ClientState {
  phase: Phase = "disconnected";
  sessionId = "";
  seat = 0;
  lastSeq = 0;
  briefing: BriefingMsg | null = null;
  frame: FrameMsg | null = null;
  trialRewards: number[] = [];
  errorText = "";
  // Every server message type must be either handled or deliberately ignored.
  static readonly HANDLED = ["joined", "briefing", "frame", "trial_end", "episode_end", "error"];
  static readonly IGNORED: string[] = [];

  apply(msg: ServerMsg): void {
    if (msg.seq <= this.lastSeq) {
      throw new ProtocolError(`out-of-order message: seq ${msg.seq} after ${this.lastSeq}`);
    }
    this.lastSeq = msg.seq;
    switch (msg.type) {
      case "joined":
        this.sessionId = msg.session_id;
        this.seat = msg.seat;
        this.phase = "joining";
        break;
      case "briefing":
        this.briefing = msg;
        this.phase = "briefing";
        break;
      case "frame":
        this.frame = msg;
        this.phase = msg.episode_done ? "finished" : "playing";
        break;
      case "trial_end":
        this.trialRewards = msg.trial_rewards.slice();
        break;
      case "episode_end":
        this.trialRewards = msg.trial_rewards.slice();
        this.phase = "finished";
        break;
      case "error":
        this.errorText = msg.error;
        break;
      default: {
        const never: never = msg;
        throw new ProtocolError(`unhandled message ${(never as ServerMsg).type}`);
      }
    }
  }
}
