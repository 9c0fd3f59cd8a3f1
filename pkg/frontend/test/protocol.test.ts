import { describe, expect, it } from "vitest";

import {
  decodeServerMessage,
  encodeClientMessage,
  ProtocolError,
} from "../src/protocol.js";
import { ClientState } from "../src/state.js";
import { keyToAction } from "../src/input.js";

describe("protocol codec", () => {
  it("decodes well-formed server messages", () => {
    const text = JSON.stringify({
      proto: "xlm-proto/1",
      type: "joined",
      session_id: "s1",
      seq: 1,
      task_id: "t",
      k: 3,
      seat: 0,
    });
    const msg = decodeServerMessage(text);
    expect(msg.type).toBe("joined");
  });

  it("rejects version mismatches", () => {
    const text = JSON.stringify({ proto: "xlm-proto/2", type: "frame", seq: 1 });
    expect(() => decodeServerMessage(text)).toThrow(ProtocolError);
  });

  it("rejects unknown message types", () => {
    const text = JSON.stringify({ proto: "xlm-proto/1", type: "mystery", seq: 1 });
    expect(() => decodeServerMessage(text)).toThrow(ProtocolError);
  });

  it("stamps the protocol version on outgoing messages", () => {
    const out = JSON.parse(encodeClientMessage({ type: "ready", session_id: "s" }));
    expect(out.proto).toBe("xlm-proto/1");
  });
});

describe("client state", () => {
  function msg(type: string, seq: number, extra: Record<string, unknown> = {}) {
    return decodeServerMessage(
      JSON.stringify({ proto: "xlm-proto/1", type, session_id: "s1", seq, ...extra }),
    );
  }

  it("walks the briefing/playing/finished phases", () => {
    const st = new ClientState();
    st.apply(msg("joined", 1, { task_id: "t", k: 2, seat: 0 }));
    st.apply(msg("briefing", 2, {
      goal_text: "g", rules: [], trial_index: 0, trials_total: 2,
      trials_remaining: 2, trial_length: 5, tick_rate: 0, seat: 0,
    }));
    expect(st.phase).toBe("briefing");
    st.apply(msg("frame", 3, {
      frame: fakeFrame(), reward: 0, trial_done: false, episode_done: false,
    }));
    expect(st.phase).toBe("playing");
    st.apply(msg("episode_end", 4, { trial_rewards: [1, 2], complete: true }));
    expect(st.phase).toBe("finished");
    expect(st.trialRewards).toEqual([1, 2]);
  });

  it("rejects out-of-order sequence numbers", () => {
    const st = new ClientState();
    st.apply(msg("joined", 5, { task_id: "t", k: 1, seat: 0 }));
    expect(() => st.apply(msg("error", 5, { error: "x" }))).toThrow(ProtocolError);
    expect(() => st.apply(msg("error", 4, { error: "x" }))).toThrow(ProtocolError);
  });

  it("covers every server message type", () => {
    // Exhaustiveness: each declared type is either handled or listed ignored.
    const covered = new Set([...ClientState.HANDLED, ...ClientState.IGNORED]);
    for (const t of ["joined", "briefing", "frame", "trial_end", "episode_end", "error"]) {
      expect(covered.has(t)).toBe(true);
    }
  });
});

describe("input mapping", () => {
  it("maps movement, grab, drop and ready", () => {
    expect(keyToAction("ArrowUp")).toEqual({ move: 1, grab: false, drop: false });
    expect(keyToAction("a")).toEqual({ move: 4, grab: false, drop: false });
    expect(keyToAction(" ")).toEqual({ move: 0, grab: true, drop: false });
    expect(keyToAction("x")).toEqual({ move: 0, grab: false, drop: true });
    expect(keyToAction("Enter")).toBe("ready");
    expect(keyToAction("q")).toBeNull();
  });
});

function fakeFrame() {
  return {
    width: 3, height: 3, walls: [], objects: [], players: [
      { index: 0, x: 1, y: 1, facing: 1, holding: null },
    ],
    goal_text: "g", rule_panel: [], scores: [0], trial_index: 0,
    trials_total: 2, ticks_left: 5,
  };
}
