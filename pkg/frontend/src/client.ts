// Session client: joins, relays input, applies server messages to the state.
// The websocket implementation is injected so the same client runs in the
// browser (native WebSocket) and under node tests (the `ws` package).

import { ActionMsg, decodeServerMessage, encodeClientMessage, ServerMsg } from "./protocol.js";
import { ClientState } from "./state.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onopen: (() => void) | null;
}

export interface JoinRequest {
  task_id: string;
  k: number;
  seat?: number;
  co_player?: string | null;
  tick_rate?: number;
  seed?: number;
}

export class SessionClient {
  state = new ClientState();
  private handlers: ((msg: ServerMsg) => void)[] = [];

  constructor(private ws: SocketLike) {
    ws.onmessage = (ev) => {
      const msg = decodeServerMessage(String(ev.data));
      this.state.apply(msg);
      for (const h of this.handlers) h(msg);
    };
    ws.onclose = () => {
      if (this.state.phase !== "finished") this.state.phase = "disconnected";
    };
  }

  onMessage(h: (msg: ServerMsg) => void): void {
    this.handlers.push(h);
  }

  join(req: JoinRequest): void {
    this.ws.send(encodeClientMessage({ type: "join", ...req }));
  }

  ready(): void {
    this.ws.send(
      encodeClientMessage({ type: "ready", session_id: this.state.sessionId }),
    );
  }

  sendAction(move: number, grab: boolean, drop: boolean): void {
    const msg: ActionMsg = {
      type: "action",
      session_id: this.state.sessionId,
      move,
      grab,
      drop,
    };
    this.ws.send(encodeClientMessage(msg as unknown as Record<string, unknown> & { type: string }));
  }

  heartbeat(): void {
    this.ws.send(
      encodeClientMessage({ type: "heartbeat", session_id: this.state.sessionId }),
    );
  }

  close(): void {
    this.ws.close();
  }
}
