"""Wire protocol "xlm-proto/1": JSON text messages over a persistent
bidirectional channel (websocket text frames).

Every server message carries the session id and a per-session monotonically
increasing sequence number. Concealed rule content never appears on the wire:
briefing panels are built from the viewer-masked rule descriptions.

Client -> server:  join, ready, action, heartbeat
Server -> client:  joined, briefing, frame, trial_end, episode_end, error
"""

from __future__ import annotations

import json
from typing import Any

PROTOCOL_VERSION = "xlm-proto/1"

CLIENT_TYPES = {"join", "ready", "action", "heartbeat"}
SERVER_TYPES = {"joined", "briefing", "frame", "trial_end", "episode_end", "error"}


class ProtocolError(ValueError):
    pass


def encode_message(msg: dict) -> str:
    if "type" not in msg:
        raise ProtocolError("message lacks a type")
    out = dict(msg)
    out.setdefault("proto", PROTOCOL_VERSION)
    return json.dumps(out, separators=(",", ":"), sort_keys=True)


def decode_message(text: str, expect: set[str] | None = None) -> dict:
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"malformed JSON: {e}") from e
    if not isinstance(msg, dict) or "type" not in msg:
        raise ProtocolError("message must be an object with a type")
    proto = msg.get("proto", PROTOCOL_VERSION)
    if proto != PROTOCOL_VERSION:
        raise ProtocolError(f"protocol version mismatch: {proto}")
    if expect is not None and msg["type"] not in expect:
        raise ProtocolError(f"unexpected message type {msg['type']}")
    return msg


def server_message(type_: str, session_id: str, seq: int, **fields) -> dict:
    if type_ not in SERVER_TYPES:
        raise ProtocolError(f"not a server message type: {type_}")
    return {"type": type_, "session_id": session_id, "seq": seq, **fields}
