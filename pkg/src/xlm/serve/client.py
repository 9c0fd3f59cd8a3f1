"""Scripted protocol client: drives sessions for tests and for recording
policy demonstrations through the human-play path.

The client keeps a local simulator mirror (same task, same seed) so scripted
policies can decide from full state; the mirror steps in lockstep with the
acknowledged frames, which also cross-checks the server's determinism.
"""

from __future__ import annotations

import asyncio
import json
from typing import Optional

import websockets

from ..env.types import Action
from ..policies import NoopPolicy, Policy
from .protocol import decode_message, encode_message


class ScriptedClient:
    """Plays one session over the wire using a Policy for decisions; uses the
    turn-based clock (tick_rate 0) so runs replay deterministically."""

    def __init__(self, url: str):
        self.url = url
        self.messages: list[dict] = []

    async def play(self, task, k: int, policy: Policy,
                   seat: int = 0, seed: int = 7,
                   co_player: Optional[str] = None) -> dict:
        async with websockets.connect(self.url) as ws:
            await ws.send(encode_message({
                "type": "join", "task_id": task.id_str, "k": k, "seat": seat,
                "tick_rate": 0, "seed": seed, "co_player": co_player,
            }))
            joined = await self._recv(ws)
            assert joined["type"] == "joined"
            session_id = joined["session_id"]

            mirror = task.simulator(k=k, seed=seed)
            mirror_co = NoopPolicy() if mirror.num_players == 2 else None
            policy.begin_episode(task, k, seat, seed)
            policy.begin_trial(mirror, 0)

            last_seq = 0
            pending: Optional[Action] = None
            summary = None
            while True:
                msg = await self._recv(ws)
                if msg["seq"] <= last_seq:
                    raise AssertionError("sequence numbers must increase")
                last_seq = msg["seq"]

                if msg["type"] == "briefing":
                    if msg["trial_index"] > 0:
                        mirror.reset_trial()
                        policy.begin_trial(mirror, msg["trial_index"])
                    await ws.send(encode_message({
                        "type": "ready", "session_id": session_id}))
                    pending = policy.act(mirror, seat)
                    await self._send_action(ws, session_id, pending)
                elif msg["type"] == "frame":
                    # The sticky model clears grab/drop after each tick; the
                    # mirror applies exactly the acknowledged action.
                    if pending is not None:
                        if mirror.num_players == 2:
                            other = Action.NOOP
                            acts = (pending, other) if seat == 0 else (other, pending)
                            mirror.step(acts)
                        else:
                            mirror.step((pending,))
                    if msg["episode_done"] or msg["trial_done"]:
                        pending = None
                        continue
                    pending = policy.act(mirror, seat)
                    await self._send_action(ws, session_id, pending)
                elif msg["type"] == "trial_end":
                    continue
                elif msg["type"] == "episode_end":
                    summary = msg
                    break
                elif msg["type"] == "error":
                    raise RuntimeError(f"server error: {msg['error']}")
            return summary

    async def _send_action(self, ws, session_id: str, action: Action) -> None:
        await ws.send(encode_message({
            "type": "action", "session_id": session_id,
            "move": action.move, "grab": action.grab, "drop": action.drop,
        }))

    async def _recv(self, ws) -> dict:
        msg = decode_message(await ws.recv())
        self.messages.append(msg)
        return msg
