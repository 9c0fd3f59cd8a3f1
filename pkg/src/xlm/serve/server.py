"""Websocket session server.

Two clock modes per session: real-time (the server advances the simulator at
`tick_rate` with sticky actions, the human-play mode) and turn-based
(`tick_rate: 0`; every action message advances exactly one tick, which makes
scripted clients and tests deterministic).
"""

from __future__ import annotations

import asyncio
import json
import logging
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import websockets

from ..policies import NetPolicy, NoopPolicy, Policy, RandomPolicy
from ..taskgen.task import Task
from .protocol import (
    PROTOCOL_VERSION,
    ProtocolError,
    decode_message,
    encode_message,
    server_message,
)
from .session import PHASE_BRIEFING, PHASE_FINISHED, PHASE_PLAYING, Session, SessionStore

log = logging.getLogger("xlm.serve")


class PlayServer:
    def __init__(self, tasks: list[Task], store_dir, host: str = "127.0.0.1",
                 port: int = 8765, idle_timeout: float = 120.0,
                 co_player_net=None):
        self.tasks = {t.id_str: t for t in tasks}
        self.store = SessionStore(Path(store_dir))
        self.host = host
        self.port = port
        self.idle_timeout = idle_timeout
        self.co_player_net = co_player_net
        self.sessions: dict[str, Session] = {}
        self._server = None
        self._session_counter = 0

    # -- session lifecycle ------------------------------------------------------

    def create_session(self, task_id: str, k: int, seat: int = 0,
                       co_player: Optional[str] = None,
                       tick_rate: float = 4.0,
                       seed: Optional[int] = None) -> Session:
        if task_id not in self.tasks:
            raise ValueError(f"unknown task {task_id}")
        task = self.tasks[task_id]
        if task.game.num_players == 2 and co_player is None:
            co_player = "noop"
        co = None
        if co_player == "random":
            co = RandomPolicy(0)
        elif co_player == "noop":
            co = NoopPolicy()
        elif co_player == "net":
            if self.co_player_net is None:
                raise ValueError("no co-player network loaded")
            co = NetPolicy(self.co_player_net, seed=1)
        self._session_counter += 1
        session = Session(
            session_id=f"s{self._session_counter:05d}-{uuid.uuid4().hex[:8]}",
            task=task, k=k, seat=seat,
            seed=seed if seed is not None else self._session_counter,
            co_policy=co, tick_rate=tick_rate,
        )
        self.sessions[session.session_id] = session
        return session

    # -- message handling ---------------------------------------------------------

    async def handle(self, ws) -> None:
        session: Optional[Session] = None
        ticker: Optional[asyncio.Task] = None
        try:
            async for raw in ws:
                try:
                    msg = decode_message(raw,
                                         expect={"join", "ready", "action",
                                                 "heartbeat"})
                except ProtocolError as e:
                    await ws.send(encode_message(
                        {"type": "error", "session_id": "", "seq": 0,
                         "error": str(e)}))
                    continue

                if msg["type"] == "join":
                    session = self.create_session(
                        msg["task_id"], int(msg.get("k", 1)),
                        seat=int(msg.get("seat", 0)),
                        co_player=msg.get("co_player"),
                        tick_rate=float(msg.get("tick_rate", 4.0)),
                        seed=msg.get("seed"),
                    )
                    await ws.send(encode_message(server_message(
                        "joined", session.session_id, session.next_seq(),
                        task_id=session.task.id_str, k=session.k,
                        seat=session.seat)))
                    await self._send_briefing(ws, session)
                    continue

                if session is None:
                    await ws.send(encode_message(
                        {"type": "error", "session_id": "", "seq": 0,
                         "error": "join first"}))
                    continue
                session.last_heard = time.time()

                if msg["type"] == "heartbeat":
                    continue
                if msg["type"] == "ready":
                    if session.phase != PHASE_BRIEFING:
                        await self._send_error(ws, session, "not in briefing")
                        continue
                    session.ready()
                    if session.tick_rate > 0:
                        ticker = asyncio.create_task(
                            self._run_trial(ws, session))
                    continue
                if msg["type"] == "action":
                    if session.phase != PHASE_PLAYING:
                        await self._send_error(ws, session,
                                               "action outside a trial")
                        continue
                    session.set_action(int(msg.get("move", 0)),
                                       bool(msg.get("grab", False)),
                                       bool(msg.get("drop", False)))
                    if session.tick_rate == 0:
                        await self._advance(ws, session)
        finally:
            if ticker:
                ticker.cancel()
            if session is not None and session.phase != PHASE_FINISHED:
                session.expire()
                self.store.save(session)

    async def _send_briefing(self, ws, session: Session) -> None:
        await ws.send(encode_message(server_message(
            "briefing", session.session_id, session.next_seq(),
            **session.briefing_payload())))

    async def _send_error(self, ws, session: Session, text: str) -> None:
        await ws.send(encode_message(server_message(
            "error", session.session_id, session.next_seq(), error=text)))

    async def _advance(self, ws, session: Session) -> None:
        out = session.tick()
        await ws.send(encode_message(server_message(
            "frame", session.session_id, session.next_seq(),
            frame=out["frame"], reward=out["reward"],
            trial_done=out["trial_done"], episode_done=out["episode_done"])))
        if out["episode_done"]:
            await self._finish(ws, session)
        elif out["trial_done"]:
            await ws.send(encode_message(server_message(
                "trial_end", session.session_id, session.next_seq(),
                trial_rewards=session.trial_rewards[:session.trial_index])))
            await self._send_briefing(ws, session)

    async def _run_trial(self, ws, session: Session) -> None:
        period = 1.0 / session.tick_rate
        try:
            while session.phase == PHASE_PLAYING:
                t0 = time.monotonic()
                await self._advance(ws, session)
                delay = period - (time.monotonic() - t0)
                if delay > 0:
                    await asyncio.sleep(delay)
        except (websockets.ConnectionClosed, asyncio.CancelledError):
            pass

    async def _finish(self, ws, session: Session) -> None:
        self.store.append_score(session)
        self.store.save(session)
        await ws.send(encode_message(server_message(
            "episode_end", session.session_id, session.next_seq(),
            trial_rewards=session.trial_rewards,
            complete=True)))

    # -- expiry + serving ----------------------------------------------------------

    async def _expire_loop(self) -> None:
        while True:
            await asyncio.sleep(5.0)
            now = time.time()
            for s in list(self.sessions.values()):
                if s.phase not in (PHASE_FINISHED,) \
                        and now - s.last_heard > self.idle_timeout:
                    s.expire()
                    self.store.save(s)
                    self.sessions.pop(s.session_id, None)

    async def serve_forever(self) -> None:
        async with websockets.serve(self.handle, self.host, self.port):
            expiry = asyncio.create_task(self._expire_loop())
            try:
                await asyncio.Future()
            finally:
                expiry.cancel()

    async def start(self):
        self._server = await websockets.serve(self.handle, self.host, self.port)
        return self._server

    async def stop(self):
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
