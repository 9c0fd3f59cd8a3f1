"""Play sessions: the trial protocol for one human (or scripted) player.

A session steps its own simulator at the server's tick rate with a
sticky-action model (the latest received action repeats until replaced).
Briefings hold indefinitely until the client sends `ready`. The environment
resets between trials; the session, like the player's memory, persists.
Completed sessions append to the score sink in the exact agent-record schema;
incomplete (expired) sessions are recorded but excluded from aggregation.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..env.render import render_topdown
from ..env.sim import Simulator
from ..env.types import Action
from ..evalh.scores import ScoreRecord
from ..policies import Policy
from ..taskgen.task import Task

PHASE_BRIEFING = "briefing"
PHASE_PLAYING = "playing"
PHASE_FINISHED = "finished"
PHASE_EXPIRED = "expired"

HUMAN_KS = (1, 2, 3, 5, 8)


@dataclass
class Session:
    session_id: str
    task: Task
    k: int
    seat: int
    seed: int
    co_policy: Optional[Policy] = None
    tick_rate: float = 4.0
    phase: str = PHASE_BRIEFING
    trial_index: int = 0
    seq: int = 0
    sticky_action: Action = Action.NOOP
    action_log: list = field(default_factory=list)  # (trial, tick, move, grab, drop)
    trial_rewards: list = field(default_factory=list)
    sim: Simulator = None  # type: ignore[assignment]
    last_heard: float = field(default_factory=time.time)

    def __post_init__(self):
        if self.sim is None:
            self.sim = self.task.simulator(k=self.k, seed=self.seed)
        if self.co_policy is not None:
            self.co_policy.begin_episode(self.task, self.k, 1 - self.seat,
                                         self.seed + 1)
        self.trial_rewards = [0.0] * self.k

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    # -- protocol steps ---------------------------------------------------------

    def briefing_payload(self) -> dict:
        from ..env.render import describe_rule
        from ..env.types import describe_predicate
        game = self.task.game
        return {
            "goal_text": describe_predicate(game.goals[self.seat]),
            "rules": [describe_rule(game, i, self.seat)
                      for i in range(len(game.rules))],
            "trial_index": self.trial_index,
            "trials_total": self.k,
            "trials_remaining": self.k - self.trial_index,
            "trial_length": self.task.trial_length,
            "tick_rate": self.tick_rate,
            "seat": self.seat,
        }

    def set_action(self, move: int, grab: bool, drop: bool) -> None:
        if self.phase != PHASE_PLAYING:
            raise ValueError("action outside a running trial")
        self.sticky_action = Action(move=move, grab=grab, drop=drop)

    def ready(self) -> None:
        if self.phase != PHASE_BRIEFING:
            raise ValueError("ready outside briefing")
        self.phase = PHASE_PLAYING
        self.sticky_action = Action.NOOP

    def tick(self) -> dict:
        """Advance one simulator step; returns the frame payload plus
        boundary markers."""
        if self.phase != PHASE_PLAYING:
            raise ValueError("tick outside playing phase")
        a = self.sticky_action
        if self.sim.num_players == 2:
            other = self.co_policy.act(self.sim, 1 - self.seat) \
                if self.co_policy else Action.NOOP
            actions = (a, other) if self.seat == 0 else (other, a)
        else:
            actions = (a,)
        self.action_log.append((self.trial_index, self.sim.state.tick,
                                a.move, int(a.grab), int(a.drop)))
        res = self.sim.step(actions)
        self.trial_rewards[self.trial_index] += res.rewards[self.seat]
        # One grab/drop per press: movement sticks, manipulations do not.
        self.sticky_action = Action(move=a.move)
        out = {
            "frame": render_topdown(self.sim, viewer=self.seat,
                                    trial_scores=[int(r) for r in
                                                  self.trial_rewards]).to_dict(),
            "reward": res.rewards[self.seat],
            "trial_done": res.trial_done,
            "episode_done": res.episode_done,
        }
        if res.episode_done:
            self.phase = PHASE_FINISHED
        elif res.trial_done:
            self.sim.reset_trial()
            self.trial_index += 1
            self.phase = PHASE_BRIEFING
        return out

    def expire(self) -> None:
        if self.phase != PHASE_FINISHED:
            self.phase = PHASE_EXPIRED

    # -- records -----------------------------------------------------------------

    def score_record(self, agent_id: str = "human") -> ScoreRecord:
        return ScoreRecord(agent_id=agent_id, task_id=self.task.id_str,
                           k=self.k, repetition=self.seed,
                           trial_rewards=tuple(self.trial_rewards))

    def replay_payload(self) -> dict:
        return {
            "session_id": self.session_id,
            "task_id": self.task.id_str,
            "k": self.k,
            "seat": self.seat,
            "seed": self.seed,
            "tick_rate": self.tick_rate,
            "complete": self.phase == PHASE_FINISHED,
            "actions": self.action_log,
            "trial_rewards": self.trial_rewards,
        }


@dataclass
class SessionStore:
    """One replayable action-log file per session, plus the score sink."""

    root: Path

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    def save(self, session: Session) -> Path:
        path = self.root / f"{session.session_id}.json"
        path.write_text(json.dumps(session.replay_payload(), indent=2))
        return path

    def load(self, session_id: str) -> dict:
        return json.loads((self.root / f"{session_id}.json").read_text())

    def append_score(self, session: Session, agent_id: str = "human") -> None:
        if session.phase != PHASE_FINISHED:
            return  # incomplete sessions never reach the aggregate table
        rec = session.score_record(agent_id)
        with open(self.root / "scores.jsonl", "a") as f:
            from dataclasses import asdict
            f.write(json.dumps(asdict(rec)) + "\n")


def replay_session(task: Task, payload: dict) -> list[float]:
    """Re-run a recorded action log through the simulator; returns per-trial
    rewards (bit-exact for completed sessions)."""
    sim = task.simulator(k=payload["k"], seed=payload["seed"])
    seat = payload["seat"]
    co = None
    if sim.num_players == 2:
        # Replays of two-player sessions re-run the recorded seat only when a
        # deterministic co-player policy is supplied by the caller.
        raise NotImplementedError("two-player replay needs the co-player policy")
    totals = [0.0] * payload["k"]
    for (trial, tick, move, grab, drop) in payload["actions"]:
        if sim.state.trial_index != trial:
            sim.reset_trial()
        res = sim.step((Action(move=move, grab=bool(grab), drop=bool(drop)),))
        totals[trial] += res.rewards[seat]
    return totals


def assign_task_order(player_id: str, task_ids: list[str],
                      similar: dict[str, str] | None = None,
                      min_separation: int = 2) -> list[str]:
    """Deterministic per-player task permutation with separation between
    tasks sharing a similarity key."""
    import random
    rng = random.Random(("order", player_id).__repr__())
    similar = similar or {}
    for attempt in range(200):
        order = list(task_ids)
        rng.shuffle(order)
        ok = True
        last_seen: dict[str, int] = {}
        for i, t in enumerate(order):
            key = similar.get(t)
            if key is None:
                continue
            if key in last_seen and i - last_seen[key] < min_separation:
                ok = False
                break
            last_seen[key] = i
        if ok:
            return order
    return order
