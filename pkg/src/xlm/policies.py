"""Policies usable as players or co-players: scripted baselines, the
oracle-backed planner, and network wrappers."""

from __future__ import annotations

import random
from typing import Optional

import torch

from .env.geometry import chebyshev, grid_distances, row_major_key
from .env.sim import Simulator
from .env.types import ALL_ACTIONS, Action, MOVE_DELTAS
from .taskgen.oracle import Solver
from .taskgen.task import Task


class Policy:
    name = "policy"

    def begin_episode(self, task: Task, k: int, seat: int, seed: int) -> None:
        pass

    def begin_trial(self, sim: Simulator, trial_index: int) -> None:
        pass

    def act(self, sim: Simulator, seat: int) -> Action:
        raise NotImplementedError


class NoopPolicy(Policy):
    name = "noop"

    def act(self, sim: Simulator, seat: int) -> Action:
        return Action.NOOP


class RandomPolicy(Policy):
    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def begin_episode(self, task: Task, k: int, seat: int, seed: int) -> None:
        self.rng = random.Random((seed, task.id_str, seat).__repr__())

    def act(self, sim: Simulator, seat: int) -> Action:
        return self.rng.choice(ALL_ACTIONS)


class OraclePolicy(Policy):
    """Executes the solvability oracle's plan: walk, grab, carry, let rules
    fire. Replans at each trial start; idles when the oracle has no plan."""

    name = "oracle"

    def begin_episode(self, task: Task, k: int, seat: int, seed: int) -> None:
        self.task = task
        self.queue: list[Action] = []
        self.planned_for = -1

    def begin_trial(self, sim: Simulator, trial_index: int) -> None:
        self.queue = self._plan(sim)
        self.planned_for = trial_index

    def act(self, sim: Simulator, seat: int) -> Action:
        if sim.state.trial_index != self.planned_for:
            self.begin_trial(sim, sim.state.trial_index)
        if self.queue:
            return self.queue.pop(0)
        return Action.NOOP

    # -- plan construction ---------------------------------------------------

    def _plan(self, sim: Simulator) -> list[Action]:
        try:
            solver = Solver(self.task)
            if solver.unknown_reason:
                return []
            report = solver.solve()
        except Exception:
            return []
        if not report.solvable:
            return []
        passable = set(self.task.world.passable_cells)
        actions: list[Action] = []
        pos = sim.state.players[0].cell

        current = solver.initial_config()
        if solver.holds(solver.goal, current) and solver.quiet(current):
            return []  # pre-solved: don't act

        def walk(dst_pred) -> Optional[tuple]:
            """Append moves from pos to the nearest cell satisfying dst_pred."""
            nonlocal pos
            dist = grid_distances(pos, passable)
            targets = [c for c in dist if dst_pred(c)]
            if not targets:
                return None
            goal_cell = min(targets, key=lambda c: (dist[c], row_major_key(c)))
            # Reconstruct one shortest path greedily.
            back = grid_distances(goal_cell, passable)
            cur = pos
            while cur != goal_cell:
                for move, (dx, dy) in MOVE_DELTAS.items():
                    nxt = (cur[0] + dx, cur[1] + dy)
                    if nxt in passable and back.get(nxt, 1 << 30) == back[cur] - 1:
                        actions.append(Action(move=move))
                        cur = nxt
                        break
                else:
                    return None
            pos = cur
            return goal_cell

        for (key, ri) in self._plan_path(solver, report):
            rule = solver.game.rules[ri]
            found = None
            n = len(solver.game.rules)
            for quiet_idx in (frozenset(set(range(n)) - {ri}), frozenset(range(ri))):
                found = solver.arrange_cheapest(current, rule.condition,
                                                quiet_idx, pos)
                if found is not None:
                    break
            if found is None:
                return actions
            wcfg, _ = found
            self._execute_move(solver, current, wcfg, walk, actions,
                               witness=rule.condition)
            current, _ = solver.cascade(wcfg)

        if not solver.holds(solver.goal, current):
            goal = solver.goal
            all_idx = frozenset(range(len(solver.game.rules)))
            if goal.negated:
                from .env.types import Predicate
                base = Predicate(goal.relation, goal.arg_a, goal.arg_b)
                found = solver.arrange_cheapest(current, None, all_idx, pos,
                                                extra_quiet=(base,))
            else:
                found = solver.arrange_cheapest(current, goal, all_idx, pos)
                if found is None:
                    found = solver.arrange_cheapest(current, goal, frozenset(), pos)
            if found is not None:
                self._execute_move(solver, current, found[0], walk, actions,
                                   witness=None if goal.negated else goal)
        return actions

    def _plan_path(self, solver, report):
        # Recover the firing path by replaying the report's sequence.
        return [(None, ri) for ri in report.firing_sequence]

    def _execute_move(self, solver, current, want, walk, actions,
                      witness=None) -> None:
        cur_cells = {o.uid: o.cell for o in current.objects}
        held_uids = {h for h in want.held if h is not None}
        moved = [(o.uid, cur_cells[o.uid], o.cell) for o in want.objects
                 if not o.frozen and o.uid in cur_cells
                 and cur_cells[o.uid] != o.cell]
        moved.sort(key=lambda m: m[0] in held_uids)
        for uid, src, dst in moved:
            # Stand on the object's cell: grab prefers distance 0, so this
            # disambiguates when several objects are in range.
            if walk(lambda c, s=src: c == s) is None:
                return
            actions.append(Action(grab=True))
            if walk(lambda c, d=dst: c == d) is None:
                return
            # Rules bind held objects at the player's cell; no drop needed.
        for uid in held_uids:
            if any(uid == m[0] for m in moved):
                continue
            src = cur_cells.get(uid)
            if src is None:
                continue
            if walk(lambda c, s=src: c == s) is None:
                return
            actions.append(Action(grab=True))
        # Player-referencing witnesses pin seat 0's final cell: walk there.
        if witness is not None and not held_uids and not moved:
            from .env.types import PlayerRef
            for ref in (witness.arg_a, witness.arg_b):
                if isinstance(ref, PlayerRef) and ref.index == 0:
                    target = want.player_cells[0]
                    walk(lambda c, tc=target: c == tc)
                    break


class NetPolicy(Policy):
    """Single-seat wrapper around an AgentNetwork for scripted-style use."""

    name = "net"

    def __init__(self, net, sample: bool = True, seed: int = 0):
        self.net = net
        self.sample = sample
        self.gen = torch.Generator().manual_seed(seed)
        self.state = None
        self.last_action: Optional[Action] = None
        self.last_reward = 0.0
        self.k = 1

    def begin_episode(self, task: Task, k: int, seat: int, seed: int) -> None:
        self.state = self.net.initial_state(1)
        self.gen = torch.Generator().manual_seed(seed)
        self.last_action = None
        self.last_reward = 0.0
        self.k = k

    def observe_reward(self, reward: float) -> None:
        self.last_reward = reward

    def act(self, sim: Simulator, seat: int) -> Action:
        from .env.observe import build_observation
        from .nn.encoder import FlatObs
        obs = build_observation(sim, seat, self.last_action, self.last_reward)
        fo = FlatObs.from_observations([obs])
        logits, value, self.state = self.net.act(fo, self.state)
        groups = []
        for l in logits:
            probs = torch.softmax(l[0], dim=-1)
            if self.sample:
                groups.append(int(torch.multinomial(probs, 1, generator=self.gen)))
            else:
                groups.append(int(probs.argmax()))
        action = Action(move=groups[0], grab=bool(groups[1]), drop=bool(groups[2]))
        self.last_action = action
        return action
