"""Exhaustive goal-reachability over the full simulator state space.

This is the independent check route against the abstract oracle: a BFS over
(player pose, held slot, exact object cells) whose transition function mirrors
the simulator's semantics instruction for instruction. Objects are kept in
creation order so binding tie-breaks resolve exactly as in the simulator.

Single-player tasks only; the agreement suite runs on tiny worlds where this
search stays tractable.
"""

from __future__ import annotations

from collections import deque
from typing import Optional

from ..env.geometry import chebyshev, is_near, is_touching, line_of_sight, row_major_key
from ..env.types import (
    MOVE_DELTAS,
    PlayerRef,
    Predicate,
    Relation,
    TemplateRef,
)
from .task import Task

# state = (player_cell, facing, held_index, objects)
# objects = tuple of (template, cell, frozen) in creation (id) order
# held_index indexes into objects, -1 when empty-handed


class SearchLimit(RuntimeError):
    pass


class FullSearch:
    def __init__(self, task: Task, max_states: int = 2_000_000):
        if task.game.num_players != 1:
            raise ValueError("full-state search supports single-player tasks")
        self.task = task
        self.world = task.world
        self.rules = task.game.rules
        self.goal = task.game.goals[0]
        self.walls = task.world.walls
        self.passable = set(task.world.passable_cells)
        self.cells_sorted = sorted(self.passable, key=row_major_key)
        self.spawn = task.world.spawn_for(0)
        self.max_states = max_states
        self._los_cache: dict = {}

    # -- relations -----------------------------------------------------------

    def _los(self, a, b) -> bool:
        key = (a, b) if a <= b else (b, a)
        hit = self._los_cache.get(key)
        if hit is None:
            hit = line_of_sight(a, b, self.walls)
            self._los_cache[key] = hit
        return hit

    def _rel(self, rel, ca, cb) -> bool:
        if rel == Relation.NEAR:
            return is_near(ca, cb)
        if rel == Relation.TOUCHING:
            return is_touching(ca, cb)
        return self._los(ca, cb)

    # -- predicate binding (mirrors Simulator._find_binding) ------------------

    def _binding(self, pred: Predicate, player_cell, held_idx, objects):
        if pred.relation == Relation.HOLD:
            if held_idx < 0:
                return None
            tpl, cell, frozen = objects[held_idx]
            if tpl == pred.arg_b.template:
                return (None, held_idx)
            return None

        def cands(ref):
            if isinstance(ref, PlayerRef):
                return [(None, player_cell)]
            out = [(i, o[1]) for i, o in enumerate(objects) if o[0] == ref.template]
            out.sort(key=lambda t: (row_major_key(t[1]), t[0]))
            return out

        for ia, ca in cands(pred.arg_a):
            for ib, cb in cands(pred.arg_b):
                if ia is not None and ib is not None and ia == ib:
                    continue
                if self._rel(pred.relation, ca, cb):
                    return (ia, ib)
        return None

    def _pred_holds(self, pred, player_cell, held_idx, objects) -> bool:
        res = self._binding(pred, player_cell, held_idx, objects) is not None
        return (not res) if pred.negated else res

    # -- one step (mirrors Simulator.step) -------------------------------------

    def step(self, state, move: int, grab: bool, drop: bool):
        player, facing, held, objects = state
        objects = list(objects)

        if move:
            facing = move
            dx, dy = MOVE_DELTAS[move]
            target = (player[0] + dx, player[1] + dy)
            blocked = target not in self.passable or any(
                o[2] and o[1] == target for o in objects
            )
            if not blocked:
                player = target
                if held >= 0:
                    tpl, _, fr = objects[held]
                    objects[held] = (tpl, target, fr)

        if drop and held >= 0:
            dx, dy = MOVE_DELTAS[facing]
            faced = (player[0] + dx, player[1] + dy)
            targets = [faced] + [(player[0] + ddx, player[1] + ddy)
                                 for ddx, ddy in ((0, -1), (1, 0), (0, 1), (-1, 0))]
            ground = {o[1] for i, o in enumerate(objects) if i != held}
            for t in targets:
                if t in self.passable and t not in ground:
                    tpl, _, fr = objects[held]
                    objects[held] = (tpl, t, fr)
                    held = -1
                    break
        if grab and held < 0:
            cands = [
                (chebyshev(o[1], player), row_major_key(o[1]), i)
                for i, o in enumerate(objects)
                if not o[2] and chebyshev(o[1], player) <= 1
            ]
            if cands:
                cands.sort()
                idx = cands[0][2]
                tpl, _, fr = objects[idx]
                objects[idx] = (tpl, player, fr)
                held = idx

        held, objects = self._fire_rules(player, held, objects)
        reward = self._pred_holds(self.goal, player, held, tuple(objects))
        return (player, facing, held, tuple(objects)), reward

    def _fire_rules(self, player, held, objects: list):
        fired = set()
        progress = True
        while progress:
            progress = False
            for ri, rule in enumerate(self.rules):
                if ri in fired:
                    continue
                b = self._binding(rule.condition, player, held, tuple(objects))
                satisfied = (b is not None) != rule.condition.negated
                if not satisfied:
                    continue
                held, objects = self._apply_rule(player, held, objects, rule,
                                                 b if not rule.condition.negated else None)
                fired.add(ri)
                progress = True
                break
        return held, objects

    def _apply_rule(self, player, held, objects: list, rule, binding):
        consumed: list[int] = []
        anchor = None
        if binding is not None:
            for idx in binding:
                if idx is None:
                    continue
                tpl, cell, frozen = objects[idx]
                if anchor is None:
                    anchor = cell
                if frozen:
                    continue
                consumed.append(idx)
        if anchor is None:
            anchor = player

        consumed_cells = [objects[i][1] for i in consumed]
        keep = [i for i in range(len(objects)) if i not in consumed]
        remap = {old: new for new, old in enumerate(keep)}
        objects = [objects[i] for i in keep]
        if held in consumed:
            held = -1
        elif held >= 0:
            held = remap[held]

        held_cells = {objects[held][1]} if held >= 0 else set()
        used = set()
        for i, spec in enumerate(rule.spawns):
            ground = {o[1] for j, o in enumerate(objects) if j != held}
            target = None
            if i < len(consumed_cells):
                c = consumed_cells[i]
                if c not in used and c in self.passable and c not in ground:
                    target = c
            if target is None:
                best_key = None
                for c in self.cells_sorted:
                    if c in used or c in ground:
                        continue
                    key = (chebyshev(c, anchor), row_major_key(c))
                    if best_key is None or key < best_key:
                        target, best_key = c, key
            if target is None:
                continue
            objects.append((spec.template, target, False))
            used.add(target)
        return held, objects

    # -- search ----------------------------------------------------------------

    def goal_reachable(self) -> bool:
        initial_objects = tuple(
            (s.template, s.cell, s.frozen) for s in self.task.objects
        )
        seen = set()
        queue = deque()
        for facing in (1, 2, 3, 4):
            st = (self.spawn, facing, -1, initial_objects)
            if st not in seen:
                seen.add(st)
                queue.append(st)

        actions = [(m, g, d) for m in range(5) for g, d in ((False, False), (True, False), (False, True))]
        while queue:
            state = queue.popleft()
            for move, grab, drop in actions:
                nxt, reward = self.step(state, move, grab, drop)
                if reward:
                    return True
                if nxt not in seen:
                    if len(seen) >= self.max_states:
                        raise SearchLimit(f"exceeded {self.max_states} states")
                    seen.add(nxt)
                    queue.append(nxt)
        return False


def goal_reachable(task: Task, max_states: int = 2_000_000) -> bool:
    return FullSearch(task, max_states=max_states).goal_reachable()
