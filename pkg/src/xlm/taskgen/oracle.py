"""Solvability oracle: abstract planning over object multisets.

States are multisets of movable templates; frozen objects keep their authored
cells forever. A rule firing or goal witness is validated concretely: find
cells realising the wanted relation while keeping every other rule condition
false (objects not involved are parked pairwise-far). The firing cascade is
then simulated on that configuration with independently re-implemented
placement semantics, which captures forced same-tick chains through
co-spawned objects.

Soundness rests on one property of connected grids: between firings the
player can rearrange every carryable object arbitrarily. Templates guarded by
a hold() rule are the exception (grabbing them fires the rule), so they are
never relocated: they act where they stand. Task families outside the
oracle's envelope (negated or see-relation rule conditions, rule conditions
over two frozen templates) yield an explicit "unknown" verdict.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional

from ..env.geometry import (
    chebyshev,
    grid_distances,
    is_near,
    is_touching,
    line_of_sight,
    row_major_key,
)
from ..env.types import (
    PlayerRef,
    Predicate,
    Relation,
    Template,
    TemplateRef,
)
from .task import Task

FAR = 3  # Chebyshev distance defeating both near and touching


@dataclass
class SolveReport:
    solvable: Optional[bool]  # None = outside the oracle's envelope
    optimal_reward: int
    firing_sequence: tuple[int, ...] = ()
    dead_ends: frozenset = frozenset()
    reason: str = ""

    @property
    def verdict(self) -> str:
        if self.solvable is None:
            return "unknown"
        return "solvable" if self.solvable else "unsolvable"


@dataclass(frozen=True)
class Obj:
    template: Template
    cell: tuple[int, int]
    frozen: bool
    uid: int


@dataclass(frozen=True)
class Config:
    """Concrete arrangement: every alive object has a cell; held objects share
    their holder's cell."""

    objects: tuple[Obj, ...]
    player_cells: tuple[tuple[int, int], ...]
    held: tuple[Optional[int], ...]

    def counts_key(self) -> tuple:
        return tuple(sorted(o.template for o in self.objects if not o.frozen))


class GoalCheck:
    NO = 0
    STABLE = 1
    TRANSIENT = 2


class Solver:
    MAX_STATES = 2000
    MAX_PAIR_ENUM = 4000

    def __init__(self, task: Task):
        self.task = task
        self.world = task.world
        self.game = task.game
        self.walls = task.world.walls
        self.goal = task.game.goals[0]
        self.spawns = tuple(task.world.spawn_for(s)
                            for s in range(task.game.num_players))
        self.reach = grid_distances(self.spawns[0], set(task.world.passable_cells))
        self.cells = sorted(self.reach, key=row_major_key)
        self.hold_locked = {
            t for r in task.game.rules
            if r.condition.relation == Relation.HOLD
            for t in r.condition.templates()
        }
        self._dist_cache: dict = {}
        self._uid = 1000
        self.unknown_reason = self._envelope_check()

    def _envelope_check(self) -> str:
        for r in self.game.rules:
            if r.condition.negated:
                return "negated rule condition"
            if r.condition.relation == Relation.SEE:
                return "see-relation rule condition"
        frozen_templates = {s.template for s in self.task.objects if s.frozen}
        for r in self.game.rules:
            tpls = r.condition.templates()
            if len(tpls) == 2 and all(t in frozen_templates for t in tpls):
                return "rule condition over two frozen templates"
        return ""

    # -- basic helpers -------------------------------------------------------

    def fresh_uid(self) -> int:
        self._uid += 1
        return self._uid

    def rel_ok(self, rel: Relation, ca, cb) -> bool:
        if rel == Relation.NEAR:
            return is_near(ca, cb)
        if rel == Relation.TOUCHING:
            return is_touching(ca, cb)
        if rel == Relation.SEE:
            return line_of_sight(ca, cb, self.walls)
        raise AssertionError(rel)

    def dist(self, a, b) -> Optional[int]:
        if a not in self._dist_cache:
            self._dist_cache[a] = grid_distances(a, set(self.cells))
        return self._dist_cache[a].get(b)

    def initial_config(self) -> Config:
        objs = tuple(
            Obj(s.template, s.cell, s.frozen, i)
            for i, s in enumerate(self.task.objects)
        )
        return Config(objects=objs, player_cells=self.spawns,
                      held=tuple(None for _ in self.spawns))

    # -- concrete predicate evaluation ----------------------------------------

    def binding(self, p: Predicate, cfg: Config):
        if p.relation == Relation.HOLD:
            assert isinstance(p.arg_a, PlayerRef)
            if p.arg_a.index >= len(cfg.player_cells):
                return None
            uid = cfg.held[p.arg_a.index]
            if uid is None:
                return None
            obj = next(o for o in cfg.objects if o.uid == uid)
            assert isinstance(p.arg_b, TemplateRef)
            return (None, uid) if obj.template == p.arg_b.template else None

        def cands(ref):
            if isinstance(ref, PlayerRef):
                if ref.index >= len(cfg.player_cells):
                    return []
                return [(None, cfg.player_cells[ref.index])]
            out = [(o.uid, o.cell) for o in cfg.objects
                   if o.template == ref.template]
            out.sort(key=lambda t: (row_major_key(t[1]), t[0]))
            return out

        for ua, ca in cands(p.arg_a):
            for ub, cb in cands(p.arg_b):
                if ua is not None and ub is not None and ua == ub:
                    continue
                if self.rel_ok(p.relation, ca, cb):
                    return (ua, ub)
        return None

    def holds(self, p: Predicate, cfg: Config) -> bool:
        res = self.binding(p, cfg) is not None
        return (not res) if p.negated else res

    def quiet(self, cfg: Config, skip: frozenset = frozenset()) -> bool:
        return all(
            self.binding(r.condition, cfg) is None
            for i, r in enumerate(self.game.rules) if i not in skip
        )

    # -- arrangement search ----------------------------------------------------

    def arrange(self, cfg: Config, witness: Optional[Predicate],
                quiet_idx: frozenset, extra_quiet: tuple[Predicate, ...] = ()
                ) -> Optional[Config]:
        """Rearrange carryables so `witness` holds (if given), the conditions
        of every rule in quiet_idx are false, and every predicate in
        extra_quiet is false. Returns the new configuration or None."""
        frozen = [o for o in cfg.objects if o.frozen]
        movable = [o for o in cfg.objects if not o.frozen]
        quiet_preds = [self.game.rules[i].condition for i in sorted(quiet_idx)]
        quiet_preds += list(extra_quiet)

        for pins, held in self._witness_pins(witness, movable, frozen):
            out = self._park(cfg, pins, held, movable, frozen, quiet_preds, witness)
            if out is not None:
                return out
        return None

    def _instance_options(self, ref, movable, frozen):
        """Instances an argument may bind, honouring hold-locked immobility."""
        if isinstance(ref, PlayerRef):
            return [None]
        opts = [o for o in frozen if o.template == ref.template]
        movs = [o for o in movable if o.template == ref.template]
        if movs:
            if ref.template in self.hold_locked:
                opts.extend(movs)  # each stands at a distinct, fixed cell
            else:
                opts.append(movs[0])  # interchangeable
        return opts

    def _is_locked(self, inst) -> bool:
        return inst is not None and not inst.frozen \
            and inst.template in self.hold_locked

    def _hop_cells(self, inst) -> list:
        """Cells a hold-locked object can occupy for one grab tick: the player
        stands within grab range and the grab pulls the object onto the
        player's cell. Its own hold() rule only preempts when listed earlier
        than the rule being fired; the caller's quiet set decides that."""
        return [c for c in self.cells if chebyshev(c, inst.cell) <= 1]

    def _witness_pins(self, witness, movable, frozen):
        if witness is None:
            yield {}, {}
            return
        if witness.relation == Relation.HOLD:
            pi = witness.arg_a.index
            if pi >= len(self.spawns):
                return
            for inst in self._instance_options(witness.arg_b, movable, frozen):
                if inst is None or inst.frozen:
                    continue
                # Grab in place (or from an adjacent stand): the object joins
                # the player's cell.
                for h in ([inst.cell] + self._hop_cells(inst)):
                    yield {inst.uid: h, f"p{pi}": h}, {pi: inst.uid}
            return

        for ia in self._instance_options(witness.arg_a, movable, frozen):
            for ib in self._instance_options(witness.arg_b, movable, frozen):
                if ia is not None and ib is not None and ia.uid == ib.uid:
                    continue
                yield from self._pair_pins(witness, ia, ib)

    def _pair_pins(self, witness, ia, ib):
        rel = witness.relation

        def pin(ca, cb, held=None):
            pins = {}
            if ia is None:
                pins[f"p{witness.arg_a.index}"] = ca
            else:
                pins[ia.uid] = ca
            if ib is None:
                pins[f"p{witness.arg_b.index}"] = cb
            else:
                pins[ib.uid] = cb
            if held:
                uid, = held
                pins["p0"] = pins[uid]
                return pins, {0: uid}
            return pins, {}

        def ground_clash(ca, cb, held=None):
            if ca != cb:
                return False
            if ia is None or ib is None:
                return False
            # Same cell is only possible when one side is in hand.
            return held is None

        def fixed_cell(inst):
            if inst is None:
                return None
            if inst.frozen or self._is_locked(inst):
                return inst.cell
            return None

        count = 0
        fa, fb = fixed_cell(ia), fixed_cell(ib)
        variants: list[tuple] = [(fa, fb, None)]
        # A hold-locked object may additionally hop one grab onto the player.
        if self._is_locked(ia):
            variants.append((None, fb, ("a", self._hop_cells(ia))))
        if self._is_locked(ib):
            variants.append((fa, None, ("b", self._hop_cells(ib))))

        for va, vb, hop in variants:
            held = None
            if hop is not None:
                side, hop_cells = hop
            if va is not None and vb is not None:
                if self.rel_ok(rel, va, vb):
                    yield pin(va, vb)
                continue
            if va is not None or vb is not None:
                base = va if va is not None else vb
                a_side_free = va is None
                ring = self._rel_ring(rel, base)
                if hop is not None:
                    ring = [c for c in ring if c in hop[1]]
                for c in ring:
                    ca, cb = (c, base) if a_side_free else (base, c)
                    held = (ia.uid,) if (hop and hop[0] == "a") else \
                           ((ib.uid,) if (hop and hop[0] == "b") else None)
                    if ground_clash(ca, cb, held):
                        continue
                    yield pin(ca, cb, held)
                    count += 1
                    if count > self.MAX_PAIR_ENUM:
                        return
                continue
            # Both sides free: prefer keeping one where it stands.
            preferred = [ib.cell] if ib is not None else []
            preferred += [ia.cell] if ia is not None else []
            seen = set()
            hop_field = hop[1] if hop is not None else None
            for base in preferred + self.cells:
                if base in seen:
                    continue
                seen.add(base)
                ring = self._rel_ring(rel, base)
                if hop_field is not None:
                    ring = [c for c in ring if c in hop_field]
                for c in ring:
                    held = (ia.uid,) if (hop and hop[0] == "a") else \
                           ((ib.uid,) if (hop and hop[0] == "b") else None)
                    if ground_clash(c, base, held):
                        continue
                    yield pin(c, base, held)
                    count += 1
                    if count > self.MAX_PAIR_ENUM:
                        return

    def _rel_ring(self, rel: Relation, around) -> list:
        if rel == Relation.NEAR:
            # Distance 2 first: defeats any touching-rule on the same pair.
            ring = [c for c in self.cells if chebyshev(c, around) == 2]
            inner = [c for c in self.cells if 0 < chebyshev(c, around) <= 1]
            return ring + inner + ([around] if around in self.reach else [])
        if rel == Relation.TOUCHING:
            return [c for c in self.cells if is_touching(c, around)]
        if rel == Relation.SEE:
            out = [c for c in self.cells
                   if c != around and line_of_sight(c, around, self.walls)]
            out.sort(key=lambda c: -chebyshev(c, around))
            return out
        raise AssertionError(rel)

    def _park(self, cfg, pins, held, movable, frozen, quiet_preds, witness
              ) -> Optional[Config]:
        assign: dict[int, tuple] = {}
        players: dict[int, tuple] = {}
        for key, cell in pins.items():
            if isinstance(key, str):
                players[int(key[1:])] = cell
            else:
                assign[key] = cell

        held_uids = set(held.values())
        ground = {c for uid, c in assign.items() if uid not in held_uids}
        anchors = list(assign.values()) + list(players.values()) \
            + [o.cell for o in frozen]

        # Hold-locked objects not already pinned stay where they are.
        rest = []
        for o in movable:
            if o.uid in assign:
                continue
            if o.template in self.hold_locked:
                if o.cell in ground:
                    return None
                assign[o.uid] = o.cell
                ground.add(o.cell)
                anchors.append(o.cell)
            else:
                rest.append(o)

        def far_score(c):
            return min((chebyshev(c, a) for a in anchors), default=FAR)

        candidates = sorted(self.cells, key=lambda c: (-far_score(c), row_major_key(c)))
        frozen_cells = {o.cell for o in frozen}
        budget = [4000]

        def place_rest(i: int) -> bool:
            if i == len(rest):
                return place_players(0)
            if budget[0] <= 0:
                return False
            o = rest[i]
            # Staying put is free; try the current cell before parking spots.
            for c in [o.cell] + candidates:
                if c in ground or c in frozen_cells:
                    continue
                budget[0] -= 1
                assign[o.uid] = c
                if self._partial_quiet(o.template, assign, players, held,
                                       movable, frozen, quiet_preds):
                    ground.add(c)
                    if place_rest(i + 1):
                        return True
                    ground.discard(c)
                del assign[o.uid]
                if budget[0] <= 0:
                    return False
            return False

        def place_players(pi: int) -> bool:
            if pi >= len(self.spawns):
                return True
            if pi in players:
                return place_players(pi + 1)
            for c in [cfg.player_cells[pi]] + candidates:
                if c in frozen_cells or c in players.values():
                    continue
                budget[0] -= 1
                players[pi] = c
                if self._partial_quiet(None, assign, players, held,
                                       movable, frozen, quiet_preds):
                    if place_players(pi + 1):
                        return True
                del players[pi]
                if budget[0] <= 0:
                    return False
            return False

        if not place_rest(0):
            return None

        objs = tuple(frozen) + tuple(
            Obj(o.template, assign[o.uid], False, o.uid) for o in movable
        )
        out = Config(
            objects=objs,
            player_cells=tuple(players[i] for i in range(len(self.spawns))),
            held=tuple(held.get(i) for i in range(len(self.spawns))),
        )
        if witness is not None and not self.holds(witness, out):
            return None
        if any(self.binding(q, out) is not None for q in quiet_preds):
            return None
        return out

    def _partial_quiet(self, changed_template, assign, players, held,
                       movable, frozen, quiet_preds) -> bool:
        """Check quiet predicates among already-placed entities only."""
        by_uid = {o.uid: o for o in movable}
        for q in quiet_preds:
            if changed_template is not None:
                tpls = q.templates()
                involves_player = any(isinstance(r, (PlayerRef,))
                                      for r in (q.arg_a, q.arg_b))
                if changed_template not in tpls and not involves_player:
                    continue
            if q.relation == Relation.HOLD:
                uid = held.get(q.arg_a.index)
                if uid is not None and by_uid[uid].template == q.arg_b.template:
                    return False
                continue

            def cand(ref):
                if isinstance(ref, PlayerRef):
                    return [players[ref.index]] if ref.index in players else []
                cells = [o.cell for o in frozen if o.template == ref.template]
                cells += [assign[o.uid] for o in movable
                          if o.template == ref.template and o.uid in assign]
                return cells

            cells_a = cand(q.arg_a)
            cells_b = cand(q.arg_b)
            same_ref = q.arg_a == q.arg_b
            for i, ca in enumerate(cells_a):
                for j, cb in enumerate(cells_b):
                    if same_ref and i == j:
                        continue
                    if ca == cb and not isinstance(q.arg_a, PlayerRef) \
                            and not isinstance(q.arg_b, PlayerRef) and i == j:
                        continue
                    if self.rel_ok(q.relation, ca, cb):
                        return False
        return True

    # -- firing cascade (independent re-implementation) ------------------------

    def cascade(self, cfg: Config) -> tuple[Config, tuple[int, ...]]:
        """One tick of rule firing on a concrete configuration."""
        objects = {o.uid: o for o in cfg.objects}
        held = list(cfg.held)
        fired: list[int] = []
        fired_set: set[int] = set()
        progress = True
        while progress:
            progress = False
            live = Config(objects=tuple(objects.values()),
                          player_cells=cfg.player_cells, held=tuple(held))
            for ri, rule in enumerate(self.game.rules):
                if ri in fired_set:
                    continue
                b = self.binding(rule.condition, live)
                satisfied = (b is not None) != rule.condition.negated
                if not satisfied:
                    continue
                self._apply(objects, held, cfg.player_cells, rule,
                            b if not rule.condition.negated else None)
                fired.append(ri)
                fired_set.add(ri)
                progress = True
                break
        out = Config(objects=tuple(sorted(objects.values(), key=lambda o: o.uid)),
                     player_cells=cfg.player_cells, held=tuple(held))
        return out, tuple(fired)

    def _apply(self, objects: dict, held: list, player_cells, rule, binding):
        consumed: list[int] = []
        anchor = None
        if binding is not None:
            for uid in binding:
                if uid is None:
                    continue
                obj = objects[uid]
                if anchor is None:
                    anchor = obj.cell
                if obj.frozen:
                    continue
                consumed.append(uid)
        if anchor is None:
            anchor = player_cells[0]

        consumed_cells = []
        for uid in consumed:
            consumed_cells.append(objects[uid].cell)
            del objects[uid]
            for pi, h in enumerate(held):
                if h == uid:
                    held[pi] = None

        held_uids = {h for h in held if h is not None}

        def free(cell):
            if cell not in self.reach:
                return False
            return not any(o.cell == cell and o.uid not in held_uids
                           for o in objects.values())

        used = set()
        for i, spec in enumerate(rule.spawns):
            if i < len(consumed_cells) and consumed_cells[i] not in used \
                    and free(consumed_cells[i]):
                target = consumed_cells[i]
            else:
                target = None
                best_key = None
                for c in self.cells:
                    if c in used or not free(c):
                        continue
                    key = (chebyshev(c, anchor), row_major_key(c))
                    if best_key is None or key < best_key:
                        target, best_key = c, key
            if target is None:
                continue
            uid = self.fresh_uid()
            objects[uid] = Obj(spec.template, target, False, uid)
            used.add(target)

    # -- goal achievement -------------------------------------------------------

    def goal_status(self, cfg: Config) -> tuple[int, Optional[Config]]:
        """(GoalCheck value, witness configuration)."""
        goal = self.goal
        all_idx = frozenset(range(len(self.game.rules)))
        if goal.negated:
            base = Predicate(goal.relation, goal.arg_a, goal.arg_b)
            have_a = self._template_present(goal.arg_a, cfg)
            have_b = self._template_present(goal.arg_b, cfg)
            if not have_a or not have_b:
                out = self.arrange(cfg, None, all_idx)
                return (GoalCheck.STABLE, out) if out is not None else (GoalCheck.NO, None)
            out = self.arrange(cfg, None, all_idx, extra_quiet=(base,))
            return (GoalCheck.STABLE, out) if out is not None else (GoalCheck.NO, None)

        out = self.arrange(cfg, goal, all_idx)
        if out is not None:
            return GoalCheck.STABLE, out
        # Transient: allow rules to fire, check the goal after the cascade.
        out = self.arrange(cfg, goal, frozenset())
        if out is not None:
            after, fired = self.cascade(out)
            if self.holds(goal, after):
                return GoalCheck.TRANSIENT, out
        return GoalCheck.NO, None

    def _template_present(self, ref, cfg: Config) -> bool:
        if isinstance(ref, PlayerRef):
            return True
        return any(o.template == ref.template for o in cfg.objects)

    # -- abstract search ---------------------------------------------------------

    def solve(self, trial_length: Optional[int] = None) -> SolveReport:
        if self.unknown_reason:
            return SolveReport(solvable=None, optimal_reward=0,
                               reason=self.unknown_reason)
        T = trial_length if trial_length is not None else self.task.trial_length
        start = self.initial_config()

        # Pre-solved: the goal already holds at reset and nothing fires at rest.
        pre_solved = self.holds(self.goal, start) and self.quiet(start)

        states: dict[tuple, Config] = {start.counts_key(): start}
        parents: dict[tuple, tuple] = {}
        achieve: dict[tuple, tuple] = {}
        order = [start.counts_key()]
        edges: list[tuple[tuple, int, tuple]] = []
        frontier = [start.counts_key()]
        truncated = False

        while frontier:
            if len(states) > self.MAX_STATES:
                truncated = True
                break
            next_frontier = []
            for key in frontier:
                cfg = states[key]
                status, wit = self.goal_status(cfg)
                achieve[key] = (status, wit)
                for ri in range(len(self.game.rules)):
                    res = self._try_fire(cfg, ri)
                    if res is None:
                        continue
                    fired_cfg, fired = res
                    nkey = fired_cfg.counts_key()
                    edges.append((key, ri, nkey))
                    if nkey not in states:
                        states[nkey] = fired_cfg
                        parents[nkey] = (key, ri)
                        order.append(nkey)
                        next_frontier.append(nkey)
            frontier = next_frontier

        for key in order:
            if key not in achieve:
                achieve[key] = self.goal_status(states[key])

        # solvable-from fixpoint over the abstract graph
        solvable_from = {k: achieve[k][0] != GoalCheck.NO for k in states}
        changed = True
        while changed:
            changed = False
            for (src, ri, dst) in edges:
                if not solvable_from[src] and solvable_from.get(dst, False):
                    solvable_from[src] = True
                    changed = True

        solvable = solvable_from[start.counts_key()]
        if not solvable and truncated:
            return SolveReport(solvable=None, optimal_reward=0,
                               reason="state budget exceeded")

        dead_ends = frozenset(
            ri for (src, ri, dst) in edges
            if solvable_from[src] and not solvable_from.get(dst, True)
        )

        if not solvable:
            return SolveReport(solvable=False, optimal_reward=0,
                               dead_ends=dead_ends)

        # Shortest firing path (by firings) to an achievable state.
        target = min(
            (k for k in states if achieve[k][0] != GoalCheck.NO),
            key=lambda k: self._depth(k, parents),
        )
        path = self._path_to(target, parents)
        status, wit = achieve[target]

        if pre_solved and not path:
            reward = T
        elif status == GoalCheck.TRANSIENT:
            reward = 1
        else:
            steps = self._estimate_steps(path)
            if steps >= 10 ** 6:
                # The cost replay diverged from the abstract plan (cascade
                # side-effects); reachability stands, only the estimate is
                # coarse.
                reward = 1
            else:
                reward = max(1, T - steps + 1)
        return SolveReport(solvable=True, optimal_reward=reward,
                           firing_sequence=tuple(ri for _, ri in path),
                           dead_ends=dead_ends)

    def _depth(self, key, parents) -> int:
        d = 0
        while key in parents:
            key = parents[key][0]
            d += 1
        return d

    def _path_to(self, key, parents) -> list[tuple[tuple, int]]:
        path = []
        while key in parents:
            pkey, ri = parents[key]
            path.append((pkey, ri))
            key = pkey
        path.reverse()
        return path

    def _try_fire(self, cfg: Config, ri: int) -> Optional[tuple[Config, tuple[int, ...]]]:
        """Can the player trigger rule ri from cfg? Returns the post-cascade
        configuration. Tries to keep every other rule quiet first; falls back
        to keeping only earlier rules quiet (the cascade then decides)."""
        rule = self.game.rules[ri]
        n = len(self.game.rules)
        for quiet_idx in (frozenset(set(range(n)) - {ri}),
                          frozenset(range(ri))):
            wcfg = self.arrange(cfg, rule.condition, quiet_idx)
            if wcfg is None:
                continue
            after, fired = self.cascade(wcfg)
            if ri in fired:
                return after, fired
        return None

    # -- step estimation ---------------------------------------------------------

    def arrange_cheapest(self, cfg: Config, witness: Optional[Predicate],
                         quiet_idx: frozenset, player_pos,
                         extra_quiet: tuple[Predicate, ...] = ()
                         ) -> Optional[tuple[Config, int]]:
        """Like arrange(), but scans every witness option and returns the one
        with the lowest walk/grab/carry cost from player_pos."""
        frozen = [o for o in cfg.objects if o.frozen]
        movable = [o for o in cfg.objects if not o.frozen]
        quiet_preds = [self.game.rules[i].condition for i in sorted(quiet_idx)]
        quiet_preds += list(extra_quiet)
        best: Optional[tuple[Config, int]] = None
        for pins, held in self._witness_pins(witness, movable, frozen):
            out = self._park(cfg, pins, held, movable, frozen, quiet_preds, witness)
            if out is None:
                continue
            cost = self._movement_cost(cfg, out, player_pos, witness)
            if best is None or cost < best[1]:
                best = (out, cost)
                if cost == 0:
                    break
        return best

    def _estimate_steps(self, path) -> int:
        """Serialized walk/grab/carry cost of the plan: exact for single-carry
        firings, greedy per firing for deeper plans."""
        current = self.initial_config()
        player = current.player_cells[0]
        steps = 0

        for (key, ri) in path:
            rule = self.game.rules[ri]
            found = None
            for quiet_idx in (frozenset(set(range(len(self.game.rules))) - {ri}),
                              frozenset(range(ri))):
                found = self.arrange_cheapest(current, rule.condition,
                                              quiet_idx, player)
                if found is not None:
                    break
            if found is None:
                return 10 ** 6
            wcfg, cost = found
            steps += max(cost, 1)
            player = self._end_position(current, wcfg, player)
            current, _ = self.cascade(wcfg)

        if self.holds(self.goal, current):
            return max(steps, 1)  # goal landed on the final firing tick
        all_idx = frozenset(range(len(self.game.rules)))
        if self.goal.negated:
            base = Predicate(self.goal.relation, self.goal.arg_a, self.goal.arg_b)
            found = self.arrange_cheapest(current, None, all_idx, player,
                                          extra_quiet=(base,))
        else:
            found = self.arrange_cheapest(current, self.goal, all_idx, player)
            if found is None:
                found = self.arrange_cheapest(current, self.goal, frozenset(), player)
        if found is None:
            return 10 ** 6
        steps += max(found[1], 1)
        return max(steps, 1)

    def _moved_objects(self, cur: Config, want: Config):
        cur_cells = {o.uid: o.cell for o in cur.objects}
        out = []
        for o in want.objects:
            if o.frozen or o.uid not in cur_cells:
                continue
            if cur_cells[o.uid] != o.cell:
                out.append((o.uid, cur_cells[o.uid], o.cell))
        return out

    def _movement_cost(self, cur: Config, want: Config, player, witness) -> int:
        """Walk/grab/carry cost moving the displaced objects one at a time.

        Only witness-relevant movement is charged: parked objects moved purely
        to keep rule conditions quiet are uncommon in generated tasks and the
        optimal player would combine such detours; this estimator stays the
        simple serialized bound used by the hand-traceable tests.
        """
        pos = player
        cost = 0
        held_uids = {h for h in want.held if h is not None}
        moved = self._moved_objects(cur, want)
        moved.sort(key=lambda m: m[0] in held_uids)
        for uid, src, dst in moved:
            step_in = self._grab_walk(pos, src)
            if step_in is None:
                return 10 ** 6
            d1, grab_pos = step_in
            d2 = self.dist(grab_pos, dst)
            if d2 is None:
                return 10 ** 6
            cost += d1 + 1 + d2
            pos = dst
        # A held witness that never changed cell still costs the walk + grab.
        cur_cells = {o.uid: o.cell for o in cur.objects}
        for uid in held_uids:
            if any(uid == m[0] for m in moved):
                continue
            src = cur_cells.get(uid)
            if src is None:
                continue
            step_in = self._grab_walk(pos, src)
            if step_in is None:
                return 10 ** 6
            d1, grab_pos = step_in
            cost += d1 + 1
            pos = grab_pos
        # Player-referencing witnesses pin the player's final cell.
        pin = self._player_pin_cell(want, witness)
        if pin is not None and pos != pin and not held_uids:
            d = self.dist(pos, pin)
            if d is None:
                return 10 ** 6
            cost += d
        return cost

    def _player_pin_cell(self, want: Config, witness: Optional[Predicate]):
        if witness is None:
            return None
        for ref in (witness.arg_a, witness.arg_b):
            if isinstance(ref, PlayerRef) and ref.index < len(want.player_cells):
                return want.player_cells[ref.index]
        return None

    def _end_position(self, cur: Config, want: Config, player):
        moved = self._moved_objects(cur, want)
        held_uids = {h for h in want.held if h is not None}
        if held_uids:
            for pi, uid in enumerate(want.held):
                if uid is not None:
                    return want.player_cells[pi]
        if moved:
            return moved[-1][2]
        pin = self._player_pin_cell(want, None)
        return pin if pin is not None else player

    def _grab_walk(self, pos, obj_cell) -> Optional[tuple[int, tuple]]:
        """(walk steps, stand cell) to bring the object into grab range."""
        best = None
        for c in self.cells:
            if chebyshev(c, obj_cell) <= 1:
                d = self.dist(pos, c)
                if d is not None and (best is None or d < best[0]):
                    best = (d, c)
        return best


def oracle_solve(task: Task, trial_length: Optional[int] = None) -> SolveReport:
    return Solver(task).solve(trial_length)
