"""Deterministic grid simulator: movement, grab/drop, production rules, trials.

Step order within a tick: movement (players in index order), then grab/drop,
then production-rule firing, then reward evaluation on the resulting state.
All randomness flows through the state's own generator, so a (task, config,
action sequence, seed) tuple replays bit-exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .geometry import (
    Cell,
    ORTH_DELTAS,
    chebyshev,
    is_near,
    is_touching,
    line_of_sight,
    row_major_key,
)
from .types import (
    Action,
    EpisodeConfig,
    Game,
    GridWorld,
    HiddenObjectRef,
    MOVE_DELTAS,
    ObjectInstance,
    ObjectSpec,
    PlayerRef,
    Predicate,
    Relation,
    SpecError,
    TemplateRef,
)


@dataclass
class PlayerState:
    cell: Cell
    facing: int  # 1 N, 2 E, 3 S, 4 W
    holding: Optional[int] = None  # object id


@dataclass
class FiredEvent:
    rule_index: int
    consumed_ids: tuple[int, ...]
    spawned_ids: tuple[int, ...]


@dataclass
class EnvState:
    objects: dict[int, ObjectInstance]
    players: list[PlayerState]
    tick: int
    trial_index: int
    rewards: tuple[float, ...]
    rng: random.Random
    next_object_id: int

    def alive_instances(self) -> list[ObjectInstance]:
        return sorted(self.objects.values(), key=lambda o: (row_major_key(o.cell), o.id))


@dataclass
class StepResult:
    rewards: tuple[float, ...]
    trial_done: bool
    episode_done: bool
    fired: list[FiredEvent] = field(default_factory=list)


class Simulator:
    """Owns one episode of one task. Single-threaded; instances independent."""

    def __init__(self, world: GridWorld, game: Game, config: EpisodeConfig,
                 initial_objects: Optional[tuple[ObjectSpec, ...]] = None):
        self.world = world
        self.game = game
        self.config = config
        if initial_objects is None:
            initial_objects = world.initial_objects + game.initial_objects
        for spec in initial_objects:
            if spec.cell is None:
                raise SpecError("simulator requires placed objects; materialise the task first")
            if not world.is_passable(spec.cell):
                raise SpecError(f"initial object at {spec.cell} is not on a passable cell")
        self.initial_objects = tuple(initial_objects)
        self.num_players = game.num_players
        self.state: EnvState = None  # type: ignore[assignment]
        self.reset_episode()

    # -- lifecycle ---------------------------------------------------------

    def reset_episode(self) -> EnvState:
        rng = random.Random(self.config.seed)
        self.state = self._initial_state(rng, trial_index=0)
        return self.state

    def reset_trial(self) -> EnvState:
        """Restore the initial configuration for the next trial.

        Player facing is re-sampled uniformly; the episode generator persists so
        replays stay deterministic. Agent memory is untouched by design: the
        caller owns it.
        """
        st = self.state
        if st.tick != self.config.trial_length:
            raise SpecError("reset_trial called mid-trial")
        if st.trial_index + 1 >= self.config.k:
            raise SpecError("reset_trial called after the final trial")
        self.state = self._initial_state(st.rng, trial_index=st.trial_index + 1)
        return self.state

    def _initial_state(self, rng: random.Random, trial_index: int) -> EnvState:
        objects: dict[int, ObjectInstance] = {}
        for i, spec in enumerate(self.initial_objects):
            objects[i] = ObjectInstance(
                id=i, shape=spec.shape, color=spec.color,
                cell=spec.cell, frozen=spec.frozen,
            )
        players = []
        for slot in range(self.num_players):
            players.append(PlayerState(
                cell=self.world.spawn_for(slot),
                facing=rng.randint(1, 4),
            ))
        return EnvState(
            objects=objects,
            players=players,
            tick=0,
            trial_index=trial_index,
            rewards=tuple(0.0 for _ in range(self.num_players)),
            rng=rng,
            next_object_id=len(self.initial_objects),
        )

    # -- predicate evaluation ----------------------------------------------

    def eval_predicate(self, state: EnvState, p: Predicate) -> bool:
        result = self._eval_relation(state, p)
        return (not result) if p.negated else result

    def _entity_cells(self, state: EnvState, ref) -> list[tuple[Optional[int], Cell]]:
        """(instance id or None for players, cell) for every match, row-major."""
        if isinstance(ref, PlayerRef):
            if ref.index >= len(state.players):
                raise SpecError(f"no player {ref.index} in this game")
            return [(None, state.players[ref.index].cell)]
        if isinstance(ref, HiddenObjectRef):
            raise SpecError("hidden-object references are observational only")
        matches = [
            (o.id, o.cell)
            for o in state.objects.values()
            if o.template == ref.template
        ]
        matches.sort(key=lambda m: (row_major_key(m[1]), m[0]))
        return matches

    def _eval_relation(self, state: EnvState, p: Predicate) -> bool:
        return self._find_binding(state, p) is not None

    def _find_binding(self, state: EnvState, p: Predicate) -> Optional[tuple[Optional[int], Optional[int]]]:
        """First satisfying (id_a, id_b) pair in deterministic order, else None."""
        if p.relation == Relation.HOLD:
            assert isinstance(p.arg_a, PlayerRef)
            if p.arg_a.index >= len(state.players):
                raise SpecError(f"no player {p.arg_a.index} in this game")
            player = state.players[p.arg_a.index]
            if player.holding is None:
                return None
            held = state.objects[player.holding]
            assert isinstance(p.arg_b, TemplateRef)
            if held.template == p.arg_b.template:
                return (None, held.id)
            return None

        cells_a = self._entity_cells(state, p.arg_a)
        cells_b = self._entity_cells(state, p.arg_b)
        blocked = self.world.walls
        for ia, ca in cells_a:
            for ib, cb in cells_b:
                if ia is not None and ib is not None and ia == ib:
                    continue  # a relation never binds an instance to itself
                if p.relation == Relation.NEAR:
                    ok = is_near(ca, cb)
                elif p.relation == Relation.TOUCHING:
                    ok = is_touching(ca, cb)
                elif p.relation == Relation.SEE:
                    ok = line_of_sight(ca, cb, blocked)
                else:  # pragma: no cover
                    raise SpecError(f"unknown relation {p.relation}")
                if ok:
                    return (ia, ib)
        return None

    # -- stepping ------------------------------------------------------------

    def step(self, actions: tuple[Action, ...]) -> StepResult:
        st = self.state
        if len(actions) != self.num_players:
            raise SpecError(f"expected {self.num_players} actions, got {len(actions)}")
        if st.tick >= self.config.trial_length:
            raise SpecError("step called on a finished trial; call reset_trial")

        # Movement, players in index order; the earlier player wins contested cells.
        for idx, action in enumerate(actions):
            if action.move:
                self._move_player(st, idx, action.move)

        # Grab/drop. Drop applies only when holding, grab only when empty-handed.
        for idx, action in enumerate(actions):
            player = st.players[idx]
            if action.drop and player.holding is not None:
                self._drop(st, idx)
            if action.grab and player.holding is None:
                self._grab(st, idx)

        fired = self._fire_rules(st)

        rewards = tuple(
            1.0 if self.eval_predicate(st, self.game.goals[i]) else 0.0
            for i in range(self.num_players)
        )
        st.rewards = rewards
        st.tick += 1
        trial_done = st.tick == self.config.trial_length
        episode_done = trial_done and st.trial_index == self.config.k - 1
        return StepResult(rewards=rewards, trial_done=trial_done,
                          episode_done=episode_done, fired=fired)

    def _move_player(self, st: EnvState, idx: int, move: int) -> None:
        player = st.players[idx]
        player.facing = move
        dx, dy = MOVE_DELTAS[move]
        target = (player.cell[0] + dx, player.cell[1] + dy)
        if not self.world.is_passable(target):
            return
        if any(o.frozen and o.cell == target for o in st.objects.values()):
            return
        if any(p.cell == target for j, p in enumerate(st.players) if j != idx):
            return
        player.cell = target
        if player.holding is not None:
            st.objects[player.holding].cell = target

    def _grab(self, st: EnvState, idx: int) -> None:
        player = st.players[idx]
        held_ids = {p.holding for p in st.players if p.holding is not None}
        candidates = [
            o for o in st.objects.values()
            if not o.frozen and o.id not in held_ids
            and chebyshev(o.cell, player.cell) <= 1
        ]
        if not candidates:
            return
        candidates.sort(key=lambda o: (chebyshev(o.cell, player.cell),
                                       row_major_key(o.cell), o.id))
        chosen = candidates[0]
        chosen.held_by = idx
        chosen.cell = player.cell
        player.holding = chosen.id

    def _drop(self, st: EnvState, idx: int) -> None:
        player = st.players[idx]
        obj = st.objects[player.holding]
        dx, dy = MOVE_DELTAS[player.facing]
        faced = (player.cell[0] + dx, player.cell[1] + dy)
        for target in [faced] + [(player.cell[0] + ddx, player.cell[1] + ddy)
                                 for ddx, ddy in ORTH_DELTAS]:
            if self._cell_free(st, target):
                obj.cell = target
                obj.held_by = None
                player.holding = None
                return
        # Nowhere to put it: keep holding.

    def _cell_free(self, st: EnvState, cell: Cell) -> bool:
        if not self.world.is_passable(cell):
            return False
        held_ids = {p.holding for p in st.players if p.holding is not None}
        return not any(o.cell == cell and o.id not in held_ids
                       for o in st.objects.values())

    # -- production rules ----------------------------------------------------

    def _fire_rules(self, st: EnvState) -> list[FiredEvent]:
        """Apply rules in list order, re-scanning after each application.

        Each rule applies at most once per tick; a fired rule's spawns can
        therefore enable later (or earlier, not-yet-fired) rules within the
        same tick.
        """
        fired: list[FiredEvent] = []
        fired_indices: set[int] = set()
        progress = True
        while progress:
            progress = False
            for ri, rule in enumerate(self.game.rules):
                if ri in fired_indices:
                    continue
                binding = self._find_binding(st, rule.condition)
                satisfied = (binding is not None) != rule.condition.negated
                if not satisfied:
                    continue
                event = self._apply_rule(st, ri, binding if not rule.condition.negated else None)
                fired.append(event)
                fired_indices.add(ri)
                progress = True
                break  # re-scan from the top against the new state
        return fired

    def _apply_rule(self, st: EnvState, rule_index: int,
                    binding: Optional[tuple[Optional[int], Optional[int]]]) -> FiredEvent:
        rule = self.game.rules[rule_index]
        consumed: list[int] = []
        anchor_cells: list[Cell] = []
        if binding is not None:
            for oid in binding:
                if oid is None:
                    continue
                obj = st.objects[oid]
                anchor_cells.append(obj.cell)
                if obj.frozen:
                    continue  # frozen objects are anchors, never consumed
                consumed.append(oid)
        # Anchor for surplus spawn placement: first consumed cell, else the
        # condition witness, else the first player.
        if anchor_cells:
            anchor = anchor_cells[0]
        else:
            anchor = st.players[0].cell

        consumed_cells = []
        for oid in consumed:
            obj = st.objects.pop(oid)
            consumed_cells.append(obj.cell)
            for p in st.players:
                if p.holding == oid:
                    p.holding = None

        spawned: list[int] = []
        used: set[Cell] = set()
        for i, spec in enumerate(rule.spawns):
            target: Optional[Cell] = None
            if i < len(consumed_cells) and consumed_cells[i] not in used \
                    and self._cell_free(st, consumed_cells[i]):
                target = consumed_cells[i]
            else:
                target = self._nearest_free_cell(st, anchor, used)
            if target is None:
                continue  # no free cell anywhere: the spawn is skipped
            oid = st.next_object_id
            st.next_object_id += 1
            st.objects[oid] = ObjectInstance(
                id=oid, shape=spec.shape, color=spec.color, cell=target, frozen=False,
            )
            used.add(target)
            spawned.append(oid)
        return FiredEvent(rule_index=rule_index, consumed_ids=tuple(consumed),
                          spawned_ids=tuple(spawned))

    def _nearest_free_cell(self, st: EnvState, anchor: Cell,
                           also_used: set[Cell]) -> Optional[Cell]:
        best: Optional[Cell] = None
        best_key = None
        for cell in self.world.passable_cells:
            if cell in also_used or not self._cell_free(st, cell):
                continue
            key = (chebyshev(cell, anchor), row_major_key(cell))
            if best_key is None or key < best_key:
                best, best_key = cell, key
        return best
