"""Task = world x game x co-player spec, plus deterministic object placement.

Placement is `quiet`: no production-rule condition may hold in the initial
configuration (with players at their spawns), so nothing fires until the
player causes it. A positive goal must not hold at reset either; a negated
goal is placed so its underlying relation holds (the player's job is then to
break it).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Optional

from ..env.geometry import chebyshev, is_near, is_touching, line_of_sight, row_major_key
from ..env.sim import Simulator
from ..env.types import (
    EpisodeConfig,
    Game,
    GridWorld,
    ObjectSpec,
    PlayerRef,
    Predicate,
    Relation,
    TemplateRef,
)
from .params import GenerationError, GenParams


@dataclass(frozen=True)
class Task:
    world_id: int
    game_id: int
    world: GridWorld
    game: Game
    objects: tuple[ObjectSpec, ...]  # placed initial objects
    trial_length: int
    co_player: Optional[str] = None  # None | "random" | "pool:<idx>" | "scripted"

    @property
    def task_id(self) -> tuple:
        return (self.world_id, self.game_id, self.co_player)

    @property
    def id_str(self) -> str:
        co = self.co_player or "none"
        return f"w{self.world_id}-g{self.game_id}-{co}"

    def simulator(self, k: int, seed: int) -> Simulator:
        cfg = EpisodeConfig(k=k, trial_length=self.trial_length, seed=seed)
        return Simulator(self.world, self.game, cfg, initial_objects=self.objects)


def _relation_holds(rel: Relation, ca, cb, walls) -> bool:
    if rel == Relation.NEAR:
        return is_near(ca, cb)
    if rel == Relation.TOUCHING:
        return is_touching(ca, cb)
    if rel == Relation.SEE:
        return line_of_sight(ca, cb, walls)
    return False


def _static_predicate_holds(p: Predicate, cells_by_template, player_cells, walls) -> bool:
    """Evaluate a (non-negated reading of a) predicate on a static placement."""
    if p.relation == Relation.HOLD:
        return False  # nobody holds anything at rest
    def cells_of(ref):
        if isinstance(ref, PlayerRef):
            return [player_cells[ref.index]] if ref.index < len(player_cells) else []
        return cells_by_template.get(ref.template, [])
    cells_a = cells_of(p.arg_a)
    cells_b = cells_of(p.arg_b)
    for i, ca in enumerate(cells_a):
        for j, cb in enumerate(cells_b):
            if p.arg_a == p.arg_b and i == j:
                continue
            if _relation_holds(p.relation, ca, cb, walls):
                return True
    return False


def materialize_objects(world: GridWorld, game: Game, seed: int,
                        params: GenParams = GenParams()) -> tuple[ObjectSpec, ...]:
    """Assign cells to the game's unplaced objects, respecting quiet placement."""
    rng = random.Random(("place", seed).__repr__())
    player_cells = [world.spawn_for(s) for s in range(game.num_players)]
    free = sorted(set(world.passable_cells) - set(player_cells), key=row_major_key)
    specs = list(game.initial_objects)
    need = [i for i, s in enumerate(specs) if s.cell is None]
    if len(specs) > len(free):
        raise GenerationError("object budget exceeds free cells")

    goal = game.goals[0]
    for _ in range(params.placement_retries):
        cells = rng.sample(free, len(specs))
        placed = [replace(s, cell=s.cell if s.cell is not None else cells[i])
                  for i, s in enumerate(specs)]
        taken = [p.cell for p in placed]
        if len(set(taken)) != len(taken):
            continue
        by_template: dict = {}
        for p in placed:
            by_template.setdefault(p.template, []).append(p.cell)
        quiet = all(
            not _static_predicate_holds(r.condition, by_template, player_cells, world.walls)
            for r in game.rules
        )
        if not quiet:
            continue
        goal_rel = _static_predicate_holds(goal, by_template, player_cells, world.walls)
        if goal.negated:
            # The underlying relation should hold at reset when its objects
            # exist, otherwise the task is trivially pre-solved. Negated-hold
            # goals are inherently pre-solved ("don't pick it up"), so they
            # place freely.
            if goal.relation == Relation.HOLD:
                pass
            elif any(isinstance(a, TemplateRef) and a.template not in by_template
                     for a in (goal.arg_a, goal.arg_b)):
                pass  # goal objects appear later via rules; placement is free
            elif not goal_rel:
                continue
        else:
            if goal_rel:
                continue
        return tuple(placed)
    raise GenerationError("quiet placement failed within retry budget")


def max_concurrent_objects(game: Game) -> int:
    """Upper bound on simultaneously alive objects (for search budgets)."""
    alive = len(game.initial_objects)
    peak = alive
    for rule in game.rules:
        consumed = sum(1 for r in (rule.condition.arg_a, rule.condition.arg_b)
                       if isinstance(r, TemplateRef))
        alive = alive - consumed + len(rule.spawns)
        peak = max(peak, alive)
    return max(peak, len(game.initial_objects))
