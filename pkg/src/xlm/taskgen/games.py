"""Game sampling: goals, backward-built rule chains, dead ends, hiding masks."""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Optional

from ..env.types import (
    ALL_TEMPLATES,
    Color,
    Game,
    HidingMask,
    ObjectSpec,
    PlayerRef,
    Predicate,
    ProductionRule,
    Relation,
    Shape,
    Template,
    TemplateRef,
    Visibility,
    VisKind,
)
from .params import GenerationError, GenParams

CONDITION_RELATIONS = (Relation.NEAR, Relation.TOUCHING, Relation.HOLD)
GOAL_RELATIONS = (Relation.NEAR, Relation.TOUCHING, Relation.HOLD, Relation.SEE)


@dataclass(frozen=True)
class GameInfo:
    """Generation metadata, kept for curriculum difficulty metrics."""

    chain_depth: int
    chain_rule_indices: tuple[int, ...]
    dead_end_indices: tuple[int, ...]
    distractors: tuple[Template, ...]
    hiding_mechanism: str  # "full_rule" | "object" | "predicate"

    @property
    def rule_count(self) -> int:
        return len(self.chain_rule_indices) + len(self.dead_end_indices)

    @property
    def hidden_rule_fraction(self) -> float:
        return 1.0 / max(1, self.rule_count) if self.hiding_mechanism == "full_rule" else 0.0


def _tref(t: Template) -> TemplateRef:
    return TemplateRef(t[0], t[1])


def _fresh(rng: random.Random, used: set[Template]) -> Optional[Template]:
    avail = [t for t in ALL_TEMPLATES if t not in used]
    if not avail:
        return None
    pick = rng.choice(avail)
    used.add(pick)
    return pick


def sample_goal(rng: random.Random, used: set[Template], params: GenParams) -> Predicate:
    rel = rng.choice(GOAL_RELATIONS)
    negated = rng.random() < params.goal_negation_prob
    b = _fresh(rng, used)
    if b is None:
        raise GenerationError("template vocabulary exhausted sampling a goal")
    if rel == Relation.HOLD:
        return Predicate(rel, PlayerRef(0), _tref(b), negated=negated)
    if rng.random() < params.player_arg_prob:
        return Predicate(rel, PlayerRef(0), _tref(b), negated=negated)
    a = _fresh(rng, used)
    if a is None:
        a = b
        b2 = _fresh(rng, used)
        if b2 is None:
            raise GenerationError("template vocabulary exhausted sampling a goal")
        return Predicate(rel, _tref(a), _tref(b2), negated=negated)
    return Predicate(rel, _tref(a), _tref(b), negated=negated)


def sample_game(seed: int, params: GenParams = GenParams(),
                chain_depth: Optional[int] = None) -> tuple[Game, GameInfo]:
    """Backward chain construction.

    Each chain rule spawns exactly one template consumed by the next rule's
    condition (the other condition input, when the relation is binary, is an
    initial object). The final rule spawns the goal's object templates. This
    keeps every rule an act the player must deliberately trigger: no rule's
    binary condition can be satisfied purely by another rule's co-spawned
    outputs.
    """
    rng = random.Random(("game", seed).__repr__())
    for _ in range(params.game_retries):
        try:
            return _sample_game_once(rng, params, chain_depth)
        except GenerationError:
            continue
    raise GenerationError(f"game sampling failed for seed {seed}")


def _sample_game_once(rng: random.Random, params: GenParams,
                      chain_depth: Optional[int]) -> tuple[Game, GameInfo]:
    used: set[Template] = set()
    goal = sample_goal(rng, used, params)
    goal_templates = goal.templates()

    if goal.negated:
        # Negated goals are separation tasks: the pair starts in-relation and
        # the player breaks it. No chain, no dead ends (consuming the pair is
        # itself a solution, so a "dead end" would be a shortcut).
        depth = 0
    else:
        lo, hi = params.chain_depth_range
        depth = chain_depth if chain_depth is not None else rng.randint(lo, hi)

    chain: list[ProductionRule] = []
    initial: list[Template] = []
    produced = list(goal_templates)  # templates the next rule back must spawn
    for level in range(depth):
        rel = rng.choice(CONDITION_RELATIONS)
        spawns = [ObjectSpec(t[0], t[1]) for t in produced]
        if len(spawns) < 4 and rng.random() < params.extra_spawn_prob:
            extra = _fresh(rng, used)
            if extra is not None:
                spawns.append(ObjectSpec(extra[0], extra[1]))
        if rel == Relation.HOLD:
            c = _fresh(rng, used)
            if c is None:
                raise GenerationError("vocabulary exhausted")
            cond = Predicate(rel, PlayerRef(0), _tref(c))
            produced = [c]
        else:
            c = _fresh(rng, used)
            d = _fresh(rng, used)
            if c is None or d is None:
                raise GenerationError("vocabulary exhausted")
            cond = Predicate(rel, _tref(c), _tref(d))
            # One input is produced upstream, the other starts in the world.
            produced = [c]
            initial.append(d)
        chain.append(ProductionRule(cond, tuple(spawns)))
    chain.reverse()
    initial.extend(produced if depth > 0 else [])

    if depth == 0:
        # The goal's own objects must exist from the start.
        initial.extend(goal_templates)

    # Distractors use templates untouched by the goal or chain.
    n_distract = rng.randint(0, params.max_distractors)
    distractors: list[Template] = []
    for _ in range(n_distract):
        t = _fresh(rng, used)
        if t is None:
            break
        distractors.append(t)
        initial.append(t)

    if rng.random() < params.duplicate_input_prob and initial:
        initial.append(rng.choice(initial))

    # Dead ends: consume a chain-critical or distractor template, spawn only
    # distractor-class templates. A dead end's binary condition may not be a
    # subset of any rule's spawn list (no forced cascades) and may not repeat
    # an earlier condition signature.
    dead_ends: list[ProductionRule] = []
    if depth > 0 and not goal.negated:
        lo_d, hi_d = params.dead_end_range
        n_dead = rng.randint(lo_d, hi_d)
        critical = [t for t in initial if t not in distractors]
        for _ in range(n_dead):
            target_pool = critical + distractors
            if not target_pool:
                break
            target = rng.choice(target_pool)
            rel = rng.choice(CONDITION_RELATIONS)
            if rel == Relation.HOLD:
                cond = Predicate(rel, PlayerRef(0), _tref(target))
            else:
                partner_pool = [t for t in initial if t != target]
                if not partner_pool:
                    cond = Predicate(Relation.HOLD, PlayerRef(0), _tref(target))
                else:
                    cond = Predicate(rel, _tref(target), _tref(rng.choice(partner_pool)))
            de_spawn: tuple[ObjectSpec, ...] = ()
            if rng.random() < 0.7:
                # Spawned junk is always a fresh distractor-class template so
                # no template ever has two simultaneously alive instances.
                t = _fresh(rng, used)
                if t is not None:
                    de_spawn = (ObjectSpec(t[0], t[1]),)
            dead_ends.append(ProductionRule(cond, de_spawn))

    rules = list(chain)
    chain_pos = list(range(len(chain)))
    for de in dead_ends:
        pos = rng.randint(0, len(rules))
        rules.insert(pos, de)
        chain_pos = [p + 1 if p >= pos else p for p in chain_pos]
    dead_pos = [i for i in range(len(rules)) if i not in chain_pos]

    if _has_condition_conflicts(rules):
        raise GenerationError("condition conflict between rules")

    mask, mechanism, hidden_templates = sample_hiding_mask(rng, tuple(rules))
    game = Game(
        goals=(goal,),
        rules=tuple(rules),
        masks=(mask,),
        initial_objects=tuple(ObjectSpec(t[0], t[1]) for t in initial),
        hidden_templates=hidden_templates,
    )
    info = GameInfo(
        chain_depth=depth,
        chain_rule_indices=tuple(chain_pos),
        dead_end_indices=tuple(dead_pos),
        distractors=tuple(distractors),
        hiding_mechanism=mechanism,
    )
    return game, info


def _condition_signature(p: Predicate):
    refs = []
    for r in (p.arg_a, p.arg_b):
        refs.append(("p", r.index) if isinstance(r, PlayerRef) else ("t",) + r.template)
    return (int(p.relation), p.negated, tuple(sorted(refs)))


def _has_condition_conflicts(rules: list[ProductionRule]) -> bool:
    # Duplicate condition signatures make the later rule unreachable.
    sigs = [_condition_signature(r.condition) for r in rules]
    if len(set(sigs)) != len(sigs):
        return True
    # A binary condition fully covered by another rule's spawns would fire
    # unavoidably the moment that rule fires.
    for r in rules:
        spawn_templates = [s.template for s in r.spawns]
        for other in rules:
            if other is r:
                continue
            tpls = other.condition.templates()
            if len(tpls) == 2:
                pool = list(spawn_templates)
                ok = True
                for t in tpls:
                    if t in pool:
                        pool.remove(t)
                    else:
                        ok = False
                        break
                if ok:
                    return True
    return False


def sample_hiding_mask(rng: random.Random, rules: tuple[ProductionRule, ...]
                       ) -> tuple[HidingMask, str, tuple[Template, ...]]:
    """Uniform over the three mechanisms; targets uniform within the mechanism."""
    mechanism = rng.choice(("full_rule", "object", "predicate"))
    if not rules:
        return HidingMask(tuple(Visibility() for _ in rules)), mechanism, ()
    entries = [Visibility() for _ in rules]
    hidden_templates: tuple[Template, ...] = ()
    if mechanism == "full_rule":
        target = rng.randrange(len(rules))
        entries[target] = Visibility(kind=VisKind.FULLY_HIDDEN)
    elif mechanism == "predicate":
        target = rng.randrange(len(rules))
        entries[target] = Visibility(kind=VisKind.PREDICATE_HIDDEN, hidden_predicate=0)
    else:
        candidates = sorted({t for r in rules
                             for t in (r.condition.templates()
                                       + [s.template for s in r.spawns])})
        if candidates:
            chosen = rng.choice(candidates)
            hidden_templates = (chosen,)
            for i, r in enumerate(rules):
                mentioned = chosen in r.condition.templates() \
                    or any(s.template == chosen for s in r.spawns)
                if mentioned:
                    entries[i] = Visibility(kind=VisKind.OBJECTS_HIDDEN, hidden_objects=(0,))
    return HidingMask(tuple(entries)), mechanism, hidden_templates


def derive_two_player(game: Game, seed: int) -> Game:
    """Cooperative two-player derivation: flip player references to player 1
    with probability 1/2 each, copy the goal, sample a fresh mask for the
    second player."""
    rng = random.Random(("twoplayer", seed).__repr__())

    def flip_pred(p: Predicate) -> Predicate:
        out = p
        if isinstance(p.arg_a, PlayerRef) and rng.random() < 0.5:
            out = replace(out, arg_a=PlayerRef(1))
        if isinstance(out.arg_b, PlayerRef) and rng.random() < 0.5:
            out = replace(out, arg_b=PlayerRef(1))
        return out

    goal = flip_pred(game.goals[0])
    rules = tuple(replace(r, condition=flip_pred(r.condition)) for r in game.rules)
    mask2, _, hidden2 = sample_hiding_mask(rng, rules)
    hidden_templates = game.hidden_templates or hidden2
    return Game(
        goals=(goal, goal),
        rules=rules,
        masks=(game.masks[0], mask2),
        initial_objects=game.initial_objects,
        hidden_templates=hidden_templates,
    )


def freeze_objects(objects: tuple[ObjectSpec, ...], seed: int,
                   solvable_fn) -> tuple[ObjectSpec, ...]:
    """With probability 1/2 freeze each initial template with probability 0.2,
    rejecting frozen sets that `solvable_fn` reports unsolvable.

    Operates on placed object specs; `solvable_fn` receives the candidate
    tuple and must return a bool (typically a closure over the oracle).
    """
    rng = random.Random(("freeze", seed).__repr__())
    if rng.random() >= 0.5:
        return objects
    templates = sorted({s.template for s in objects})
    for _ in range(20):
        frozen = {t for t in templates if rng.random() < 0.2}
        if not frozen:
            return objects
        candidate = tuple(replace(s, frozen=s.template in frozen) for s in objects)
        if solvable_fn(candidate):
            return candidate
    return objects


def structural_key(game: Game) -> tuple:
    """Goal + rule-multiset signature used for holdout disjointness."""
    rule_sigs = sorted(
        (_condition_signature(r.condition),
         tuple(sorted(s.template for s in r.spawns)))
        for r in game.rules
    )
    return (_condition_signature(game.goals[0]), tuple(rule_sigs))
