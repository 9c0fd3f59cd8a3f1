"""World/game sampling, two-player derivation, freezing, pools, oracle."""

import random
from collections import Counter
from dataclasses import replace
from pathlib import Path

import pytest
from scipy import stats

from xlm.env.geometry import flood_fill, row_major_key
from xlm.env.sim import Simulator
from xlm.env.types import (
    Action,
    Color,
    EpisodeConfig,
    Game,
    GridWorld,
    HidingMask,
    ObjectSpec,
    PlayerRef,
    Predicate,
    ProductionRule,
    Relation,
    Shape,
    TemplateRef,
)
from xlm.taskgen.games import derive_two_player, freeze_objects, sample_game, structural_key
from xlm.taskgen.oracle import oracle_solve
from xlm.taskgen.params import AGREEMENT_PARAMS, GenParams
from xlm.taskgen.pool import build_task, load_pool, presample_pool, save_pool, split_holdout
from xlm.taskgen.task import Task, materialize_objects
from xlm.taskgen.worlds import sample_world

from conftest import BC, YS


def test_world_determinism():
    for seed in (0, 7, 123):
        assert sample_world(seed) == sample_world(seed)


def test_world_zero_density_open_room():
    params = GenParams(wall_density=0.0)
    w = sample_world(3, params)
    assert not w.walls


def test_world_connectivity_flood_fill_oracle():
    for seed in range(1000):
        w = sample_world(seed)
        passable = set(w.passable_cells)
        start = min(passable, key=row_major_key)
        assert flood_fill(start, passable) == passable, seed
        assert all(w.is_passable(c) for c, _ in w.spawn_points)


def _chain_fires_in_sequence(game, info) -> bool:
    """Abstract simulation: firing the chain rules in order from the initial
    multiset must yield the goal's object templates."""
    counts = Counter(s.template for s in game.initial_objects)
    for ri in info.chain_rule_indices:
        rule = game.rules[ri]
        needed = Counter(rule.condition.templates())
        if any(counts[t] < c for t, c in needed.items()):
            return False
        counts -= needed
        counts += Counter(s.template for s in rule.spawns)
    goal_templates = Counter(game.goals[0].templates())
    return all(counts[t] >= c for t, c in goal_templates.items())


def test_chain_soundness_by_simulation():
    for seed in range(400):
        game, info = sample_game(seed)
        if game.goals[0].negated:
            continue
        assert _chain_fires_in_sequence(game, info), seed


def test_minimal_game_single_firing():
    game, info = sample_game(11, chain_depth=1)
    assert info.chain_depth == 1
    assert len(info.chain_rule_indices) == 1 or game.goals[0].negated


def test_hiding_mechanism_uniform_chi_square():
    counts = Counter()
    for seed in range(10_000):
        _, info = sample_game(seed + 50_000)
        counts[info.hiding_mechanism] += 1
    observed = [counts["full_rule"], counts["object"], counts["predicate"]]
    chi2, p = stats.chisquare(observed)
    assert p > 0.01, observed


def test_two_player_derivation_cooperative():
    for seed in range(200):
        game, _ = sample_game(seed)
        two = derive_two_player(game, seed)
        assert two.num_players == 2
        assert two.goals[0] == two.goals[1]
        assert len(two.masks) == 2


def test_two_player_no_refs_only_masks_differ():
    # A game whose goal and rules never mention a player can only change in
    # its second hiding mask.
    rule = ProductionRule(Predicate(Relation.NEAR, YS, BC),
                          (ObjectSpec(Shape.CUBE, Color.PURPLE),))
    game = Game(goals=(Predicate(Relation.NEAR, YS, BC),), rules=(rule,),
                masks=(HidingMask(),),
                initial_objects=(ObjectSpec(Shape.SPHERE, Color.YELLOW),
                                 ObjectSpec(Shape.CUBE, Color.BLACK)))
    two = derive_two_player(game, 3)
    assert two.goals == (game.goals[0], game.goals[0])
    assert two.rules == game.rules


def test_two_player_hold_goal_substitution_rewards_both():
    goal = Predicate(Relation.HOLD, PlayerRef(0), YS)
    base = Game(goals=(goal,), rules=(), masks=(HidingMask(),),
                initial_objects=(ObjectSpec(Shape.SPHERE, Color.YELLOW),))
    flipped = None
    for seed in range(60):
        two = derive_two_player(base, seed)
        if isinstance(two.goals[0].arg_a, PlayerRef) and two.goals[0].arg_a.index == 1:
            flipped = two
            break
    assert flipped is not None, "substitution never flipped the reference"
    world = GridWorld(5, 5, frozenset(), (((0, 0), 0), ((4, 4), 1)))
    objs = (ObjectSpec(Shape.SPHERE, Color.YELLOW, (4, 3)),)
    sim = Simulator(world, flipped, EpisodeConfig(k=1, trial_length=5, seed=0),
                    initial_objects=objs)
    res = sim.step((Action.NOOP, Action(grab=True)))
    assert res.rewards == (1.0, 1.0)


def test_two_player_derived_solvable_by_oracle():
    solved = 0
    for seed in range(30):
        task, info = build_task(seed, seed + 3000, AGREEMENT_PARAMS,
                                require_solvable=True)
        two = derive_two_player(task.game, seed)
        world = sample_world(seed, AGREEMENT_PARAMS)
        objs = materialize_objects(world, two, seed + 1, AGREEMENT_PARAMS)
        t2 = Task(seed, seed, world, two, objs, trial_length=80)
        rep = oracle_solve(t2)
        if rep.solvable:
            solved += 1
    assert solved >= 27  # two-player derivations stay overwhelmingly solvable


def test_freeze_probability_parameters():
    # With always-solvable feedback, ~50% of seeds freeze nothing at the task
    # level, and frozen templates appear at ~20% within freezing tasks.
    objects = tuple(ObjectSpec(Shape(1 + i % 3), Color(1 + i // 3), (i, 0))
                    for i in range(6))
    touched = 0
    frozen_templates = 0
    total_templates = 0
    for seed in range(4000):
        out = freeze_objects(objects, seed, lambda objs: True)
        if any(o.frozen for o in out):
            touched += 1
        # Count template-level freezing decisions among touching seeds only
        # via a direct re-sample of the underlying coin flips.
    # task-level probability: a task "receives frozen objects" iff the first
    # coin fires AND at least one template coin fires.
    p_touch = touched / 4000
    p_expected = 0.5 * (1 - 0.8 ** 6)
    assert abs(p_touch - p_expected) < 0.04, (p_touch, p_expected)


def test_freeze_respects_solvability():
    kept = 0
    for seed in range(120):
        task, _ = build_task(seed, seed + 4500, AGREEMENT_PARAMS,
                             require_solvable=True)
        frozen_objs = freeze_objects(
            task.objects, seed,
            lambda objs: bool(oracle_solve(replace(task, objects=objs)).solvable))
        t2 = replace(task, objects=frozen_objs)
        rep = oracle_solve(t2)
        assert rep.solvable is not False, seed
        kept += 1
    assert kept == 120


def test_zero_freeze_leaves_task_unchanged():
    objects = (ObjectSpec(Shape.CUBE, Color.BLACK, (0, 0)),)
    out = freeze_objects(objects, seed=2, solvable_fn=lambda o: False)
    # Either the coin skipped freezing or every candidate set was rejected.
    assert all(not o.frozen for o in out)


def test_pool_roundtrip_and_determinism(tmp_path):
    params = GenParams(size_range=(5, 6), chain_depth_range=(1, 2),
                       max_distractors=1)
    pool = presample_pool(seed=5, n_worlds=4, n_games=12, params=params,
                          require_solvable=False)
    p1 = tmp_path / "pool.xlm"
    p2 = tmp_path / "pool2.xlm"
    save_pool(pool, p1)
    again = presample_pool(seed=5, n_worlds=4, n_games=12, params=params,
                           require_solvable=False)
    save_pool(again, p2)
    assert p1.read_bytes() == p2.read_bytes()  # byte-identical regeneration

    loaded = load_pool(p1)
    assert loaded.seed == pool.seed
    assert loaded.worlds == pool.worlds
    assert loaded.games == pool.games
    assert loaded.trial_lengths == pool.trial_lengths
    task = loaded.task(0, 0)
    assert task.objects == pool.task(0, 0).objects


def test_pool_split_disjoint_and_empty_test():
    params = GenParams(size_range=(5, 6), chain_depth_range=(1, 2))
    pool = presample_pool(seed=9, n_worlds=3, n_games=16, params=params,
                          require_solvable=False)
    train, test = split_holdout(pool, n_test=5)
    train_keys = {structural_key(g) for g in train.games}
    test_keys = {structural_key(g) for g in test.games}
    assert not train_keys & test_keys
    assert train.n_games == 11 and test.n_games == 5
    assert set(test.world_seeds).isdisjoint(set(train.world_seeds))

    train0, test0 = split_holdout(pool, n_test=0)
    assert test0.n_games == 0 and train0.n_games == pool.n_games


def test_oracle_presolved_full_reward():
    world = GridWorld(7, 7, frozenset(), (((6, 6), 0),))
    game = Game(goals=(Predicate(Relation.NEAR, YS, BC),), rules=(),
                masks=(HidingMask(),))
    objs = (ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 1)),
            ObjectSpec(Shape.CUBE, Color.BLACK, (1, 2)))
    task = Task(0, 0, world, game, objs, trial_length=44)
    rep = oracle_solve(task)
    assert rep.solvable and rep.optimal_reward == 44


def test_oracle_one_rule_chain_matches_hand_trace():
    # 7x7 open world, spawn (1,1); A at (1,3), B at (5,1);
    # rule near(A,B) -> [G1, G2]; goal near(G1, G2).
    # Hand plan: S (1), grab (1), E, E (2) -> rule fires on tick 4, spawns land
    # on the consumed (near) cells, goal holds from tick 4: 80 - 4 + 1 = 77.
    A = TemplateRef(Shape.SPHERE, Color.YELLOW)
    B = TemplateRef(Shape.CUBE, Color.BLACK)
    world = GridWorld(7, 7, frozenset(), (((1, 1), 0),))
    rule = ProductionRule(Predicate(Relation.NEAR, A, B),
                          (ObjectSpec(Shape.CUBE, Color.PURPLE),
                           ObjectSpec(Shape.PYRAMID, Color.YELLOW)))
    game = Game(goals=(Predicate(Relation.NEAR,
                                 TemplateRef(Shape.CUBE, Color.PURPLE),
                                 TemplateRef(Shape.PYRAMID, Color.YELLOW)),),
                rules=(rule,), masks=(HidingMask(),))
    objs = (ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 3)),
            ObjectSpec(Shape.CUBE, Color.BLACK, (5, 1)))
    task = Task(0, 0, world, game, objs, trial_length=80)

    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=80, seed=0),
                    initial_objects=objs)
    plan = [Action(move=3), Action(grab=True), Action(move=2), Action(move=2)]
    rewards = [sim.step((a,)).rewards[0] for a in plan]
    assert rewards == [0.0, 0.0, 0.0, 1.0]
    hand_total = int(sum(rewards) + (80 - len(plan)))

    rep = oracle_solve(task)
    assert rep.solvable
    assert rep.optimal_reward == hand_total == 77
    assert rep.firing_sequence == (0,)


def test_oracle_dead_end_detection():
    # The only rule consumes the goal's sphere: never required, fatal if fired.
    A = TemplateRef(Shape.SPHERE, Color.YELLOW)
    C = TemplateRef(Shape.PYRAMID, Color.PURPLE)
    world = GridWorld(6, 6, frozenset(), (((0, 0), 0),))
    rule = ProductionRule(Predicate(Relation.NEAR, A, C), ())
    game = Game(goals=(Predicate(Relation.HOLD, PlayerRef(0), A),),
                rules=(rule,), masks=(HidingMask(),))
    objs = (ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 4)),
            ObjectSpec(Shape.PYRAMID, Color.PURPLE, (4, 1)))
    task = Task(0, 0, world, game, objs, trial_length=60)
    rep = oracle_solve(task)
    assert rep.solvable
    assert rep.dead_ends == frozenset({0})


def test_oracle_unsolvable_when_goal_object_never_exists():
    world = GridWorld(5, 5, frozenset(), (((0, 0), 0),))
    game = Game(goals=(Predicate(Relation.NEAR, YS, BC),), rules=(),
                masks=(HidingMask(),))
    objs = (ObjectSpec(Shape.CUBE, Color.BLACK, (3, 3)),)
    task = Task(0, 0, world, game, objs, trial_length=30)
    rep = oracle_solve(task)
    assert rep.solvable is False and rep.optimal_reward == 0


def test_oracle_hold_livelock_unsolvable():
    # hold(p, A) both as goal and as a consuming rule: grabbing destroys A
    # before the reward check, so the goal can never hold.
    A = TemplateRef(Shape.SPHERE, Color.YELLOW)
    world = GridWorld(5, 5, frozenset(), (((0, 0), 0),))
    rule = ProductionRule(Predicate(Relation.HOLD, PlayerRef(0), A), ())
    game = Game(goals=(Predicate(Relation.HOLD, PlayerRef(0), A),),
                rules=(rule,), masks=(HidingMask(),))
    objs = (ObjectSpec(Shape.SPHERE, Color.YELLOW, (2, 2)),)
    task = Task(0, 0, world, game, objs, trial_length=30)
    rep = oracle_solve(task)
    assert rep.solvable is False


def test_generated_train_tasks_are_solvable():
    for seed in range(40):
        task, _ = build_task(seed, seed + 7000, AGREEMENT_PARAMS,
                             require_solvable=True)
        assert oracle_solve(task).solvable
