"""Stepping, rule firing, trials, and determinism of the simulator."""

import random

import pytest
from scipy import stats

from xlm.env.sim import Simulator
from xlm.env.types import (
    ACTION_GROUP_SIZES,
    ALL_ACTIONS,
    Action,
    Color,
    EpisodeConfig,
    ObjectSpec,
    PlayerRef,
    Predicate,
    ProductionRule,
    Relation,
    Shape,
    SpecError,
    TemplateRef,
)

from conftest import BC, BS, PC, YP, YS, open_world, single_goal_game


def test_paper_example_rule_consumes_and_spawns():
    # near(yellow sphere, black cube) -> purple cube, black cube
    rule = ProductionRule(
        Predicate(Relation.NEAR, YS, BC),
        (ObjectSpec(Shape.CUBE, Color.PURPLE), ObjectSpec(Shape.CUBE, Color.BLACK)),
    )
    world = open_world(7, 7, spawns=(((6, 6), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, PC, BC), rules=[rule],
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 1)),
                                     ObjectSpec(Shape.CUBE, Color.BLACK, (2, 1))])
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=5, seed=0))
    res = sim.step((Action.NOOP,))
    assert len(res.fired) == 1
    templates = sorted(o.template for o in sim.state.objects.values())
    assert templates == [(Shape.CUBE, Color.BLACK), (Shape.CUBE, Color.PURPLE)]
    # Spawns land on the consumed cells in order.
    cells = sorted(o.cell for o in sim.state.objects.values())
    assert cells == [(1, 1), (2, 1)]
    assert res.rewards == (1.0,)


def test_empty_spawn_rule_removes_only():
    rule = ProductionRule(Predicate(Relation.NEAR, YS, BC), ())
    world = open_world(7, 7, spawns=(((6, 6), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, YS, BC), rules=[rule],
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 1)),
                                     ObjectSpec(Shape.CUBE, Color.BLACK, (2, 1))])
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=5, seed=0))
    res = sim.step((Action.NOOP,))
    assert len(res.fired) == 1
    assert not sim.state.objects
    assert res.rewards == (0.0,)


def test_rule_chain_fires_in_order_same_tick():
    # Hand-traced two-rule chain on a 5x5 grid: rule 0 spawns the purple cube
    # at the consumed sphere's cell (1,1); that cube is adjacent to the yellow
    # pyramid at (1,2), so rule 1 fires in the same tick.
    rules = [
        ProductionRule(Predicate(Relation.NEAR, YS, BC),
                       (ObjectSpec(Shape.CUBE, Color.PURPLE),)),
        ProductionRule(Predicate(Relation.NEAR, PC, YP),
                       (ObjectSpec(Shape.SPHERE, Color.BLACK),)),
    ]
    world = open_world(5, 5, spawns=(((4, 4), 0),))
    game = single_goal_game(Predicate(Relation.HOLD, PlayerRef(0), BS), rules=rules,
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 1)),
                                     ObjectSpec(Shape.CUBE, Color.BLACK, (2, 1)),
                                     ObjectSpec(Shape.PYRAMID, Color.YELLOW, (1, 2))])
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=5, seed=0))
    res = sim.step((Action.NOOP,))
    assert [e.rule_index for e in res.fired] == [0, 1]
    templates = [o.template for o in sim.state.objects.values()]
    assert templates == [(Shape.SPHERE, Color.BLACK)]


def test_noop_on_presolved_goal_rewards_every_step():
    world = open_world(7, 7, spawns=(((5, 5), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, YS, BC),
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 1)),
                                     ObjectSpec(Shape.CUBE, Color.BLACK, (1, 2))])
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=8, seed=0))
    total = 0.0
    for _ in range(8):
        res = sim.step((Action.NOOP,))
        total += res.rewards[0]
    assert total == 8.0
    assert len(sim.state.objects) == 2


def test_per_trial_reward_bounded_by_trial_length():
    rng = random.Random(7)
    world = open_world(6, 6, spawns=(((0, 0), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, YS, BC),
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (3, 3)),
                                     ObjectSpec(Shape.CUBE, Color.BLACK, (5, 5))])
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=12, seed=1))
    total = 0.0
    for _ in range(12):
        res = sim.step((rng.choice(ALL_ACTIONS),))
        total += res.rewards[0]
    assert 0.0 <= total <= 12.0


def test_hand_traced_six_step_plan():
    # 7x7 open grid, spawn (1,1), yellow sphere (1,3), black cube (5,1).
    # Plan: S, grab, E, E, E, E. Hand-simulated reward stream: 0,0,0,1,1,1.
    world = open_world(7, 7, spawns=(((1, 1), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, YS, BC),
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 3)),
                                     ObjectSpec(Shape.CUBE, Color.BLACK, (5, 1))])
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=6, seed=0))
    plan = [Action(move=3), Action(grab=True), Action(move=2), Action(move=2),
            Action(move=2), Action(move=2)]
    stream = [sim.step((a,)).rewards[0] for a in plan]
    assert stream == [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]
    assert sim.state.players[0].holding is not None


def test_walls_and_frozen_block_movement():
    world = open_world(5, 5, walls={(2, 1)}, spawns=(((1, 1), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, YS, BC),
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 2), frozen=True)])
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=10, seed=0))
    sim.step((Action(move=2),))  # into a wall
    assert sim.state.players[0].cell == (1, 1)
    sim.step((Action(move=3),))  # into a frozen object
    assert sim.state.players[0].cell == (1, 1)
    sim.step((Action(move=1),))  # free cell
    assert sim.state.players[0].cell == (1, 0)


def test_frozen_objects_cannot_be_grabbed_or_consumed():
    rule = ProductionRule(Predicate(Relation.NEAR, YS, BC), ())
    world = open_world(6, 6, spawns=(((0, 0), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, YS, BC), rules=[rule],
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 0), frozen=True),
                                     ObjectSpec(Shape.CUBE, Color.BLACK, (2, 0))])
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=5, seed=0))
    res = sim.step((Action(grab=True),))
    # The frozen sphere resists grabbing; the rule consumed only the cube.
    assert sim.state.players[0].holding is None
    assert len(res.fired) == 1
    left = list(sim.state.objects.values())
    assert len(left) == 1 and left[0].frozen and left[0].cell == (1, 0)


def test_frozen_immobility_under_action_fuzzing():
    rng = random.Random(123)
    world = open_world(6, 6, spawns=(((0, 0), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, YS, BC),
                            objects=[ObjectSpec(Shape.PYRAMID, Color.PURPLE, (3, 3), frozen=True),
                                     ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 0))])
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=200, seed=5))
    frozen_id = [o.id for o in sim.state.objects.values() if o.frozen][0]
    for _ in range(200):
        sim.step((rng.choice(ALL_ACTIONS),))
        assert sim.state.objects[frozen_id].cell == (3, 3)
        assert sim.state.objects[frozen_id].held_by is None


def test_reward_iff_goal_invariant_random_rollouts():
    rng = random.Random(99)
    world = open_world(6, 6, spawns=(((0, 0), 0),))
    rule = ProductionRule(Predicate(Relation.TOUCHING, YS, BC), (ObjectSpec(Shape.CUBE, Color.PURPLE),))
    game = single_goal_game(Predicate(Relation.NEAR, PC, YP), rules=[rule],
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (3, 3)),
                                     ObjectSpec(Shape.CUBE, Color.BLACK, (5, 5)),
                                     ObjectSpec(Shape.PYRAMID, Color.YELLOW, (0, 5))])
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=300, seed=8))
    for _ in range(300):
        res = sim.step((rng.choice(ALL_ACTIONS),))
        expect = 1.0 if sim.eval_predicate(sim.state, sim.game.goals[0]) else 0.0
        assert res.rewards[0] == expect


def test_object_conservation_under_rules():
    rng = random.Random(4)
    rule = ProductionRule(Predicate(Relation.NEAR, YS, BC),
                          (ObjectSpec(Shape.CUBE, Color.PURPLE),
                           ObjectSpec(Shape.SPHERE, Color.BLACK),
                           ObjectSpec(Shape.PYRAMID, Color.YELLOW)))
    world = open_world(6, 6, spawns=(((0, 0), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, PC, BS), rules=[rule],
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (2, 2)),
                                     ObjectSpec(Shape.CUBE, Color.BLACK, (5, 5))])
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=100, seed=2))
    for _ in range(100):
        before = len(sim.state.objects)
        res = sim.step((rng.choice(ALL_ACTIONS),))
        delta = sum(len(e.spawned_ids) - len(e.consumed_ids) for e in res.fired)
        assert len(sim.state.objects) == before + delta


def test_trial_and_episode_boundaries():
    world = open_world(5, 5, spawns=(((0, 0), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, YS, BC),
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (3, 3))])
    sim = Simulator(world, game, EpisodeConfig(k=2, trial_length=3, seed=0))
    for i in range(3):
        res = sim.step((Action.NOOP,))
    assert res.trial_done and not res.episode_done
    with pytest.raises(SpecError):
        sim.step((Action.NOOP,))
    sim.reset_trial()
    assert sim.state.trial_index == 1 and sim.state.tick == 0
    for i in range(3):
        res = sim.step((Action.NOOP,))
    assert res.trial_done and res.episode_done
    with pytest.raises(SpecError):
        sim.reset_trial()


def test_reset_restores_destroyed_objects():
    rule = ProductionRule(Predicate(Relation.NEAR, YS, BC), ())
    world = open_world(5, 5, spawns=(((4, 4), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, YS, BC), rules=[rule],
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 1)),
                                     ObjectSpec(Shape.CUBE, Color.BLACK, (2, 1))])
    sim = Simulator(world, game, EpisodeConfig(k=2, trial_length=2, seed=0))
    sim.step((Action.NOOP,))
    assert not sim.state.objects  # dead-end fired and consumed the pair
    sim.step((Action.NOOP,))
    sim.reset_trial()
    assert len(sim.state.objects) == 2


def test_reset_facing_uniform_chi_square():
    world = open_world(5, 5, spawns=(((2, 2), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, YS, BC),
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (0, 0))])
    counts = [0, 0, 0, 0]
    # Collect facings over many trial resets of seeded episodes.
    facings = []
    for seed in range(42):
        sim = Simulator(world, game, EpisodeConfig(k=24, trial_length=1, seed=seed))
        facings.append(sim.state.players[0].facing)
        for _ in range(23):
            sim.step((Action.NOOP,))
            sim.reset_trial()
            facings.append(sim.state.players[0].facing)
    for f in facings[:1000]:
        counts[f - 1] += 1
    chi2, p = stats.chisquare(counts)
    assert p > 0.01, (counts, p)


def test_determinism_bit_exact_replay():
    rng = random.Random(0)
    actions = [rng.choice(ALL_ACTIONS) for _ in range(40)]
    world = open_world(6, 6, spawns=(((0, 0), 0),))
    rule = ProductionRule(Predicate(Relation.NEAR, YS, BC), (ObjectSpec(Shape.CUBE, Color.PURPLE),))
    game = single_goal_game(Predicate(Relation.NEAR, PC, BC), rules=[rule],
                            objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (2, 2)),
                                     ObjectSpec(Shape.CUBE, Color.BLACK, (5, 5))])

    def run():
        sim = Simulator(world, game, EpisodeConfig(k=2, trial_length=20, seed=11))
        stream = []
        for a in actions:
            res = sim.step((a,))
            stream.append(res.rewards)
            if res.trial_done and not res.episode_done:
                sim.reset_trial()
        stream.append(tuple(sorted((o.template, o.cell) for o in sim.state.objects.values())))
        return stream

    assert run() == run()


def test_two_player_collision_and_cooperative_reward():
    world = open_world(5, 5, spawns=(((1, 1), 0), ((3, 1), 1)))
    goal = Predicate(Relation.HOLD, PlayerRef(0), YS)
    from xlm.env.types import Game, HidingMask
    game = Game(goals=(goal, goal), rules=(),
                masks=(HidingMask(), HidingMask()),
                initial_objects=(ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 2)),))
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=10, seed=0))
    # Both walk toward (2,1); player 0 resolves first and wins the cell.
    sim.step((Action(move=2), Action(move=4)))
    assert sim.state.players[0].cell == (2, 1)
    assert sim.state.players[1].cell == (3, 1)
    # Cooperative: when player 0 holds the sphere, both are rewarded.
    sim2 = Simulator(world, game, EpisodeConfig(k=1, trial_length=10, seed=0))
    res = sim2.step((Action(move=3), Action.NOOP))
    res = sim2.step((Action(grab=True), Action.NOOP))
    assert res.rewards == (1.0, 1.0)


def test_action_validation():
    world = open_world(5, 5, spawns=(((1, 1), 0),))
    game = single_goal_game(Predicate(Relation.NEAR, YS, BC))
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=5, seed=0))
    with pytest.raises(SpecError):
        sim.step((Action.NOOP, Action.NOOP))
    with pytest.raises(SpecError):
        Action(move=9)
