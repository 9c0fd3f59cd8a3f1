"""Predicate semantics against brute-force geometric oracles."""

import pytest

from xlm.env.geometry import chebyshev, supercover_line
from xlm.env.sim import Simulator
from xlm.env.types import (
    Action,
    Color,
    EpisodeConfig,
    ObjectSpec,
    PlayerRef,
    Predicate,
    Relation,
    Shape,
    SpecError,
    TemplateRef,
)

from conftest import BC, YS, open_world, single_goal_game


def make_sim(objects, walls=(), goal=None, spawns=(((0, 0), 0),), size=9):
    goal = goal or Predicate(Relation.NEAR, YS, BC)
    world = open_world(size, size, walls=walls, spawns=spawns)
    game = single_goal_game(goal, objects=objects)
    return Simulator(world, game, EpisodeConfig(k=1, trial_length=10, seed=0))


def test_negation_inverts():
    sim = make_sim([ObjectSpec(Shape.SPHERE, Color.YELLOW, (4, 4)),
                    ObjectSpec(Shape.CUBE, Color.BLACK, (5, 4))])
    p = Predicate(Relation.NEAR, YS, BC)
    assert sim.eval_predicate(sim.state, p) is True
    assert sim.eval_predicate(sim.state, Predicate(Relation.NEAR, YS, BC, negated=True)) is False


def test_near_threshold_boundary_enumerated():
    # Oracle: enumerate all displacements and compare against Chebyshev <= 2.
    for dx in range(-4, 5):
        for dy in range(-4, 5):
            a = (4, 4)
            b = (4 + dx, 4 + dy)
            if not (0 <= b[0] < 9 and 0 <= b[1] < 9):
                continue
            if a == b:
                continue
            sim = make_sim([ObjectSpec(Shape.SPHERE, Color.YELLOW, a),
                            ObjectSpec(Shape.CUBE, Color.BLACK, b)])
            expected = chebyshev(a, b) <= 2
            assert sim.eval_predicate(sim.state, Predicate(Relation.NEAR, YS, BC)) == expected


def test_touching_is_orthogonal_adjacency():
    cases = {(1, 0): True, (0, 1): True, (1, 1): False, (2, 0): False, (0, 0): None}
    for (dx, dy), expected in cases.items():
        a, b = (4, 4), (4 + dx, 4 + dy)
        if expected is None:
            continue
        sim = make_sim([ObjectSpec(Shape.SPHERE, Color.YELLOW, a),
                        ObjectSpec(Shape.CUBE, Color.BLACK, b)])
        got = sim.eval_predicate(sim.state, Predicate(Relation.TOUCHING, YS, BC))
        assert got == expected


def brute_force_ray(a, b, blocked):
    """Independent dense ray-march: sample the segment finely, collect cells."""
    (x0, y0), (x1, y1) = a, b
    n = 4000
    cells = set()
    for i in range(n + 1):
        t = i / n
        x = x0 + (x1 - x0) * t
        y = y0 + (y1 - y0) * t
        # A point on a cell boundary belongs to every adjacent cell.
        for cx in {int(round(x - 0.499999)), int(round(x + 0.499999)), int(round(x))}:
            for cy in {int(round(y - 0.499999)), int(round(y + 0.499999)), int(round(y))}:
                if abs(x - cx) <= 0.5 + 1e-9 and abs(y - cy) <= 0.5 + 1e-9:
                    cells.add((cx, cy))
    return not any(c in blocked for c in cells if c != a and c != b)


def test_see_blocked_by_wall_on_ray():
    walls = {(2, 1)}
    sim = make_sim([ObjectSpec(Shape.CUBE, Color.PURPLE, (4, 2))],
                   walls=walls,
                   goal=Predicate(Relation.SEE, PlayerRef(0), TemplateRef(Shape.CUBE, Color.PURPLE)),
                   spawns=(((0, 0), 0),))
    # Player at (0,0), cube at (4,2): the supercover passes through (2,1).
    assert (2, 1) in supercover_line((0, 0), (4, 2))
    assert sim.eval_predicate(sim.state, sim.game.goals[0]) is False


def test_see_matches_brute_force_ray_oracle():
    walls = {(3, 3), (5, 2), (2, 6), (6, 6), (4, 1)}
    world = open_world(9, 9, walls=walls, spawns=(((0, 0), 0),))
    import itertools
    pairs = list(itertools.product([(0, 0), (1, 4), (7, 1), (8, 8), (4, 0)],
                                   [(8, 2), (2, 8), (6, 5), (0, 7)]))
    for a, b in pairs:
        sim = make_sim([ObjectSpec(Shape.SPHERE, Color.YELLOW, a),
                        ObjectSpec(Shape.CUBE, Color.BLACK, b)], walls=walls)
        got = sim.eval_predicate(sim.state, Predicate(Relation.SEE, YS, BC))
        assert got == brute_force_ray(a, b, walls), (a, b)


def test_zero_matches_relation_false_negation_true():
    sim = make_sim([ObjectSpec(Shape.CUBE, Color.BLACK, (4, 4))])
    assert sim.eval_predicate(sim.state, Predicate(Relation.NEAR, YS, BC)) is False
    assert sim.eval_predicate(sim.state, Predicate(Relation.NEAR, YS, BC, negated=True)) is True


def test_hold_requires_player_first_arg():
    with pytest.raises(SpecError):
        Predicate(Relation.HOLD, YS, BC)
    with pytest.raises(SpecError):
        Predicate(Relation.HOLD, PlayerRef(0), PlayerRef(1))


def test_hold_tracks_grab():
    goal = Predicate(Relation.HOLD, PlayerRef(0), YS)
    sim = make_sim([ObjectSpec(Shape.SPHERE, Color.YELLOW, (0, 1))],
                   goal=goal, spawns=(((0, 0), 0),))
    assert sim.eval_predicate(sim.state, goal) is False
    sim.step((Action(grab=True),))
    assert sim.eval_predicate(sim.state, goal) is True


def test_same_template_needs_two_instances():
    p = Predicate(Relation.NEAR, YS, YS)
    sim = make_sim([ObjectSpec(Shape.SPHERE, Color.YELLOW, (4, 4))])
    assert sim.eval_predicate(sim.state, p) is False
    sim2 = make_sim([ObjectSpec(Shape.SPHERE, Color.YELLOW, (4, 4)),
                     ObjectSpec(Shape.SPHERE, Color.YELLOW, (5, 4))])
    assert sim2.eval_predicate(sim2.state, p) is True
