"""Observation encoding: hiding soundness, sentinel indices, fixed widths."""

import json

import numpy as np

from xlm.env.observe import (
    MAX_RULES,
    PRED_HIDDEN_BASE,
    PRED_RULE_HIDDEN,
    RULE_ROW_WIDTH,
    SHAPE_HIDDEN_BASE,
    build_observation,
    encode_rules,
)
from xlm.env.render import RenderFrame, render_topdown
from xlm.env.sim import Simulator
from xlm.env.types import (
    Action,
    Color,
    EpisodeConfig,
    HidingMask,
    ObjectSpec,
    Predicate,
    ProductionRule,
    Relation,
    Shape,
    Visibility,
    VisKind,
)

from conftest import BC, PC, YS, open_world, single_goal_game


def build_game(vis: Visibility, hidden=()):
    rule = ProductionRule(Predicate(Relation.NEAR, YS, BC),
                          (ObjectSpec(Shape.CUBE, Color.PURPLE),))
    return single_goal_game(
        Predicate(Relation.NEAR, PC, BC),
        rules=[rule],
        objects=[ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 3)),
                 ObjectSpec(Shape.CUBE, Color.BLACK, (4, 4))],
        masks=(HidingMask((vis,)),),
        hidden=hidden,
    )


def test_fully_hidden_rule_is_a_bare_placeholder():
    game = build_game(Visibility(kind=VisKind.FULLY_HIDDEN))
    rules = encode_rules(game, viewer=0)
    assert rules[0, 1] == PRED_RULE_HIDDEN
    row = rules[0].copy()
    row[1] = 0
    assert not row.any()  # nothing else leaks
    # Remaining rows stay zero-padded at fixed width.
    assert rules.shape == (MAX_RULES, RULE_ROW_WIDTH)
    assert not rules[1:].any()


def test_hidden_object_uses_numbered_sentinel_everywhere():
    hidden = ((Shape.SPHERE, Color.YELLOW),)
    game = build_game(Visibility(kind=VisKind.OBJECTS_HIDDEN, hidden_objects=(0,)),
                      hidden=hidden)
    rules = encode_rules(game, viewer=0)
    assert rules[0, 2] == SHAPE_HIDDEN_BASE + 0
    assert rules[0, 3] == 0
    # The concealed template's true indices never appear in the row.
    assert int(Shape.SPHERE) not in (rules[0, 2], rules[0, 4])


def test_hidden_predicate_numbered():
    game = build_game(Visibility(kind=VisKind.PREDICATE_HIDDEN, hidden_predicate=1))
    rules = encode_rules(game, viewer=0)
    assert rules[0, 1] == PRED_HIDDEN_BASE + 1
    # Objects remain visible under predicate hiding.
    assert rules[0, 2] == int(Shape.SPHERE) and rules[0, 3] == int(Color.YELLOW)


def test_observations_identical_across_hidden_rule_identities():
    # Two games whose hidden rule differs in true content must encode alike.
    vis = Visibility(kind=VisKind.FULLY_HIDDEN)
    g1 = build_game(vis)
    rule2 = ProductionRule(Predicate(Relation.TOUCHING, PC, BC),
                           (ObjectSpec(Shape.PYRAMID, Color.YELLOW),))
    g2 = single_goal_game(g1.goals[0], rules=[rule2],
                          objects=list(g1.initial_objects),
                          masks=(HidingMask((vis,)),))
    assert np.array_equal(encode_rules(g1, 0), encode_rules(g2, 0))


def test_observation_fields_and_time_encoding():
    game = build_game(Visibility())
    world = open_world(9, 9, spawns=(((4, 4), 0),))
    sim = Simulator(world, game, EpisodeConfig(k=3, trial_length=10, seed=0))
    obs = build_observation(sim, 0, None, 0.0)
    assert obs.view.shape == (5, 5, 8)
    assert obs.trials_remaining.tolist() == [0.0, 0.0, 1.0, 0.0, 0.0]
    assert obs.more_than_5_trials == 0.0
    assert obs.steps_left_in_trial == 10.0
    assert obs.steps_until_last_trial == 20.0
    assert obs.duration_last_trial == obs.duration_next_trial == 10.0
    sim.step((Action(move=1),))
    obs = build_observation(sim, 0, Action(move=1), 0.0)
    assert obs.steps_left_in_trial == 9.0
    assert obs.steps_until_last_trial == 19.0
    assert obs.last_action[1] == 1.0


def test_more_than_five_trials_flag():
    game = build_game(Visibility())
    world = open_world(9, 9, spawns=(((4, 4), 0),))
    sim = Simulator(world, game, EpisodeConfig(k=8, trial_length=5, seed=0))
    obs = build_observation(sim, 0, None, 0.0)
    assert obs.more_than_5_trials == 1.0
    assert obs.trials_remaining.tolist() == [0.0, 0.0, 0.0, 0.0, 1.0]


def test_view_walls_and_out_of_bounds():
    game = build_game(Visibility())
    world = open_world(9, 9, walls={(4, 3)}, spawns=(((4, 4), 0),))
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=5, seed=0))
    obs = build_observation(sim, 0, None, 0.0)
    assert obs.view[1, 2, 7] == 1.0  # wall one cell north
    # Move to the corner: out-of-bounds renders as wall.
    world2 = open_world(9, 9, spawns=(((0, 0), 0),))
    sim2 = Simulator(world2, build_game(Visibility()), EpisodeConfig(k=1, trial_length=5, seed=0))
    obs2 = build_observation(sim2, 0, None, 0.0)
    assert obs2.view[0, :, 7].all() and obs2.view[:, 0, 7].all()
    assert obs2.view[2, 2, 6] == 1.0  # self marker at centre


def test_spectator_render_unmasked_and_player_masked():
    game = build_game(Visibility(kind=VisKind.FULLY_HIDDEN))
    world = open_world(9, 9, spawns=(((4, 4), 0),))
    sim = Simulator(world, game, EpisodeConfig(k=1, trial_length=5, seed=0))
    player_frame = render_topdown(sim, viewer=0)
    spectator_frame = render_topdown(sim, viewer=None)
    assert player_frame.rule_panel == ["a rule exists (hidden)"]
    assert "near(yellow sphere, black cube)" in spectator_frame.rule_panel[0]


def test_frame_wire_roundtrip_bit_exact():
    game = build_game(Visibility(kind=VisKind.PREDICATE_HIDDEN, hidden_predicate=0))
    world = open_world(9, 9, walls={(2, 2)}, spawns=(((4, 4), 0),))
    sim = Simulator(world, game, EpisodeConfig(k=2, trial_length=7, seed=1))
    sim.step((Action(move=2, grab=True),))
    frame = render_topdown(sim, viewer=0, trial_scores=[3])
    wire = json.dumps(frame.to_dict(), sort_keys=True)
    back = RenderFrame.from_dict(json.loads(wire))
    assert back == frame
    assert json.dumps(back.to_dict(), sort_keys=True) == wire
