"""Per-player symbolic observations with hiding applied.

Index vocabularies are shared between the goal atoms and the rule matrix.
Concealed content is encoded with reserved sentinel indices so the true
shape/colour/predicate never reaches the observation, whatever the rule is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Cell
from .sim import EnvState, Simulator
from .types import (
    ACTION_GROUP_SIZES,
    Action,
    Game,
    HiddenObjectRef,
    PlayerRef,
    Predicate,
    ProductionRule,
    Relation,
    TemplateRef,
    VisKind,
)

# Shape-slot vocabulary (also carries player and hidden-object encodings).
SHAPE_NONE = 0
SHAPE_BASE = 1          # 1..3 cube/sphere/pyramid
SHAPE_PLAYER_SELF = 4
SHAPE_PLAYER_OTHER = 5
SHAPE_HIDDEN_BASE = 6   # 6..9 -> hidden object 0..3
MAX_HIDDEN_OBJECTS = 4

COLOR_NONE = 0          # 1..3 black/purple/yellow

PRED_NONE = 0           # 1..4 near/touching/hold/see
PRED_HIDDEN_BASE = 5    # 5..8 -> hidden predicate 0..3
PRED_RULE_HIDDEN = 9    # "a rule exists" placeholder
MAX_HIDDEN_PREDICATES = 4

MAX_RULES = 16
RULE_ROW_WIDTH = 26     # 3 condition triples x 6 + 4 spawns x 2
GOAL_WIDTH = 6
VIEW_RADIUS = 2
VIEW_CHANNELS = 8       # shape one-hot(3), colour one-hot(3), player, wall
TRIALS_ONEHOT = 5


@dataclass
class Observation:
    view: np.ndarray            # (2R+1, 2R+1, VIEW_CHANNELS) float32
    is_holding: float
    last_action: np.ndarray     # concatenated one-hots over the 3 action groups
    reward: float               # previous-step reward
    goal_atoms: np.ndarray      # (6,) int64
    rules: np.ndarray           # (MAX_RULES, RULE_ROW_WIDTH) int64
    trials_remaining: np.ndarray  # one-hot(5)
    more_than_5_trials: float
    steps_until_last_trial: float
    steps_left_in_trial: float
    duration_last_trial: float
    duration_next_trial: float


def observation_sizes(view_radius: int = VIEW_RADIUS) -> dict[str, int]:
    side = 2 * view_radius + 1
    return {
        "view": side * side * VIEW_CHANNELS,
        "scalars": 1 + sum(ACTION_GROUP_SIZES) + 1 + TRIALS_ONEHOT + 1 + 4,
        "goal_atoms": GOAL_WIDTH,
        "rules": MAX_RULES * RULE_ROW_WIDTH,
    }


def _ref_atoms(ref, viewer: int, hidden_lookup: dict | None) -> tuple[int, int]:
    """(shape_slot, colour_slot) encoding of an entity reference."""
    if isinstance(ref, PlayerRef):
        return (SHAPE_PLAYER_SELF if ref.index == viewer else SHAPE_PLAYER_OTHER, COLOR_NONE)
    if isinstance(ref, HiddenObjectRef):
        return (SHAPE_HIDDEN_BASE + ref.index, COLOR_NONE)
    if hidden_lookup is not None and ref.template in hidden_lookup:
        return (SHAPE_HIDDEN_BASE + hidden_lookup[ref.template], COLOR_NONE)
    return (int(ref.shape), int(ref.color))


def encode_goal(goal: Predicate, viewer: int) -> np.ndarray:
    atoms = np.zeros(GOAL_WIDTH, dtype=np.int64)
    atoms[0] = int(goal.negated)
    atoms[1] = int(goal.relation)
    atoms[2], atoms[3] = _ref_atoms(goal.arg_a, viewer, None)
    atoms[4], atoms[5] = _ref_atoms(goal.arg_b, viewer, None)
    return atoms


def encode_rules(game: Game, viewer: int) -> np.ndarray:
    """Rule matrix for one viewer with that viewer's hiding mask applied."""
    mask = game.masks[viewer]
    hidden_lookup = {t: i for i, t in enumerate(game.hidden_templates)}
    out = np.zeros((MAX_RULES, RULE_ROW_WIDTH), dtype=np.int64)
    for ri, rule in enumerate(game.rules[:MAX_RULES]):
        vis = mask.for_rule(ri)
        if vis.kind == VisKind.FULLY_HIDDEN:
            out[ri, 1] = PRED_RULE_HIDDEN
            continue
        cond = rule.condition
        row = out[ri]
        row[0] = int(cond.negated)
        if vis.kind == VisKind.PREDICATE_HIDDEN:
            row[1] = PRED_HIDDEN_BASE + (vis.hidden_predicate or 0)
        else:
            row[1] = int(cond.relation)
        obj_hidden = hidden_lookup if vis.kind == VisKind.OBJECTS_HIDDEN else None
        row[2], row[3] = _ref_atoms(cond.arg_a, viewer, obj_hidden)
        row[4], row[5] = _ref_atoms(cond.arg_b, viewer, obj_hidden)
        for si, spec in enumerate(rule.spawns[:4]):
            base = 18 + 2 * si
            if obj_hidden is not None and spec.template in obj_hidden:
                row[base] = SHAPE_HIDDEN_BASE + obj_hidden[spec.template]
                row[base + 1] = COLOR_NONE
            else:
                row[base] = int(spec.shape)
                row[base + 1] = int(spec.color)
    return out


def encode_view(sim: Simulator, state: EnvState, viewer: int,
                radius: int = VIEW_RADIUS) -> np.ndarray:
    side = 2 * radius + 1
    view = np.zeros((side, side, VIEW_CHANNELS), dtype=np.float32)
    px, py = state.players[viewer].cell
    held_ids = {p.holding for p in state.players if p.holding is not None}
    by_cell: dict[Cell, list] = {}
    for o in state.objects.values():
        if o.id in held_ids:
            continue  # carried objects appear via is_holding, not on the ground
        by_cell.setdefault(o.cell, []).append(o)
    player_cells = {p.cell for p in state.players}
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            cell = (px + dx, py + dy)
            vx, vy = dx + radius, dy + radius
            if not sim.world.is_passable(cell):
                view[vy, vx, 7] = 1.0
                continue
            for o in by_cell.get(cell, []):
                view[vy, vx, int(o.shape) - 1] = 1.0
                view[vy, vx, 3 + int(o.color) - 1] = 1.0
            if cell in player_cells:
                view[vy, vx, 6] = 1.0
    return view


def encode_last_action(action: Action | None) -> np.ndarray:
    out = np.zeros(sum(ACTION_GROUP_SIZES), dtype=np.float32)
    if action is not None:
        out[action.move] = 1.0
        out[5 + int(action.grab)] = 1.0
        out[7 + int(action.drop)] = 1.0
    return out


def static_encoding(sim: Simulator, viewer: int) -> tuple[np.ndarray, np.ndarray]:
    """(goal atoms, rule matrix): constant across an episode, cacheable."""
    return encode_goal(sim.game.goals[viewer], viewer), encode_rules(sim.game, viewer)


def build_observation(sim: Simulator, viewer: int,
                      last_action: Action | None,
                      last_reward: float,
                      view_radius: int = VIEW_RADIUS,
                      static: tuple[np.ndarray, np.ndarray] | None = None
                      ) -> Observation:
    state = sim.state
    cfg = sim.config
    remaining = cfg.k - state.trial_index  # counts the current trial
    trials_onehot = np.zeros(TRIALS_ONEHOT, dtype=np.float32)
    trials_onehot[min(remaining, TRIALS_ONEHOT) - 1] = 1.0
    steps_until_last = max(0, (cfg.k - 1 - state.trial_index) * cfg.trial_length
                           - state.tick)
    if static is None:
        static = static_encoding(sim, viewer)
    goal_atoms, rules = static
    return Observation(
        view=encode_view(sim, state, viewer, view_radius),
        is_holding=1.0 if state.players[viewer].holding is not None else 0.0,
        last_action=encode_last_action(last_action),
        reward=float(last_reward),
        goal_atoms=goal_atoms,
        rules=rules,
        trials_remaining=trials_onehot,
        more_than_5_trials=1.0 if remaining > TRIALS_ONEHOT else 0.0,
        steps_until_last_trial=float(steps_until_last),
        steps_left_in_trial=float(cfg.trial_length - state.tick),
        duration_last_trial=float(cfg.trial_length),
        duration_next_trial=float(cfg.trial_length),
    )
