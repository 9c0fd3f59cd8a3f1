"""Serializable top-down frames for the play service and replay viewer."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

from .sim import EnvState, Simulator
from .types import (
    Game,
    describe_predicate,
    describe_template,
    VisKind,
)


@dataclass(frozen=True)
class RenderFrame:
    width: int
    height: int
    walls: list[list[int]]           # [x, y]
    objects: list[dict]              # {id, shape, color, x, y, frozen, held_by}
    players: list[dict]              # {index, x, y, facing, holding}
    goal_text: str
    rule_panel: list[str]            # viewer-masked rule descriptions
    scores: list[int]                # per-player cumulative reward this trial
    trial_index: int
    trials_total: int
    ticks_left: int

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "RenderFrame":
        return RenderFrame(**d)


def describe_rule(game: Game, idx: int, viewer: Optional[int]) -> str:
    """Viewer-facing rule text with the viewer's hiding mask applied.

    A spectator (viewer None) sees everything unmasked.
    """
    rule = game.rules[idx]
    if viewer is None:
        vis_kind = VisKind.VISIBLE
        hidden_templates: set = set()
        hidden_pred = None
    else:
        vis = game.masks[viewer].for_rule(idx)
        vis_kind = vis.kind
        hidden_templates = set(game.hidden_templates) if vis.kind == VisKind.OBJECTS_HIDDEN else set()
        hidden_pred = vis.hidden_predicate if vis.kind == VisKind.PREDICATE_HIDDEN else None

    if vis_kind == VisKind.FULLY_HIDDEN:
        return "a rule exists (hidden)"

    hidden_index = {t: i for i, t in enumerate(game.hidden_templates)}

    def ref_text(ref) -> str:
        from .types import TemplateRef
        if isinstance(ref, TemplateRef) and ref.template in hidden_templates:
            return f"object #{hidden_index[ref.template]} (hidden)"
        from .types import describe_ref
        return describe_ref(ref)

    cond = rule.condition
    rel_text = f"predicate #{hidden_pred} (hidden)" if hidden_pred is not None \
        else cond.relation.name.lower()
    cond_text = f"{rel_text}({ref_text(cond.arg_a)}, {ref_text(cond.arg_b)})"
    if cond.negated:
        cond_text = f"not {cond_text}"
    if rule.spawns:
        spawn_parts = []
        for s in rule.spawns:
            if s.template in hidden_templates:
                spawn_parts.append(f"object #{hidden_index[s.template]} (hidden)")
            else:
                spawn_parts.append(describe_template(s.template))
        spawn_text = ", ".join(spawn_parts)
    else:
        spawn_text = "nothing"
    return f"{cond_text} -> {spawn_text}"


def render_topdown(sim: Simulator, viewer: Optional[int],
                   trial_scores: Optional[list[int]] = None) -> RenderFrame:
    """Build a frame for one viewer. viewer=None renders the spectator view."""
    state: EnvState = sim.state
    game = sim.game
    held_ids = {p.holding for p in state.players if p.holding is not None}
    objects = [
        {
            "id": o.id,
            "shape": o.shape.name.lower(),
            "color": o.color.name.lower(),
            "x": o.cell[0],
            "y": o.cell[1],
            "frozen": o.frozen,
            "held_by": o.held_by if o.id in held_ids else None,
        }
        for o in state.alive_instances()
    ]
    players = [
        {"index": i, "x": p.cell[0], "y": p.cell[1], "facing": p.facing,
         "holding": p.holding}
        for i, p in enumerate(state.players)
    ]
    goal = game.goals[viewer if viewer is not None else 0]
    return RenderFrame(
        width=sim.world.width,
        height=sim.world.height,
        walls=sorted([list(c) for c in sim.world.walls]),
        objects=objects,
        players=players,
        goal_text=describe_predicate(goal),
        rule_panel=[describe_rule(game, i, viewer) for i in range(len(game.rules))],
        scores=list(trial_scores) if trial_scores is not None
               else [0] * len(state.players),
        trial_index=state.trial_index,
        trials_total=sim.config.k,
        ticks_left=sim.config.trial_length - state.tick,
    )
