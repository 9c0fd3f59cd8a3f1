"""Domain types for the grid world: worlds, objects, predicates, rules, games."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import ClassVar, Optional, Union

from .geometry import Cell, flood_fill


class SpecError(ValueError):
    """A malformed specification (bad predicate, bad world, bad action)."""


class Shape(IntEnum):
    CUBE = 1
    SPHERE = 2
    PYRAMID = 3


class Color(IntEnum):
    BLACK = 1
    PURPLE = 2
    YELLOW = 3


class Relation(IntEnum):
    NEAR = 1
    TOUCHING = 2
    HOLD = 3
    SEE = 4


Template = tuple[Shape, Color]

ALL_TEMPLATES: tuple[Template, ...] = tuple(
    (s, c) for s in Shape for c in Color
)


@dataclass(frozen=True)
class PlayerRef:
    index: int


@dataclass(frozen=True)
class TemplateRef:
    shape: Shape
    color: Color

    @property
    def template(self) -> Template:
        return (self.shape, self.color)


@dataclass(frozen=True)
class HiddenObjectRef:
    """Observation-side stand-in for a concealed object template.

    Only valid inside encoded observations; evaluating a predicate against one
    is a specification error.
    """

    index: int


EntityRef = Union[PlayerRef, TemplateRef, HiddenObjectRef]


@dataclass(frozen=True)
class Predicate:
    relation: Relation
    arg_a: EntityRef
    arg_b: EntityRef
    negated: bool = False

    def __post_init__(self) -> None:
        if self.relation == Relation.HOLD and not isinstance(self.arg_a, PlayerRef):
            raise SpecError("hold() requires a player as its first argument")
        if self.relation == Relation.HOLD and isinstance(self.arg_b, PlayerRef):
            raise SpecError("hold() requires an object template as its second argument")

    def substitute_player(self, old: int, new: int) -> "Predicate":
        def sub(ref: EntityRef) -> EntityRef:
            if isinstance(ref, PlayerRef) and ref.index == old:
                return PlayerRef(new)
            return ref

        return replace(self, arg_a=sub(self.arg_a), arg_b=sub(self.arg_b))

    def templates(self) -> list[Template]:
        out = []
        for ref in (self.arg_a, self.arg_b):
            if isinstance(ref, TemplateRef):
                out.append(ref.template)
        return out


@dataclass(frozen=True)
class ObjectSpec:
    shape: Shape
    color: Color
    cell: Optional[Cell] = None  # None means "placed at task materialisation"
    frozen: bool = False

    @property
    def template(self) -> Template:
        return (self.shape, self.color)


@dataclass
class ObjectInstance:
    id: int
    shape: Shape
    color: Color
    cell: Cell
    frozen: bool = False
    held_by: Optional[int] = None

    @property
    def template(self) -> Template:
        return (self.shape, self.color)


class VisKind(IntEnum):
    VISIBLE = 0
    FULLY_HIDDEN = 1
    OBJECTS_HIDDEN = 2
    PREDICATE_HIDDEN = 3


@dataclass(frozen=True)
class Visibility:
    """Per-rule concealment directive for one viewer.

    For OBJECTS_HIDDEN, `hidden_objects` lists indices into the game-level
    hidden-template table so the same concealed template renders as the same
    numbered placeholder in every rule that mentions it. For PREDICATE_HIDDEN,
    `hidden_predicate` numbers the concealed relation.
    """

    kind: VisKind = VisKind.VISIBLE
    hidden_objects: tuple[int, ...] = ()
    hidden_predicate: Optional[int] = None


@dataclass(frozen=True)
class ProductionRule:
    condition: Predicate  # capacity for up to 3 conjuncts exists in the wire format; exactly 1 is used
    spawns: tuple[ObjectSpec, ...] = ()

    def __post_init__(self) -> None:
        if len(self.spawns) > 4:
            raise SpecError("a rule may spawn at most 4 objects")

    def substitute_player(self, old: int, new: int) -> "ProductionRule":
        return replace(self, condition=self.condition.substitute_player(old, new))


@dataclass(frozen=True)
class HidingMask:
    """One viewer's rule-panel concealment: one Visibility entry per rule."""

    entries: tuple[Visibility, ...] = ()

    def for_rule(self, idx: int) -> Visibility:
        if idx < len(self.entries):
            return self.entries[idx]
        return Visibility()


@dataclass(frozen=True)
class Game:
    goals: tuple[Predicate, ...]  # one per player; cooperative games share one goal
    rules: tuple[ProductionRule, ...]
    masks: tuple[HidingMask, ...]  # one per player
    initial_objects: tuple[ObjectSpec, ...] = ()
    hidden_templates: tuple[Template, ...] = ()  # numbering table for OBJECTS_HIDDEN

    @property
    def num_players(self) -> int:
        return len(self.goals)

    def __post_init__(self) -> None:
        if len(self.masks) != len(self.goals):
            raise SpecError("one hiding mask required per player")
        if len(self.goals) == 2 and self.goals[0] != self.goals[1]:
            raise SpecError("two-player games are fully cooperative: goals must match")


@dataclass(frozen=True)
class GridWorld:
    width: int
    height: int
    walls: frozenset[Cell]
    spawn_points: tuple[tuple[Cell, int], ...]  # (cell, player slot)
    initial_objects: tuple[ObjectSpec, ...] = ()

    def __post_init__(self) -> None:
        for cell, slot in self.spawn_points:
            if not self.in_bounds(cell) or cell in self.walls:
                raise SpecError(f"spawn point {cell} (slot {slot}) is not passable")
        for spec in self.initial_objects:
            if spec.cell is None:
                raise SpecError("world-authored objects must carry a cell")
            if not self.in_bounds(spec.cell) or spec.cell in self.walls:
                raise SpecError(f"object cell {spec.cell} is not passable")
        slots = {slot for _, slot in self.spawn_points}
        if 0 not in slots:
            raise SpecError("at least one spawn point for player slot 0 required")

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_passable(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.walls

    @property
    def passable_cells(self) -> frozenset[Cell]:
        return frozenset(
            (x, y)
            for y in range(self.height)
            for x in range(self.width)
            if (x, y) not in self.walls
        )

    def spawn_for(self, slot: int) -> Cell:
        for cell, s in self.spawn_points:
            if s == slot:
                return cell
        raise SpecError(f"no spawn point for player slot {slot}")

    def connected(self) -> bool:
        passable = set(self.passable_cells)
        if not passable:
            return False
        start = next(iter(sorted(passable, key=lambda c: (c[1], c[0]))))
        return flood_fill(start, passable) == passable


@dataclass(frozen=True)
class EpisodeConfig:
    k: int  # trial count
    trial_length: int  # steps per trial, uniform across the episode
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.k <= 24:
            raise SpecError("k must lie in 1..24")
        if self.trial_length < 1:
            raise SpecError("trial_length must be positive")


@dataclass(frozen=True)
class Action:
    """One player's action for one tick: a move choice plus grab/drop flags.

    The three decomposed groups are move (none/N/E/S/W), grab (off/on) and
    drop (off/on). Grab applies only when empty-handed and drop only when
    holding, so the flags never conflict.
    """

    move: int = 0  # 0 none, 1 N, 2 E, 3 S, 4 W
    grab: bool = False
    drop: bool = False

    NOOP: ClassVar["Action"]

    def __post_init__(self) -> None:
        if not 0 <= self.move <= 4:
            raise SpecError("move must lie in 0..4")


Action.NOOP = Action()

MOVE_DELTAS: dict[int, tuple[int, int]] = {
    1: (0, -1),  # N
    2: (1, 0),  # E
    3: (0, 1),  # S
    4: (-1, 0),  # W
}

ALL_ACTIONS: tuple[Action, ...] = tuple(
    Action(move=m, grab=g, drop=d)
    for m, g, d in itertools.product(range(5), (False, True), (False, True))
)


def action_to_groups(a: Action) -> tuple[int, int, int]:
    return (a.move, int(a.grab), int(a.drop))


def action_from_groups(move: int, grab: int, drop: int) -> Action:
    return Action(move=move, grab=bool(grab), drop=bool(drop))


ACTION_GROUP_SIZES: tuple[int, int, int] = (5, 2, 2)


def describe_template(t: Template) -> str:
    return f"{Color(t[1]).name.lower()} {Shape(t[0]).name.lower()}"


def describe_ref(ref: EntityRef) -> str:
    if isinstance(ref, PlayerRef):
        return f"player{ref.index}"
    if isinstance(ref, HiddenObjectRef):
        return f"hidden object {ref.index}"
    return describe_template(ref.template)


def describe_predicate(p: Predicate) -> str:
    body = f"{Relation(p.relation).name.lower()}({describe_ref(p.arg_a)}, {describe_ref(p.arg_b)})"
    return f"not {body}" if p.negated else body
