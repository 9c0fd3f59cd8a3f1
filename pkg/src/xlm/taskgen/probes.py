"""Authored task families.

`minipool_*` builders produce procedural variants of two archetypes whose
solution hinges on information revealed by earlier trials (a hidden goal
location, a hidden productive object). `build_probe_set` assembles the small
authored probe suite covering qualitatively distinct adaptation behaviours:
pre-solved tasks, experimentation among look-alikes, crafting chains, dead
ends, and two-player coordination.
"""

from __future__ import annotations

import random
from dataclasses import replace

from ..env.types import (
    Color,
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
    Visibility,
    VisKind,
)
from .task import Task

YS = TemplateRef(Shape.SPHERE, Color.YELLOW)
BS = TemplateRef(Shape.SPHERE, Color.BLACK)
PS = TemplateRef(Shape.SPHERE, Color.PURPLE)
YC = TemplateRef(Shape.CUBE, Color.YELLOW)
BC = TemplateRef(Shape.CUBE, Color.BLACK)
PC = TemplateRef(Shape.CUBE, Color.PURPLE)
YP = TemplateRef(Shape.PYRAMID, Color.YELLOW)
BP = TemplateRef(Shape.PYRAMID, Color.BLACK)
PP = TemplateRef(Shape.PYRAMID, Color.PURPLE)

FULL_HIDE = Visibility(kind=VisKind.FULLY_HIDDEN)


def _open_world(w: int, h: int, spawn, spawn2=None) -> GridWorld:
    spawns = [(spawn, 0)]
    spawns.append((spawn2, 1) if spawn2 else ((w - 1, h - 1), 1))
    return GridWorld(w, h, frozenset(), tuple(spawns))


def _mask(game_rules, hidden=True) -> HidingMask:
    vis = FULL_HIDE if hidden else Visibility()
    return HidingMask(tuple(vis for _ in game_rules))


def doors_task(world_id: int, side: str, row: int, width: int = 13,
               height: int = 5, trial_length: int = 8,
               depth: str = "far") -> Task:
    """Hidden goal location: the target sphere sits at the west or east end,
    out of sight. At depth "far" only one end is reachable within a trial, so
    the first trial is a coin flip; "near" variants are solvable zero-shot and
    seed the basic approach behaviour."""
    spawn = (width // 2, height // 2)
    world = _open_world(width, height, spawn)
    goal = Predicate(Relation.NEAR, PlayerRef(0), YS)
    game = Game(goals=(goal,), rules=(), masks=(HidingMask(),),)
    offset = 2 if depth == "near" else width // 2 - 2
    x = (width // 2 - 2 - offset) if side == "west" else (width // 2 + 2 + offset)
    decoy_x = width - 1 - x
    objects = (
        ObjectSpec(Shape.SPHERE, Color.YELLOW, (x, row)),
        ObjectSpec(Shape.CUBE, Color.BLACK, (decoy_x, height - 1 - row)),
    )
    return Task(world_id=world_id, game_id=world_id, world=world, game=game,
                objects=objects, trial_length=trial_length)


def jumbled_task(world_id: int, productive: str, side_of: dict[str, str],
                 width: int = 13, height: int = 5,
                 trial_length: int = 8, depth: str = "far") -> Task:
    """Two look-alike spheres; a fully hidden rule turns only one of them,
    when held, into the goal cube. Which one is hidden information. At depth
    "far" only one sphere is reachable per trial."""
    spawn = (width // 2, height // 2)
    world = _open_world(width, height, spawn)
    colors = {"yellow": Color.YELLOW, "black": Color.BLACK}
    rule = ProductionRule(
        Predicate(Relation.HOLD, PlayerRef(0),
                  TemplateRef(Shape.SPHERE, colors[productive])),
        (ObjectSpec(Shape.CUBE, Color.PURPLE),),
    )
    goal = Predicate(Relation.NEAR, PlayerRef(0), PC)
    game = Game(goals=(goal,), rules=(rule,), masks=(_mask([rule]),))
    offset = 1 if depth == "near" else width // 2 - 1
    objects = []
    for color_name, side in side_of.items():
        x = (width // 2 - offset) if side == "west" else (width // 2 + offset)
        objects.append(ObjectSpec(Shape.SPHERE, colors[color_name],
                                  (x, height // 2)))
    return Task(world_id=world_id, game_id=world_id, world=world, game=game,
                objects=tuple(objects), trial_length=trial_length)


def minipool_doors(n: int = 8, trial_length: int = 8,
                   n_near: int = 2) -> list[Task]:
    tasks = []
    rows = [1, 2, 3]
    i = 0
    while len(tasks) < n:
        side = "west" if i % 2 == 0 else "east"
        row = rows[(i // 2) % len(rows)]
        depth = "near" if i < n_near else "far"
        tasks.append(doors_task(1000 + i, side, row, trial_length=trial_length,
                                depth=depth))
        i += 1
    return tasks


def minipool_jumbled(n: int = 8, trial_length: int = 8,
                     n_near: int = 2) -> list[Task]:
    tasks = []
    i = 0
    while len(tasks) < n:
        productive = "yellow" if i % 2 == 0 else "black"
        flip = (i // 2) % 2 == 0
        side_of = {"yellow": "west" if flip else "east",
                   "black": "east" if flip else "west"}
        depth = "near" if i < n_near else "far"
        tasks.append(jumbled_task(2000 + i, productive, side_of,
                                  trial_length=trial_length, depth=depth))
        i += 1
    return tasks


def adaptation_minipool(trial_length: int = 8) -> list[Task]:
    """8 doors + 8 jumbled variants, two zero-shot-solvable seeds per family;
    the hard majority requires across-trial information use."""
    return minipool_doors(8, trial_length) + minipool_jumbled(8, trial_length)


# -- curriculum ladder ---------------------------------------------------------


def presolved_task(world_id: int, jitter: int, trial_length: int) -> Task:
    """Reward flows from the start; grabbing the sphere next to the cube ends
    it (a hidden dead end punishes meddling)."""
    world = _open_world(9, 5, (4, 2))
    rule = ProductionRule(Predicate(Relation.TOUCHING, YS, BC), ())
    goal = Predicate(Relation.NEAR, YS, BC)
    game = Game(goals=(goal,), rules=(rule,), masks=(_mask([rule]),))
    x = 1 + jitter % 3
    objects = (ObjectSpec(Shape.SPHERE, Color.YELLOW, (x, 1)),
               ObjectSpec(Shape.CUBE, Color.BLACK, (x + 2, 1)))
    return Task(world_id=world_id, game_id=world_id, world=world, game=game,
                objects=objects, trial_length=trial_length)


def easy_nav_task(world_id: int, jitter: int, trial_length: int) -> Task:
    """The goal sphere is in view range; walk over to it."""
    world = _open_world(9, 5, (4, 2))
    goal = Predicate(Relation.NEAR, PlayerRef(0), YS)
    game = Game(goals=(goal,), rules=(), masks=(HidingMask(),))
    spots = [(1, 1), (7, 1), (1, 3), (7, 3), (4, 0), (4, 4)]
    objects = (ObjectSpec(Shape.SPHERE, Color.YELLOW, spots[jitter % len(spots)]),)
    return Task(world_id=world_id, game_id=world_id, world=world, game=game,
                objects=objects, trial_length=trial_length)


def chain_task(world_id: int, depth: int, jitter: int,
               trial_length: int, n_distractors: int = 0) -> Task:
    """Visible hold-rule chain: grab the right objects in sequence."""
    width, height = 11, 5
    world = _open_world(width, height, (width // 2, height // 2))
    mids = [BP, PP, YP]
    stages = [YS] + mids[:depth - 1]  # held template per stage
    rules = []
    for level, inp in enumerate(stages):
        spawn_tpl = mids[level] if level < depth - 1 else PC
        rules.append(ProductionRule(
            Predicate(Relation.HOLD, PlayerRef(0), inp),
            (ObjectSpec(spawn_tpl.shape, spawn_tpl.color),),
        ))
    goal = Predicate(Relation.NEAR, PlayerRef(0), PC)
    game = Game(goals=(goal,), rules=tuple(rules),
                masks=(_mask(rules, hidden=False),))
    rng = random.Random(("chain", world_id, jitter).__repr__())
    cells = [(x, y) for x in range(width) for y in range(height)
             if (x, y) != (width // 2, height // 2)]
    rng.shuffle(cells)
    objects = [ObjectSpec(stages[0].shape, stages[0].color, cells.pop())]
    distract_templates = [YC, BC, YP][:n_distractors]
    for t in distract_templates:
        objects.append(ObjectSpec(t.shape, t.color, cells.pop()))
    return Task(world_id=world_id, game_id=world_id, world=world, game=game,
                objects=tuple(objects), trial_length=trial_length)


def curriculum_pool(trial_length: int = 8, n_per_level: int = 260
                    ) -> tuple[list[Task], dict]:
    """Difficulty ladder for curriculum comparisons: rule count grows with
    level. Returns (tasks, task_id -> metadata)."""
    tasks: list[Task] = []
    meta: dict = {}
    wid = 10_000
    for i in range(n_per_level):
        t = presolved_task(wid, i, trial_length)
        tasks.append(t)
        meta[t.task_id] = {"level": 0, "rules": 1, "family": "presolved"}
        wid += 1
    for i in range(n_per_level):
        t = easy_nav_task(wid, i, trial_length)
        tasks.append(t)
        meta[t.task_id] = {"level": 1, "rules": 0, "family": "easy_nav"}
        wid += 1
    for i in range(n_per_level):
        t = doors_task(wid, "west" if i % 2 == 0 else "east", 1 + i % 3,
                       trial_length=trial_length)
        tasks.append(t)
        meta[t.task_id] = {"level": 2, "rules": 0, "family": "doors"}
        wid += 1
    for i in range(n_per_level):
        productive = "yellow" if i % 2 == 0 else "black"
        flip = (i // 2) % 2 == 0
        t = jumbled_task(wid, productive,
                         {"yellow": "west" if flip else "east",
                          "black": "east" if flip else "west"},
                         trial_length=trial_length)
        tasks.append(t)
        meta[t.task_id] = {"level": 3, "rules": 1, "family": "jumbled"}
        wid += 1
    for i in range(n_per_level):
        t = chain_task(wid, 2, i, trial_length, n_distractors=i % 3)
        tasks.append(t)
        meta[t.task_id] = {"level": 4, "rules": 2, "family": "chain2"}
        wid += 1
    return tasks, meta


# -- authored probe suite --------------------------------------------------------


def wrong_pair_task(world_id: int = 9001, trial_length: int = 14) -> Task:
    """Goal object does not exist; one hidden rule creates it, another hidden
    rule destroys the inputs. Experimentation finds the right pairing."""
    world = _open_world(9, 7, (4, 3))
    make = ProductionRule(Predicate(Relation.NEAR, YS, PC),
                          (ObjectSpec(Shape.CUBE, Color.BLACK),))
    destroy = ProductionRule(Predicate(Relation.NEAR, YS, BS), ())
    rules = (make, destroy)
    goal = Predicate(Relation.HOLD, PlayerRef(0), BC)
    game = Game(goals=(goal,), rules=rules, masks=(_mask(rules),))
    objects = (ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 1)),
               ObjectSpec(Shape.CUBE, Color.PURPLE, (7, 1)),
               ObjectSpec(Shape.SPHERE, Color.BLACK, (4, 6)))
    return Task(world_id=world_id, game_id=world_id, world=world, game=game,
                objects=objects, trial_length=trial_length)


def dont_act_task(world_id: int = 9002, trial_length: int = 10) -> Task:
    return presolved_task(world_id, 0, trial_length)


def dont_hold_task(world_id: int = 9003, trial_length: int = 10) -> Task:
    """Pre-solved negated-hold goal: reward for as long as the hand stays off
    the pyramid."""
    world = _open_world(7, 5, (3, 2))
    goal = Predicate(Relation.HOLD, PlayerRef(0), YP, negated=True)
    game = Game(goals=(goal,), rules=(), masks=(HidingMask(),))
    objects = (ObjectSpec(Shape.PYRAMID, Color.YELLOW, (3, 1)),)
    return Task(world_id=world_id, game_id=world_id, world=world, game=game,
                objects=objects, trial_length=trial_length)


def two_dead_ends_task(world_id: int = 9004, trial_length: int = 14) -> Task:
    """Three hidden hold-rules share a signature; two destroy their input,
    one makes the goal cube."""
    world = _open_world(9, 7, (4, 3))
    rules = (
        ProductionRule(Predicate(Relation.HOLD, PlayerRef(0), YS), ()),
        ProductionRule(Predicate(Relation.HOLD, PlayerRef(0), BS),
                       (ObjectSpec(Shape.CUBE, Color.PURPLE),)),
        ProductionRule(Predicate(Relation.HOLD, PlayerRef(0), PS), ()),
    )
    goal = Predicate(Relation.NEAR, PlayerRef(0), PC)
    game = Game(goals=(goal,), rules=rules, masks=(_mask(rules),))
    objects = (ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 1)),
               ObjectSpec(Shape.SPHERE, Color.BLACK, (7, 1)),
               ObjectSpec(Shape.SPHERE, Color.PURPLE, (4, 6)))
    return Task(world_id=world_id, game_id=world_id, world=world, game=game,
                objects=objects, trial_length=trial_length)


def crafting_chain_task(world_id: int = 9005, trial_length: int = 16) -> Task:
    return chain_task(world_id, 3, 0, trial_length, n_distractors=2)


def coordinated_production_task(world_id: int = 9006,
                                trial_length: int = 12) -> Task:
    """Two-player: each seat must hold its own sphere to spawn a cube; the two
    cubes near each other satisfy the shared goal."""
    world = GridWorld(9, 5, frozenset(), (((2, 2), 0), ((6, 2), 1)))
    rules = (
        ProductionRule(Predicate(Relation.HOLD, PlayerRef(0), YS),
                       (ObjectSpec(Shape.CUBE, Color.PURPLE),)),
        ProductionRule(Predicate(Relation.HOLD, PlayerRef(1), BS),
                       (ObjectSpec(Shape.CUBE, Color.YELLOW),)),
    )
    goal = Predicate(Relation.NEAR, PC, YC)
    game = Game(goals=(goal, goal), rules=rules,
                masks=(_mask(rules, hidden=False), _mask(rules, hidden=False)))
    objects = (ObjectSpec(Shape.SPHERE, Color.YELLOW, (1, 1)),
               ObjectSpec(Shape.SPHERE, Color.BLACK, (7, 3)))
    return Task(world_id=world_id, game_id=world_id, world=world, game=game,
                objects=objects, trial_length=trial_length)


def forced_coordination_task(world_id: int = 9007,
                             trial_length: int = 12) -> Task:
    """A frozen wall of pyramids splits the world; the goal pair spans both
    halves, so no single player can solve it alone."""
    width, height = 9, 5
    wall_x = 4
    frozen = tuple(ObjectSpec(Shape.PYRAMID, Color.PURPLE, (wall_x, y), frozen=True)
                   for y in range(height))
    world = GridWorld(width, height, frozenset(), (((1, 2), 0), ((7, 2), 1)))
    goal = Predicate(Relation.HOLD, PlayerRef(1), YS)
    game = Game(goals=(goal, goal), rules=(),
                masks=(HidingMask(), HidingMask()))
    objects = frozen + (ObjectSpec(Shape.SPHERE, Color.YELLOW, (6, 1)),)
    return Task(world_id=world_id, game_id=world_id, world=world, game=game,
                objects=objects, trial_length=trial_length)


def haystack_task(world_id: int = 9008, trial_length: int = 14) -> Task:
    """One useful rule among distractor objects."""
    world = _open_world(9, 7, (4, 3))
    rule = ProductionRule(Predicate(Relation.HOLD, PlayerRef(0), PC),
                          (ObjectSpec(Shape.PYRAMID, Color.YELLOW),))
    goal = Predicate(Relation.NEAR, PlayerRef(0), YP)
    game = Game(goals=(goal,), rules=(rule,), masks=(_mask([rule]),))
    objects = (ObjectSpec(Shape.CUBE, Color.PURPLE, (7, 5)),
               ObjectSpec(Shape.SPHERE, Color.BLACK, (1, 1)),
               ObjectSpec(Shape.CUBE, Color.YELLOW, (1, 5)),
               ObjectSpec(Shape.SPHERE, Color.PURPLE, (7, 1)),
               ObjectSpec(Shape.PYRAMID, Color.BLACK, (4, 6)))
    return Task(world_id=world_id, game_id=world_id, world=world, game=game,
                objects=objects, trial_length=trial_length)


def build_probe_set() -> list[tuple[str, Task]]:
    """Single-player probe tasks (two-player ones are exposed separately)."""
    probes = [
        ("dont_act", dont_act_task()),
        ("dont_hold", dont_hold_task()),
        ("doors_west", doors_task(9101, "west", 2)),
        ("doors_east", doors_task(9102, "east", 2)),
        ("doors_west_hi", doors_task(9103, "west", 1)),
        ("jumbled_yellow", jumbled_task(9104, "yellow",
                                        {"yellow": "west", "black": "east"})),
        ("jumbled_black", jumbled_task(9105, "black",
                                       {"yellow": "west", "black": "east"})),
        ("jumbled_black_flip", jumbled_task(9106, "black",
                                            {"yellow": "east", "black": "west"})),
        ("wrong_pair", wrong_pair_task()),
        ("two_dead_ends", two_dead_ends_task()),
        ("crafting_chain", crafting_chain_task()),
        ("haystack", haystack_task()),
    ]
    return probes


def build_two_player_probes() -> list[tuple[str, Task]]:
    return [
        ("coordinated_production", coordinated_production_task()),
        ("forced_coordination", forced_coordination_task()),
    ]
