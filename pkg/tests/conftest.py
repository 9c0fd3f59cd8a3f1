import pytest

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

YS = TemplateRef(Shape.SPHERE, Color.YELLOW)
BC = TemplateRef(Shape.CUBE, Color.BLACK)
PC = TemplateRef(Shape.CUBE, Color.PURPLE)
YP = TemplateRef(Shape.PYRAMID, Color.YELLOW)
BS = TemplateRef(Shape.SPHERE, Color.BLACK)


def open_world(w=7, h=7, walls=(), spawns=(((1, 1), 0),), objects=()):
    return GridWorld(w, h, frozenset(walls), tuple(spawns), tuple(objects))


def single_goal_game(goal, rules=(), objects=(), masks=None, hidden=()):
    if masks is None:
        masks = (HidingMask(),)
    return Game(goals=(goal,), rules=tuple(rules), masks=masks,
                initial_objects=tuple(objects), hidden_templates=tuple(hidden))


@pytest.fixture
def near_goal():
    return Predicate(Relation.NEAR, YS, BC)
