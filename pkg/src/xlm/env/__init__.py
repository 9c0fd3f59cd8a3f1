from .types import (
    Shape,
    Color,
    Relation,
    EntityRef,
    Predicate,
    ObjectSpec,
    ObjectInstance,
    ProductionRule,
    Visibility,
    Game,
    GridWorld,
    EpisodeConfig,
    Action,
    SpecError,
)
from .sim import Simulator, EnvState, StepResult
from .observe import Observation, observation_sizes
from .render import RenderFrame, render_topdown

__all__ = [
    "Shape",
    "Color",
    "Relation",
    "EntityRef",
    "Predicate",
    "ObjectSpec",
    "ObjectInstance",
    "ProductionRule",
    "Visibility",
    "Game",
    "GridWorld",
    "EpisodeConfig",
    "Action",
    "SpecError",
    "Simulator",
    "EnvState",
    "StepResult",
    "Observation",
    "observation_sizes",
    "RenderFrame",
    "render_topdown",
]
