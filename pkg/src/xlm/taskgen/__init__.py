from .params import GenParams, GenerationError
from .task import Task, materialize_objects
from .worlds import sample_world
from .games import GameInfo, derive_two_player, freeze_objects, sample_game, structural_key
from .oracle import SolveReport, oracle_solve
from .pool import TaskPool, load_pool, presample_pool, save_pool, split_holdout

__all__ = [
    "GenParams",
    "GenerationError",
    "Task",
    "materialize_objects",
    "sample_world",
    "GameInfo",
    "sample_game",
    "derive_two_player",
    "freeze_objects",
    "structural_key",
    "SolveReport",
    "oracle_solve",
    "TaskPool",
    "presample_pool",
    "split_holdout",
    "save_pool",
    "load_pool",
]
