from .noop import NoopThresholds, noop_filter
from .fitness import FitnessNormalizer, fitness_action_model, fitness_td, fitness_value_model, trial_fitness
from .plr import PlrArchive, PlrConfig, plr_next_task, try_insert
from .coplayers import CoPlayerPool

__all__ = [
    "NoopThresholds",
    "noop_filter",
    "FitnessNormalizer",
    "fitness_td",
    "fitness_value_model",
    "fitness_action_model",
    "trial_fitness",
    "PlrConfig",
    "PlrArchive",
    "plr_next_task",
    "try_insert",
    "CoPlayerPool",
]
