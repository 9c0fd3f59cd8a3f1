from .targets import AdvantageNormalizer, cmpo_target, retrace_targets
from .losses import LossBundle, distill_loss, muesli_losses
from .config import TrainConfig

__all__ = [
    "retrace_targets",
    "cmpo_target",
    "AdvantageNormalizer",
    "LossBundle",
    "muesli_losses",
    "distill_loss",
    "TrainConfig",
]
