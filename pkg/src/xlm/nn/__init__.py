from .config import EncoderConfig, MemoryConfig, MemoryVariant, NetConfig
from .network import AgentNetwork
from .heads import bins_to_scalar, scalar_to_two_hot

__all__ = [
    "EncoderConfig",
    "MemoryConfig",
    "MemoryVariant",
    "NetConfig",
    "AgentNetwork",
    "bins_to_scalar",
    "scalar_to_two_hot",
]
