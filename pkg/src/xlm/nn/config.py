"""Network configuration. The memory section mirrors the fields a scaled-up
run would set (embedding size, blocks, key/value size, heads, feedforward
width); desk defaults are small."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum

from ..env.observe import VIEW_RADIUS
from ..env.types import ACTION_GROUP_SIZES


class MemoryVariant(str, Enum):
    RNN = "rnn"
    RNN_ATTENTION = "rnn_attention"
    TXL = "txl"
    TXL_SKIP = "txl_skip"


@dataclass(frozen=True)
class EncoderConfig:
    view_radius: int = VIEW_RADIUS
    atom_embed: int = 8          # embedding width per goal/rule atom
    goal_mlp: tuple[int, ...] = (8, 8, 8)
    rule_embed: int = 32         # per-rule embedding after the rule MLP
    rule_mlp: tuple[int, ...] = (64, 32)


@dataclass(frozen=True)
class MemoryConfig:
    variant: MemoryVariant = MemoryVariant.TXL
    d_model: int = 64            # embedding size
    blocks: int = 4              # transformer blocks / recurrent depth 1
    heads: int = 4
    key_size: int = 16
    value_size: int = 16
    ffw_size: int = 256          # defaults to 4 * d_model at scale
    cache_len: int = 128         # M cached activations
    episodic_slots: int = 64     # RNN-with-attention memory slots
    episodic_stride: int = 8     # store every 8th activation
    skip_stride: int = 4         # TXL-skip cache subsampling

    @property
    def effective_horizon(self) -> int:
        if self.variant == MemoryVariant.TXL:
            return self.cache_len * self.blocks
        if self.variant == MemoryVariant.TXL_SKIP:
            return self.cache_len * self.blocks * self.skip_stride
        if self.variant == MemoryVariant.RNN_ATTENTION:
            return self.episodic_slots * self.episodic_stride
        return 0  # plain recurrence has no fixed horizon


@dataclass(frozen=True)
class NetConfig:
    encoder: EncoderConfig = EncoderConfig()
    memory: MemoryConfig = MemoryConfig()
    action_groups: tuple[int, ...] = ACTION_GROUP_SIZES
    value_bins: int = 51
    value_min: float = -50.0
    value_max: float = 50.0
    model_unroll: int = 4        # I
    model_width: int = 64        # Muesli LSTM width
    head_width: int = 64

    def to_dict(self) -> dict:
        d = asdict(self)
        d["memory"]["variant"] = self.memory.variant.value
        return d

    @staticmethod
    def from_dict(d: dict) -> "NetConfig":
        enc = EncoderConfig(**{**d["encoder"],
                               "goal_mlp": tuple(d["encoder"]["goal_mlp"]),
                               "rule_mlp": tuple(d["encoder"]["rule_mlp"])})
        mem_d = dict(d["memory"])
        mem_d["variant"] = MemoryVariant(mem_d["variant"])
        mem = MemoryConfig(**mem_d)
        return NetConfig(encoder=enc, memory=mem,
                         action_groups=tuple(d["action_groups"]),
                         value_bins=d["value_bins"], value_min=d["value_min"],
                         value_max=d["value_max"],
                         model_unroll=d["model_unroll"],
                         model_width=d["model_width"],
                         head_width=d["head_width"])
