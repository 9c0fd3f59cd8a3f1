"""Policy, binned value/reward, and the action-conditional model unroll."""

from __future__ import annotations

import torch
from torch import nn

from .config import NetConfig
from .memory import LSTMCell


def support_bins(cfg: NetConfig, dtype=torch.float32) -> torch.Tensor:
    return torch.linspace(cfg.value_min, cfg.value_max, cfg.value_bins,
                          dtype=dtype)


def scalar_to_two_hot(x: torch.Tensor, cfg: NetConfig) -> torch.Tensor:
    """Project scalars onto the bin support: probability mass split between
    the two nearest bin centres (clamped at the edges)."""
    bins = support_bins(cfg, dtype=x.dtype).to(x.device)
    n = cfg.value_bins
    x = x.clamp(cfg.value_min, cfg.value_max)
    pos = (x - cfg.value_min) / (cfg.value_max - cfg.value_min) * (n - 1)
    lo = pos.floor().long().clamp(0, n - 1)
    hi = (lo + 1).clamp(0, n - 1)
    w_hi = (pos - lo.to(pos.dtype)).clamp(0.0, 1.0)
    out = torch.zeros(*x.shape, n, dtype=x.dtype, device=x.device)
    out.scatter_(-1, lo.unsqueeze(-1), (1 - w_hi).unsqueeze(-1))
    out.scatter_add_(-1, hi.unsqueeze(-1), w_hi.unsqueeze(-1))
    return out


def bins_to_scalar(logits: torch.Tensor, cfg: NetConfig) -> torch.Tensor:
    """Expectation decode of binned logits."""
    bins = support_bins(cfg, dtype=logits.dtype).to(logits.device)
    return torch.softmax(logits, dim=-1) @ bins


class PolicyHead(nn.Module):
    """Independent categorical logits per decomposed action group."""

    def __init__(self, in_size: int, width: int, groups: tuple[int, ...]):
        super().__init__()
        self.trunk = nn.Sequential(nn.Linear(in_size, width), nn.GELU())
        self.heads = nn.ModuleList(nn.Linear(width, g) for g in groups)
        self.groups = groups

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        h = self.trunk(x)
        return [head(h) for head in self.heads]


class ValueHead(nn.Module):
    def __init__(self, in_size: int, width: int, bins: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(in_size, width), nn.GELU(),
                                 nn.Linear(width, bins))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class ModelUnroll(nn.Module):
    """Action-conditional sequence model.

    From a memory output the initial LSTM state is produced by two MLPs; each
    applied action advances the state. Heads on state j give the policy/value
    for the situation after j actions and the reward of the j-th action:

        pi_hat_i, v_hat_i  <- state_i      (i = 1..I; i = 0 uses the direct heads)
        r_hat_i            <- state_{i+1}  (the reward of action a_{t+i})
    """

    def __init__(self, cfg: NetConfig):
        super().__init__()
        w = cfg.model_width
        d = cfg.memory.d_model
        self.init_h = nn.Sequential(nn.Linear(d, w), nn.GELU(), nn.Linear(w, w))
        self.init_c = nn.Sequential(nn.Linear(d, w), nn.GELU(), nn.Linear(w, w))
        self.action_embed = nn.ModuleList(
            nn.Embedding(g, w // len(cfg.action_groups) + 1)
            for g in cfg.action_groups
        )
        a_width = sum(w // len(cfg.action_groups) + 1 for _ in cfg.action_groups)
        self.cell = LSTMCell(a_width, w)
        self.reward_head = ValueHead(w, cfg.head_width, cfg.value_bins)
        self.value_head = ValueHead(w, cfg.head_width, cfg.value_bins)
        self.policy_head = PolicyHead(w, cfg.head_width, cfg.action_groups)

    def init_state(self, memory_out: torch.Tensor):
        return (self.init_h(memory_out), self.init_c(memory_out))

    def step(self, state, actions: torch.Tensor):
        """actions [..., n_groups] long; one LSTM step conditioned on them."""
        parts = [emb(actions[..., gi]) for gi, emb in enumerate(self.action_embed)]
        x = torch.cat(parts, dim=-1)
        _, state = self.cell(x, state)
        return state

    def heads(self, state):
        h = state[0]
        return {
            "policy": self.policy_head(h),
            "value": self.value_head(h),
            "reward": self.reward_head(h),
        }
