"""Timestep encoder: egocentric view, goal atoms, rule matrix, scalars into a
single d_model vector.

Goal and rule atoms share embedding tables so hidden-object/predicate
sentinels stay consistent between the two. Rule rows are embedded separately
and mean-pooled; hiding soundness is inherited from the observation encoding
(sentinel indices), so two observations that differ only in concealed content
embed identically by construction.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..env.observe import (
    GOAL_WIDTH,
    MAX_HIDDEN_OBJECTS,
    MAX_HIDDEN_PREDICATES,
    MAX_RULES,
    PRED_RULE_HIDDEN,
    RULE_ROW_WIDTH,
    SHAPE_HIDDEN_BASE,
    Observation,
    TRIALS_ONEHOT,
)
from ..env.types import ACTION_GROUP_SIZES
from .config import EncoderConfig

N_SHAPE_CODES = SHAPE_HIDDEN_BASE + MAX_HIDDEN_OBJECTS  # 0..9
N_COLOR_CODES = 4
N_PRED_CODES = PRED_RULE_HIDDEN + 1                     # 0..9
N_NEG_CODES = 2

TIME_SCALE = 100.0  # step counts are fed as steps / TIME_SCALE


def _mlp(sizes: list[int], out: int) -> nn.Sequential:
    layers: list[nn.Module] = []
    prev = sizes[0]
    for s in sizes[1:]:
        layers += [nn.Linear(prev, s), nn.GELU()]
        prev = s
    layers.append(nn.Linear(prev, out))
    return nn.Sequential(*layers)


class FlatObs:
    """Batch of observations as arrays ready for the encoder."""

    __slots__ = ("view", "scalars", "goal", "rules")

    def __init__(self, view: torch.Tensor, scalars: torch.Tensor,
                 goal: torch.Tensor, rules: torch.Tensor):
        self.view = view        # [B, side, side, 8] float
        self.scalars = scalars  # [B, n_scalar] float
        self.goal = goal        # [B, 6] long
        self.rules = rules      # [B, 16, 26] long

    @staticmethod
    def from_observations(obs: list[Observation], device=None,
                          dtype=torch.float32) -> "FlatObs":
        view = torch.as_tensor(np.stack([o.view for o in obs]), dtype=dtype)
        scal = torch.as_tensor(np.stack([_scalars(o) for o in obs]), dtype=dtype)
        goal = torch.as_tensor(np.stack([o.goal_atoms for o in obs]))
        rules = torch.as_tensor(np.stack([o.rules for o in obs]))
        return FlatObs(view, scal, goal, rules)

    def to(self, dtype):
        return FlatObs(self.view.to(dtype), self.scalars.to(dtype),
                       self.goal, self.rules)


def _scalars(o: Observation) -> np.ndarray:
    return np.concatenate([
        np.array([o.is_holding, o.reward], dtype=np.float32),
        o.last_action.astype(np.float32),
        o.trials_remaining.astype(np.float32),
        np.array([
            o.more_than_5_trials,
            o.steps_until_last_trial / TIME_SCALE,
            o.steps_left_in_trial / TIME_SCALE,
            o.duration_last_trial / TIME_SCALE,
            o.duration_next_trial / TIME_SCALE,
        ], dtype=np.float32),
    ])


N_SCALARS = 2 + sum(ACTION_GROUP_SIZES) + TRIALS_ONEHOT + 5


class TimestepEncoder(nn.Module):
    def __init__(self, cfg: EncoderConfig, d_model: int):
        super().__init__()
        self.cfg = cfg
        side = 2 * cfg.view_radius + 1
        e = cfg.atom_embed
        self.shape_embed = nn.Embedding(N_SHAPE_CODES, e)
        self.color_embed = nn.Embedding(N_COLOR_CODES, e)
        self.pred_embed = nn.Embedding(N_PRED_CODES, e)
        self.neg_embed = nn.Embedding(N_NEG_CODES, e)
        self.goal_mlp = _mlp([6 * e, *cfg.goal_mlp[:-1]], cfg.goal_mlp[-1])
        self.rule_mlp = _mlp([(3 * 6 + 8) * e, *cfg.rule_mlp], cfg.rule_embed)
        self.view_proj = nn.Linear(side * side * 8, d_model)
        combined = d_model + cfg.goal_mlp[-1] + cfg.rule_embed + N_SCALARS
        self.out = nn.Sequential(nn.Linear(combined, d_model), nn.GELU(),
                                 nn.Linear(d_model, d_model))

    def _embed_atom_row(self, row: torch.Tensor) -> torch.Tensor:
        """row [..., 6] = (neg, pred, s1, c1, s2, c2) -> [..., 6e]."""
        return torch.cat([
            self.neg_embed(row[..., 0]),
            self.pred_embed(row[..., 1]),
            self.shape_embed(row[..., 2]),
            self.color_embed(row[..., 3]),
            self.shape_embed(row[..., 4]),
            self.color_embed(row[..., 5]),
        ], dim=-1)

    def forward(self, obs: FlatObs) -> torch.Tensor:
        B = obs.view.shape[0]
        view = self.view_proj(obs.view.reshape(B, -1))
        goal = self.goal_mlp(self._embed_atom_row(obs.goal))
        triples = obs.rules[..., :18].reshape(*obs.rules.shape[:-1], 3, 6)
        cond = self._embed_atom_row(triples)                     # [B,16,3,6e]
        cond = cond.reshape(*obs.rules.shape[:-1], -1)           # [B,16,18e]
        spawn_shapes = self.shape_embed(obs.rules[..., 18::2])   # [B,16,4,e]
        spawn_colors = self.color_embed(obs.rules[..., 19::2])
        spawns = torch.cat([spawn_shapes, spawn_colors], dim=-1) \
            .reshape(*obs.rules.shape[:-1], -1)                  # [B,16,8e]
        rows = self.rule_mlp(torch.cat([cond, spawns], dim=-1))  # [B,16,rule_embed]
        rules = rows.mean(dim=-2)
        x = torch.cat([view, goal, rules, obs.scalars.to(view.dtype)], dim=-1)
        return self.out(x)
