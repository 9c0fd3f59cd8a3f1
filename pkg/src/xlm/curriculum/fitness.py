"""Regret-proxy fitness metrics and per-trial-index rolling normalisation.

Three per-step metrics over an episode rollout's prediction channels:

  td           |r_t + gamma * v0[t+1] - v0[t]|
  value_model  |v0[t+1] - v1[t]|
  action_model JS(pi0[t+1], pi1[t])  summed over action groups

Each trial's raw fitness is the mean per-step value within that trial (sums
would bias towards long trials). The curriculum then standardises the raw
value per trial index with rolling means/variances and keeps only the last
trial's standardised score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

LN2 = math.log(2.0)


def _js(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence in nats; bounded by ln 2."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)

    def kl(a, b):
        mask = a > 0
        return float(np.sum(a[mask] * np.log(a[mask] / b[mask])))

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def fitness_td(rewards: np.ndarray, v0: np.ndarray, gamma: float) -> np.ndarray:
    """Per-step TD-error fitness. v0 has T+1 entries (bootstrap at the end)."""
    rewards = np.asarray(rewards, dtype=np.float64)
    v0 = np.asarray(v0, dtype=np.float64)
    if v0.shape[0] != rewards.shape[0] + 1:
        raise ValueError("v0 must carry one more entry than rewards")
    return np.abs(rewards + gamma * v0[1:] - v0[:-1])


def fitness_value_model(v0: np.ndarray, v1: np.ndarray) -> np.ndarray:
    """|v0[t+1] - v1[t]|: value at the真 next state vs the model's prediction."""
    v0 = np.asarray(v0, dtype=np.float64)
    v1 = np.asarray(v1, dtype=np.float64)
    if v0.shape[0] != v1.shape[0] + 1:
        raise ValueError("v0 must carry one more entry than v1")
    return np.abs(v0[1:] - v1)


def fitness_action_model(pi0_next: Sequence, pi1: Sequence) -> np.ndarray:
    """Per-step JS divergence between next-state policy and model prediction.

    pi0_next[t] and pi1[t] are lists of per-group probability vectors; the
    divergence is averaged over groups so the ln 2 bound survives.
    """
    if len(pi0_next) != len(pi1):
        raise ValueError("prediction streams must align")
    out = np.zeros(len(pi1), dtype=np.float64)
    for t, (groups_a, groups_b) in enumerate(zip(pi0_next, pi1)):
        if len(groups_a) != len(groups_b):
            raise ValueError("action group count mismatch")
        vals = [_js(a, b) for a, b in zip(groups_a, groups_b)]
        out[t] = float(np.mean(vals))
    return out


def trial_fitness(per_step: np.ndarray, trial_indices: np.ndarray) -> dict[int, float]:
    """Mean per-step fitness within each trial index."""
    per_step = np.asarray(per_step, dtype=np.float64)
    trial_indices = np.asarray(trial_indices)
    out: dict[int, float] = {}
    for k in np.unique(trial_indices):
        out[int(k)] = float(per_step[trial_indices == k].mean())
    return out


@dataclass
class FitnessNormalizer:
    """Exponential rolling mean/variance per trial index.

    Standardises with the statistics as they stood before the update, then
    folds the new value in. The variance floor prevents division blow-ups.
    """

    decay: float = 0.999
    var_floor: float = 1e-6
    mean: dict[int, float] = field(default_factory=dict)
    var: dict[int, float] = field(default_factory=dict)
    count: dict[int, int] = field(default_factory=dict)

    def normalize(self, k: int, raw: float, update: bool = True) -> float:
        mu = self.mean.get(k, 0.0)
        var = self.var.get(k, 1.0)
        n = self.count.get(k, 0)
        if n == 0:
            z = 0.0
        else:
            z = (raw - mu) / math.sqrt(max(var, self.var_floor))
        if update:
            if n == 0:
                self.mean[k] = raw
                self.var[k] = 1.0
            else:
                d = self.decay
                delta = raw - mu
                self.mean[k] = mu + (1 - d) * delta
                self.var[k] = d * (var + (1 - d) * delta * delta)
            self.count[k] = n + 1
        return z

    def state_dict(self) -> dict:
        return {"decay": self.decay, "var_floor": self.var_floor,
                "mean": dict(self.mean), "var": dict(self.var),
                "count": dict(self.count)}

    @staticmethod
    def from_state(d: dict) -> "FitnessNormalizer":
        fn = FitnessNormalizer(decay=d["decay"], var_floor=d["var_floor"])
        fn.mean = {int(k): v for k, v in d["mean"].items()}
        fn.var = {int(k): v for k, v in d["var"].items()}
        fn.count = {int(k): v for k, v in d["count"].items()}
        return fn
