"""Retrace value targets and CMPO action targets."""

from __future__ import annotations

from dataclasses import dataclass

import torch


def retrace_targets(rewards: torch.Tensor, q_taken: torch.Tensor,
                    v_next: torch.Tensor, ratios: torch.Tensor,
                    gamma: float, lam: float,
                    done: torch.Tensor | None = None) -> torch.Tensor:
    """Off-policy corrected value targets.

        G_t = Q_t + sum_{u>=t} gamma^{u-t} (prod_{w=t+1..u} c_w) d_u
        d_u = r_u + gamma * v(s_{u+1}) - Q_u
        c_w = lam * min(1, pi(a_w)/mu(a_w))

    computed by the backward recursion
        G_t = Q_t + d_t + gamma * c_{t+1} * (G_{t+1} - Q_{t+1}).

    All tensors are [T] or [T, B]. `v_next[t]` estimates v(s_{t+1}) and must
    already be zero where `done[t]` marks an episode end; the recursion also
    cuts there. With lam=0 the target reduces to r_t + gamma * v(s_{t+1}).
    """
    if ratios.min() < 0:
        raise ValueError("action ratios must be non-negative")
    if done is None:
        done = torch.zeros_like(rewards, dtype=torch.bool)
    cont = (~done).to(rewards.dtype)
    v_next = v_next * cont
    c = lam * torch.minimum(torch.ones_like(ratios), ratios)
    delta = rewards + gamma * v_next - q_taken
    T = rewards.shape[0]
    G = torch.zeros_like(rewards)
    correction = torch.zeros_like(rewards[0])  # G_{t+1} - Q_{t+1}
    for t in range(T - 1, -1, -1):
        G[t] = q_taken[t] + delta[t] + gamma * cont[t] * correction
        correction = c[t] * (G[t] - q_taken[t])
    return G


def cmpo_target(prior_probs: torch.Tensor, advantages: torch.Tensor,
                clip: float = 1.0) -> torch.Tensor:
    """Re-weight a prior with clipped exponentiated advantages, per group.

    prior_probs, advantages: [..., n_actions]. Advantages are expected to be
    standardized by the caller's running statistics.
    """
    z = torch.clamp(advantages, -clip, clip)
    w = prior_probs * torch.exp(z)
    return w / w.sum(dim=-1, keepdim=True)


@dataclass
class AdvantageNormalizer:
    """Running scalar mean/std shared across groups, decay 0.99."""

    decay: float = 0.99
    mean: float = 0.0
    var: float = 1.0
    count: int = 0
    floor: float = 1e-2

    def update(self, adv: torch.Tensor) -> None:
        m = adv.mean().item()
        v = adv.var(unbiased=False).item()
        if self.count == 0:
            self.mean, self.var = m, max(v, self.floor)
        else:
            d = self.decay
            self.mean = d * self.mean + (1 - d) * m
            self.var = d * self.var + (1 - d) * v
        self.count += 1

    def normalize(self, adv: torch.Tensor) -> torch.Tensor:
        return (adv - self.mean) / max(self.var, self.floor) ** 0.5

    def state_dict(self) -> dict:
        return {"decay": self.decay, "mean": self.mean, "var": self.var,
                "count": self.count}

    def load_state(self, d: dict) -> None:
        self.decay = d["decay"]
        self.mean = d["mean"]
        self.var = d["var"]
        self.count = d["count"]
