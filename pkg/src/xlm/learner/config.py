"""Training configuration."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class TrainConfig:
    gamma: float = 0.97
    retrace_lambda: float = 0.95
    batch_envs: int = 12           # parallel simulators per episode batch
    k_values: tuple[int, ...] = (1, 2, 3)
    k_weights: tuple[float, ...] = (1.0, 1.0, 1.0)
    total_frames: int = 120_000
    lr: float = 3e-4
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    warmup_updates: int = 50
    grad_clip: float = 10.0
    target_trail: float = 0.005    # per-update exponential trail rate
    cmpo_clip: float = 1.0
    prior_mix: tuple[float, float, float] = (0.7, 0.2, 0.1)  # current/behavior/uniform
    pg_weight: float = 1.0
    # Distillation
    distill_frames: int = 0        # kickstart window, in frames
    distill_weight: float = 1.0
    distill_l2: float = 1e-5
    # Evaluation cadence
    eval_every_frames: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.distill_frames > self.total_frames:
            raise ValueError("distillation budget exceeds the total budget")
        if len(self.k_values) != len(self.k_weights):
            raise ValueError("k distribution malformed")
