"""Muesli loss bundle: unrolled reward/value/policy terms, auxiliary policy
gradient, distillation, and L2.

The binned value and reward heads train with cross-entropy against two-hot
projections of their scalar targets, the binned realisation of the squared
error terms. Losses average over batch, time and unroll positions; positions
whose unroll crosses the segment end are masked out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from ..nn.config import NetConfig
from ..nn.heads import scalar_to_two_hot
from ..nn.network import ModelPredictions


@dataclass
class LossBundle:
    reward: torch.Tensor
    value: torch.Tensor
    policy: torch.Tensor
    policy_grad: torch.Tensor
    distill: torch.Tensor
    l2: torch.Tensor
    total: torch.Tensor

    def scalars(self) -> dict[str, float]:
        return {
            "loss_reward": float(self.reward.detach()),
            "loss_value": float(self.value.detach()),
            "loss_policy": float(self.policy.detach()),
            "loss_pg": float(self.policy_grad.detach()),
            "loss_distill": float(self.distill.detach()),
            "loss_l2": float(self.l2.detach()),
            "loss_total": float(self.total.detach()),
        }


def _masked_mean(x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    denom = mask.sum().clamp(min=1).to(x.dtype)
    return (x * mask.to(x.dtype)).sum() / denom


def _shift(x: torch.Tensor, i: int) -> torch.Tensor:
    """x[t+i] with the tail clamped to the last entry (masked later)."""
    T = x.shape[0]
    idx = (torch.arange(T, device=x.device) + i).clamp(max=T - 1)
    return x[idx]


def _ce_two_hot(logits: torch.Tensor, target_scalar: torch.Tensor,
                cfg: NetConfig) -> torch.Tensor:
    target = scalar_to_two_hot(target_scalar, cfg)
    return -(target * F.log_softmax(logits, dim=-1)).sum(-1)


def kl_categorical(p_probs: torch.Tensor, q_logits: torch.Tensor) -> torch.Tensor:
    """KL(p || softmax(q_logits)) per row, in nats."""
    logq = F.log_softmax(q_logits, dim=-1)
    p = p_probs.clamp(min=0.0)
    logp = torch.log(p.clamp(min=1e-30))
    return (p * (logp - logq)).sum(-1)


def muesli_losses(preds: ModelPredictions, rewards: torch.Tensor,
                  value_targets: torch.Tensor,
                  cmpo_probs: list[torch.Tensor],
                  adv_taken: list[torch.Tensor],
                  actions: torch.Tensor,
                  valid: torch.Tensor,
                  cfg: NetConfig,
                  pg_weight: float = 1.0) -> LossBundle:
    """Assemble the unrolled losses for one segment.

    rewards, value_targets: [T, B]; cmpo_probs: per group [T, B, n];
    adv_taken: per group [T, B] standardized advantages of the taken actions;
    actions: [T, B, G]; valid: [T, B] marks real (unpadded) positions.
    """
    I = len(preds.reward_i) - 1
    T = rewards.shape[0]
    device = rewards.device

    loss_r = rewards.new_zeros(())
    loss_v = rewards.new_zeros(())
    loss_pi = rewards.new_zeros(())
    terms = 0
    for i in range(I + 1):
        in_range = (torch.arange(T, device=device) + i) <= T - 1
        mask = valid & _shift(valid, i) & in_range.view(T, 1)
        loss_r = loss_r + _masked_mean(
            _ce_two_hot(preds.reward_i[i], _shift(rewards, i), cfg), mask)
        vi = preds.value0 if i == 0 else preds.value_i[i - 1]
        loss_v = loss_v + _masked_mean(
            _ce_two_hot(vi, _shift(value_targets, i), cfg), mask)
        pi_ = preds.policy0 if i == 0 else preds.policy_i[i - 1]
        kl = torch.zeros_like(rewards)
        for g, logits in enumerate(pi_):
            kl = kl + kl_categorical(_shift(cmpo_probs[g], i), logits)
        loss_pi = loss_pi + _masked_mean(kl, mask)
        terms += 1
    loss_r = loss_r / terms
    loss_v = loss_v / terms
    loss_pi = loss_pi / terms

    # Auxiliary policy gradient on the immediate policy head.
    pg = torch.zeros_like(rewards)
    for g, logits in enumerate(preds.policy0):
        logp = F.log_softmax(logits, dim=-1)
        taken = logp.gather(-1, actions[..., g:g + 1]).squeeze(-1)
        pg = pg - adv_taken[g].detach() * taken
    loss_pg = _masked_mean(pg, valid) * pg_weight

    zero = rewards.new_zeros(())
    total = loss_r + loss_v + loss_pi + loss_pg
    return LossBundle(reward=loss_r, value=loss_v, policy=loss_pi,
                      policy_grad=loss_pg, distill=zero, l2=zero, total=total)


def distill_loss(preds: ModelPredictions, teacher_logits: list[torch.Tensor],
                 valid: torch.Tensor) -> torch.Tensor:
    """KL(teacher || student) summed over unroll depths and action groups.

    teacher_logits: per group [T, B, n], the teacher's immediate policy on the
    student's observation stream; depth i compares the student's depth-i
    prediction to the teacher at t+i.
    """
    I = len(preds.policy_i)
    T = valid.shape[0]
    device = valid.device
    out = None
    terms = 0
    for i in range(I + 1):
        in_range = (torch.arange(T, device=device) + i) <= T - 1
        mask = valid & _shift(valid, i) & in_range.view(T, 1)
        pi_ = preds.policy0 if i == 0 else preds.policy_i[i - 1]
        kl = None
        for g, logits in enumerate(pi_):
            teacher = torch.softmax(_shift(teacher_logits[g], i), dim=-1)
            term = kl_categorical(teacher, logits)
            kl = term if kl is None else kl + term
        val = _masked_mean(kl, mask)
        out = val if out is None else out + val
        terms += 1
    return out / terms


def l2_penalty(params) -> torch.Tensor:
    total = None
    for p in params:
        term = p.square().sum()
        total = term if total is None else total + term
    return total
