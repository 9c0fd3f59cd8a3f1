"""The training loop: Muesli updates over batched episodes with a trailing
target network, optional distillation kickstart, and pluggable curricula
(uniform, no-op filtering, prioritised replay)."""

from __future__ import annotations

import copy
import json
import math
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import torch

from ..curriculum import (
    FitnessNormalizer,
    NoopThresholds,
    PlrArchive,
    PlrConfig,
    fitness_td,
    noop_filter,
    plr_next_task,
    trial_fitness,
    try_insert,
)
from ..env.types import ALL_ACTIONS, action_to_groups
from ..nn.heads import bins_to_scalar
from ..nn.network import AgentNetwork
from ..policies import NoopPolicy
from .config import TrainConfig
from .losses import LossBundle, distill_loss, kl_categorical, l2_penalty, muesli_losses
from .rollout import EpisodeBatch, run_episode_batch, scripted_episode
from .targets import AdvantageNormalizer, cmpo_target, retrace_targets

JOINT_ACTIONS = [action_to_groups(a) for a in ALL_ACTIONS]


class Learner:
    """Owns the online network, its trailing target copy, the optimizer and
    the advantage statistics."""

    def __init__(self, net: AgentNetwork, cfg: TrainConfig,
                 teacher: Optional[AgentNetwork] = None):
        self.net = net
        self.cfg = cfg
        self.target = copy.deepcopy(net)
        for p in self.target.parameters():
            p.requires_grad_(False)
        self.teacher = teacher
        if teacher is not None:
            for p in teacher.parameters():
                p.requires_grad_(False)
        self.opt = torch.optim.Adam(net.parameters(), lr=cfg.lr,
                                    betas=cfg.adam_betas, eps=cfg.adam_eps)
        self.adv_norm = AdvantageNormalizer()
        self.pg_norm = AdvantageNormalizer()
        self.updates = 0
        self.frames = 0

    # -- schedules -------------------------------------------------------------

    def _lr(self) -> float:
        cfg = self.cfg
        warm = min(1.0, (self.updates + 1) / max(1, cfg.warmup_updates))
        progress = min(1.0, self.frames / max(1, cfg.total_frames))
        cosine = 0.55 + 0.45 * math.cos(math.pi * progress)
        return cfg.lr * warm * cosine

    def _trail_target(self) -> None:
        tau = self.cfg.target_trail
        with torch.no_grad():
            for tp, p in zip(self.target.parameters(), self.net.parameters()):
                tp.add_(tau * (p - tp))
            for tb, b in zip(self.target.buffers(), self.net.buffers()):
                tb.copy_(b)

    # -- target quantities -------------------------------------------------------

    @torch.no_grad()
    def _target_quantities(self, ep: EpisodeBatch):
        cfg = self.cfg
        T, B = ep.T, ep.B
        tgt = self.target
        preds, _ = tgt.forward_segment(ep.obs, ep.actions, tgt.initial_state(B))
        out = preds.memory_out                       # [T, B, D]
        v0 = bins_to_scalar(preds.value0, tgt.cfg)   # [T, B]
        pi_tgt = [torch.softmax(l, -1) for l in preds.policy0]

        # Q(s, a) for every joint action from the one-step model.
        q_joint = torch.zeros(len(JOINT_ACTIONS), T, B)
        st0 = tgt.model.init_state(out)
        for ai, groups in enumerate(JOINT_ACTIONS):
            a = torch.tensor(groups, dtype=torch.long).view(1, 1, -1).expand(T, B, -1)
            st = tgt.model.step(st0, a)
            heads = tgt.model.heads(st)
            r_hat = bins_to_scalar(heads["reward"], tgt.cfg)
            v_hat = bins_to_scalar(heads["value"], tgt.cfg)
            q_joint[ai] = r_hat + cfg.gamma * v_hat

        # Joint probabilities under the target policy.
        joint_p = torch.ones(len(JOINT_ACTIONS), T, B)
        for ai, groups in enumerate(JOINT_ACTIONS):
            for g, x in enumerate(groups):
                joint_p[ai] = joint_p[ai] * pi_tgt[g][..., x]

        # Per-group marginal advantages: expectation over the other groups.
        n_groups = len(pi_tgt)
        adv_groups = []
        for g in range(n_groups):
            n_g = pi_tgt[g].shape[-1]
            q_g = torch.zeros(n_g, T, B)
            w_g = torch.zeros(n_g, T, B)
            for ai, groups in enumerate(JOINT_ACTIONS):
                x = groups[g]
                w = joint_p[ai] / pi_tgt[g][..., x].clamp(min=1e-30)
                q_g[x] += w * q_joint[ai]
                w_g[x] += w
            q_g = q_g / w_g.clamp(min=1e-30)
            adv_groups.append(q_g.permute(1, 2, 0) - v0.unsqueeze(-1))  # [T,B,n]

        taken_idx = torch.zeros(T, B, dtype=torch.long)
        for ai, groups in enumerate(JOINT_ACTIONS):
            match = torch.ones(T, B, dtype=torch.bool)
            for g, x in enumerate(groups):
                match &= ep.actions[..., g] == x
            taken_idx[match] = ai
        q_taken = q_joint.gather(0, taken_idx.unsqueeze(0)).squeeze(0)

        return preds, v0, pi_tgt, adv_groups, q_taken

    # -- one update ---------------------------------------------------------------

    def train_on_episode(self, ep: EpisodeBatch) -> dict:
        cfg = self.cfg
        T, B = ep.T, ep.B
        tgt_preds, v0_tgt, pi_tgt, adv_groups, q_taken = self._target_quantities(ep)

        # Retrace value targets; the value bootstrap v(s_{t+1}) comes from the
        # trailing value head, zero past the episode end.
        v_next = torch.cat([v0_tgt[1:], torch.zeros(1, B)], dim=0)
        done = torch.zeros(T, B, dtype=torch.bool)
        done[-1] = True
        log_ratio = torch.zeros(T, B)
        for g, logits in enumerate(ep.behavior_logits):
            mu = torch.log_softmax(logits, dim=-1)
            pi = torch.log(pi_tgt[g].clamp(min=1e-30))
            a = ep.actions[..., g:g + 1]
            log_ratio = log_ratio + (pi.gather(-1, a) - mu.gather(-1, a)).squeeze(-1)
        ratios = torch.exp(log_ratio)
        G = retrace_targets(ep.rewards, q_taken, v_next, ratios,
                            cfg.gamma, cfg.retrace_lambda, done)

        # CMPO targets per group from the model-based advantages.
        cmpo_probs = []
        for g, adv in enumerate(adv_groups):
            self.adv_norm.update(adv)
            adv_std = self.adv_norm.normalize(adv)
            mu_probs = torch.softmax(ep.behavior_logits[g], dim=-1)
            n = adv.shape[-1]
            prior = (cfg.prior_mix[0] * pi_tgt[g]
                     + cfg.prior_mix[1] * mu_probs
                     + cfg.prior_mix[2] / n)
            cmpo_probs.append(cmpo_target(prior, adv_std, cfg.cmpo_clip))

        # The auxiliary policy gradient is grounded in the observed returns:
        # clip(normalized(G - v)) weights the joint log-likelihood, which is
        # informative from the first update while the model warms up.
        adv_ret = G - v0_tgt
        self.pg_norm.update(adv_ret)
        adv_pg = self.pg_norm.normalize(adv_ret).clamp(-cfg.cmpo_clip,
                                                       cfg.cmpo_clip)
        adv_taken = [adv_pg for _ in adv_groups]

        valid = torch.ones(T, B, dtype=torch.bool)
        preds, _ = self.net.forward_segment(ep.obs, ep.actions,
                                            self.net.initial_state(B))
        bundle = muesli_losses(preds, ep.rewards, G, cmpo_probs, adv_taken,
                               ep.actions, valid, self.net.cfg, cfg.pg_weight)

        total = bundle.total
        kick = self.teacher is not None and self.frames < cfg.distill_frames
        if kick:
            with torch.no_grad():
                tpreds, _ = self.teacher.forward_segment(
                    ep.obs, ep.actions, self.teacher.initial_state(B))
            dloss = distill_loss(preds, tpreds.policy0, valid)
            l2 = l2_penalty(self.net.parameters())
            total = total + cfg.distill_weight * dloss + cfg.distill_l2 * l2
            bundle = LossBundle(reward=bundle.reward, value=bundle.value,
                                policy=bundle.policy,
                                policy_grad=bundle.policy_grad,
                                distill=dloss, l2=l2, total=total)

        for group in self.opt.param_groups:
            group["lr"] = self._lr()
        self.opt.zero_grad()
        total.backward()
        torch.nn.utils.clip_grad_norm_(self.net.parameters(), cfg.grad_clip)
        self.opt.step()
        self._trail_target()
        self.updates += 1
        self.frames += ep.frames

        metrics = bundle.scalars()
        metrics.update({
            "frames": self.frames,
            "updates": self.updates,
            "mean_reward": float(ep.rewards.mean()),
            "mean_last_trial_reward": float(ep.last_trial_rewards().mean()),
        })
        return metrics


def episode_fitness(ep: EpisodeBatch, gamma: float,
                    metric: str = "td") -> torch.Tensor:
    """Mean per-step fitness within the LAST trial, one value per env."""
    from ..curriculum.fitness import (fitness_action_model, fitness_td,
                                      fitness_value_model)
    import numpy as np
    T, B = ep.T, ep.B
    out = torch.zeros(B)
    last = int(ep.trial_of_step.max())
    mask = (ep.trial_of_step == last).numpy()
    for b in range(B):
        if metric == "td":
            per_step = fitness_td(ep.rewards[:, b].numpy(),
                                  ep.v0[:, b].numpy(), gamma)
        elif metric == "value_model":
            per_step = fitness_value_model(ep.v0[:, b].numpy(),
                                           ep.v1[:, b].numpy())
        elif metric == "action_model":
            pi0_next = [[ep.pi0[g][t + 1, b].numpy() for g in range(len(ep.pi0))]
                        for t in range(T)]
            pi1 = [[ep.pi1[g][t, b].numpy() for g in range(len(ep.pi1))]
                   for t in range(T)]
            per_step = fitness_action_model(pi0_next, pi1)
        else:
            raise ValueError(metric)
        out[b] = float(per_step[mask].mean())
    return out


@dataclass
class TrainResult:
    metrics: list[dict] = field(default_factory=list)
    eval_points: list[dict] = field(default_factory=list)
    trained_task_log: list[dict] = field(default_factory=list)


def run_training(net: AgentNetwork, tasks: list, cfg: TrainConfig,
                 curriculum: str = "uniform",
                 teacher: Optional[AgentNetwork] = None,
                 plr_config: Optional[PlrConfig] = None,
                 fitness_metric: str = "td",
                 eval_fn: Optional[Callable[[Learner, int], dict]] = None,
                 metrics_path: Optional[str] = None,
                 task_meta: Optional[Callable[[object], dict]] = None,
                 stop_fn: Optional[Callable[[dict], bool]] = None) -> TrainResult:
    """Train `net` on `tasks` under one of the three curricula.

    Deterministic for a fixed config/seed in single-threaded mode. `eval_fn`
    runs at the configured cadence; `task_meta` labels trained tasks for the
    emergent-difficulty metrics; `stop_fn` may end training early based on the
    latest eval record (used by budget-matched comparisons).
    """
    torch.manual_seed(cfg.seed)
    rng = random.Random(cfg.seed)
    learner = Learner(net, cfg, teacher=teacher)
    result = TrainResult()
    out_file = open(metrics_path, "a") if metrics_path else None

    by_len: dict[int, list] = {}
    for t in tasks:
        by_len.setdefault(t.trial_length, []).append(t)

    noop_policy = NoopPolicy()
    plr_cfg = plr_config or PlrConfig()
    archive = PlrArchive(plr_cfg)
    normalizer = FitnessNormalizer()
    eval_counter = 0

    def emit(record: dict) -> None:
        result.metrics.append(record)
        if out_file:
            out_file.write(json.dumps(record) + "\n")
            out_file.flush()

    def sample_k() -> int:
        return rng.choices(cfg.k_values, weights=cfg.k_weights, k=1)[0]

    def sample_task_batch(task) -> list:
        return [task] * cfg.batch_envs

    def uniform_task():
        length = rng.choice(sorted(by_len))
        return rng.choice(by_len[length])

    def train_episode(task, k) -> dict:
        ep = run_episode_batch(learner.target, sample_task_batch(task), k,
                               seed=rng.randrange(2 ** 31))
        m = learner.train_on_episode(ep)
        if task_meta:
            result.trained_task_log.append(
                {"frames": learner.frames, **task_meta(task)})
        return m

    def maybe_eval() -> Optional[dict]:
        nonlocal eval_counter
        if eval_fn is None:
            return None
        due = learner.frames // max(1, cfg.eval_every_frames)
        if due <= eval_counter:
            return None
        eval_counter = due
        record = eval_fn(learner, learner.frames)
        record["frames"] = learner.frames
        result.eval_points.append(record)
        emit({"kind": "eval", **record})
        return record

    while learner.frames < cfg.total_frames:
        k = sample_k()
        if curriculum == "uniform":
            task = uniform_task()
            m = train_episode(task, k)
            emit({"kind": "train", **m})
        elif curriculum == "noop":
            task = uniform_task()
            agent_scores = []
            ep = run_episode_batch(learner.target, [task] * 10, 1,
                                   seed=rng.randrange(2 ** 31))
            agent_scores = [float(x) for x in ep.trial_rewards[0]]
            learner.frames += ep.frames  # evaluation actors consume frames
            noop_scores = [sum(scripted_episode(task, 1,
                                                rng.randrange(2 ** 31),
                                                noop_policy))
                           for _ in range(10)]
            accept = noop_filter(agent_scores, noop_scores, task.trial_length)
            emit({"kind": "noop_filter", "accept": accept,
                  "frames": learner.frames})
            if accept:
                episodes = 0
                while episodes * cfg.batch_envs < 30:
                    m = train_episode(task, sample_k())
                    emit({"kind": "train", **m})
                    episodes += 1
        elif curriculum == "plr":
            task_by_id = {t.task_id: t for t in tasks}
            tid, provenance = plr_next_task(
                archive, rng, lambda: uniform_task().task_id)
            task = task_by_id[tid]
            if provenance == "fresh":
                ep = run_episode_batch(learner.target, sample_task_batch(task),
                                       k, seed=rng.randrange(2 ** 31),
                                       record_fitness=True)
                learner.frames += ep.frames
                raw = episode_fitness(ep, cfg.gamma, fitness_metric)
                f_k = normalizer.normalize(k, float(raw.mean()))
                try_insert(archive, task.task_id, f_k)
                emit({"kind": "plr_eval", "fitness": f_k,
                      "archive": len(archive), "frames": learner.frames})
            else:
                episodes = 0
                while episodes * cfg.batch_envs < plr_cfg.episodes_per_task:
                    kk = sample_k()
                    ep = run_episode_batch(learner.target,
                                           sample_task_batch(task), kk,
                                           seed=rng.randrange(2 ** 31),
                                           record_fitness=True)
                    m = learner.train_on_episode(ep)
                    emit({"kind": "train", **m})
                    episodes += 1
                    if task_meta:
                        result.trained_task_log.append(
                            {"frames": learner.frames, **task_meta(task)})
                raw = episode_fitness(ep, cfg.gamma, fitness_metric)
                f_k = normalizer.normalize(kk, float(raw.mean()))
                try_insert(archive, task.task_id, f_k)
        else:
            raise ValueError(f"unknown curriculum {curriculum}")

        record = maybe_eval()
        if record is not None and stop_fn is not None and stop_fn(record):
            break

    if out_file:
        out_file.close()
    return result
