"""Vectorized episode generation.

A batch of simulators with a common (trial_length, k) runs in lockstep so the
memory state stays a single batched tensor; trial resets are synchronous and
leave memory untouched, episode ends reset it. Behaviour logits are recorded
for Retrace and the CMPO prior; optional prediction channels feed the
curriculum fitness metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import torch

from ..env.observe import build_observation, static_encoding
from ..env.types import Action, action_from_groups
from ..nn.encoder import FlatObs
from ..nn.heads import bins_to_scalar
from ..policies import Policy
from ..taskgen.task import Task


@dataclass
class EpisodeBatch:
    tasks: list
    k: int
    trial_length: int
    obs: FlatObs                       # leading dim T*B (reshaped by T, B)
    actions: torch.Tensor              # [T, B, G] long
    rewards: torch.Tensor              # [T, B]
    behavior_logits: list[torch.Tensor]  # per group [T, B, n]
    T: int
    B: int
    trial_rewards: torch.Tensor        # [k, B] per-trial reward sums
    # optional prediction channels (target-net view), for fitness metrics
    v0: Optional[torch.Tensor] = None        # [T+1, B] decoded values
    v1: Optional[torch.Tensor] = None        # [T, B]
    pi0: Optional[list] = None               # per group [T+1, B, n] probs
    pi1: Optional[list] = None               # per group [T, B, n] probs
    trial_of_step: Optional[torch.Tensor] = None  # [T]

    @property
    def frames(self) -> int:
        return self.T * self.B

    def last_trial_rewards(self) -> torch.Tensor:
        return self.trial_rewards[-1]


def _sample_groups(logits: list[torch.Tensor], gen: torch.Generator) -> torch.Tensor:
    cols = []
    for l in logits:
        probs = torch.softmax(l, dim=-1)
        cols.append(torch.multinomial(probs, 1, generator=gen).squeeze(-1))
    return torch.stack(cols, dim=-1)  # [B, G]


def run_episode_batch(net, tasks: list, k: int, seed: int,
                      record_fitness: bool = False,
                      teacher_policy: Optional[Policy] = None,
                      teacher_trials: int = 0,
                      co_policy: Optional[Policy] = None,
                      sample: bool = True) -> EpisodeBatch:
    """Run one episode on every task in lockstep.

    All tasks must share trial_length (and player count). When a
    `teacher_policy` is given it controls seat 0 for the first
    `teacher_trials` trials of each episode while the network continues to
    observe every step (prompting); the teacher's actions are recorded as the
    behaviour actions.

    `co_policy` (when the tasks are two-player) controls seat 1.
    """
    B = len(tasks)
    trial_length = tasks[0].trial_length
    assert all(t.trial_length == trial_length for t in tasks)
    T = k * trial_length
    sims = [t.simulator(k=k, seed=seed * 7919 + i) for i, t in enumerate(tasks)]
    statics = [static_encoding(s, 0) for s in sims]
    gen = torch.Generator().manual_seed(seed)

    state = net.initial_state(B)
    last_actions: list[Optional[Action]] = [None] * B
    last_rewards = [0.0] * B

    teachers: list[Optional[Policy]] = [None] * B
    if teacher_policy is not None:
        import copy as _copy
        teachers = [_copy.deepcopy(teacher_policy) for _ in range(B)]
        for i, t in enumerate(tasks):
            teachers[i].begin_episode(t, k, 0, seed * 53 + i)

    if co_policy is not None:
        for i, t in enumerate(tasks):
            co_policy.begin_episode(t, k, 1, seed * 31 + i)

    obs_steps: list[list] = []
    actions_steps: list[torch.Tensor] = []
    rewards_steps: list[list[float]] = []
    logits_steps: list[list[torch.Tensor]] = []
    v0_steps: list[torch.Tensor] = []
    v1_steps: list[torch.Tensor] = []
    pi0_steps: list[list[torch.Tensor]] = []
    pi1_steps: list[list[torch.Tensor]] = []
    trial_of_step: list[int] = []
    trial_rewards = torch.zeros(k, B)

    for trial in range(k):
        for step in range(trial_length):
            obs = [build_observation(sims[i], 0, last_actions[i], last_rewards[i],
                                     static=statics[i]) for i in range(B)]
            fo = FlatObs.from_observations(obs)
            if record_fitness:
                logits, value_bins, h, state = net.act_with_model(fo, state)
                v0 = bins_to_scalar(value_bins, net.cfg)
            else:
                logits, v0, state = net.act(fo, state)
                h = None
            obs_steps.append(obs)
            trial_of_step.append(trial)

            if sample:
                acts_t = _sample_groups(logits, gen)
            else:
                acts_t = torch.stack([l.argmax(-1) for l in logits], dim=-1)
            if teacher_policy is not None and trial < teacher_trials:
                if step == 0:
                    for i in range(B):
                        teachers[i].begin_trial(sims[i], trial)
                imposed = [teachers[i].act(sims[i], 0) for i in range(B)]
                acts_t = torch.tensor(
                    [[a.move, int(a.grab), int(a.drop)] for a in imposed],
                    dtype=torch.long)

            if record_fitness:
                heads1 = net.model_step(h, acts_t)
                v1_steps.append(bins_to_scalar(heads1["value"], net.cfg))
                pi1_steps.append([torch.softmax(l, -1) for l in heads1["policy"]])
                v0_steps.append(v0)
                pi0_steps.append([torch.softmax(l, -1) for l in logits])

            actions_steps.append(acts_t)
            logits_steps.append([l.detach() for l in logits])

            step_rewards = []
            for i in range(B):
                a = action_from_groups(int(acts_t[i, 0]), int(acts_t[i, 1]),
                                       int(acts_t[i, 2]))
                if sims[i].num_players == 2:
                    co_a = co_policy.act(sims[i], 1) if co_policy else Action.NOOP
                    res = sims[i].step((a, co_a))
                else:
                    res = sims[i].step((a,))
                last_actions[i] = a
                last_rewards[i] = res.rewards[0]
                step_rewards.append(res.rewards[0])
                trial_rewards[trial, i] += res.rewards[0]
            rewards_steps.append(step_rewards)

        if trial < k - 1:
            for s in sims:
                s.reset_trial()
            # The environment resets; memory and the previous-step context
            # (last action/reward observations) persist across the boundary.

    if record_fitness:
        # Terminal bootstrap entry: one extra forward on the final observation.
        obs = [build_observation(sims[i], 0, last_actions[i], last_rewards[i],
                                 static=statics[i]) for i in range(B)]
        fo = FlatObs.from_observations(obs)
        logits, value_bins, h, _ = net.act_with_model(fo, state)
        v0_steps.append(bins_to_scalar(value_bins, net.cfg))
        pi0_steps.append([torch.softmax(l, -1) for l in logits])

    flat_obs = [o for step in obs_steps for o in step]
    fo_all = FlatObs.from_observations(flat_obs)
    out = EpisodeBatch(
        tasks=tasks, k=k, trial_length=trial_length, obs=fo_all,
        actions=torch.stack(actions_steps, dim=0),
        rewards=torch.tensor(rewards_steps, dtype=torch.float32),
        behavior_logits=[torch.stack([ls[g] for ls in logits_steps], dim=0)
                         for g in range(len(logits_steps[0]))],
        T=T, B=B, trial_rewards=trial_rewards,
        trial_of_step=torch.tensor(trial_of_step),
    )
    if record_fitness:
        out.v0 = torch.stack(v0_steps, dim=0)
        out.v1 = torch.stack(v1_steps, dim=0)
        out.pi0 = [torch.stack([p[g] for p in pi0_steps], dim=0)
                   for g in range(len(pi0_steps[0]))]
        out.pi1 = [torch.stack([p[g] for p in pi1_steps], dim=0)
                   for g in range(len(pi1_steps[0]))]
    return out


def scripted_episode(task: Task, k: int, seed: int, policy: Policy,
                     co_policy: Optional[Policy] = None) -> list[float]:
    """Run one scripted episode; returns per-trial reward totals."""
    sim = task.simulator(k=k, seed=seed)
    policy.begin_episode(task, k, 0, seed)
    if co_policy is not None:
        co_policy.begin_episode(task, k, 1, seed + 1)
    totals = []
    for trial in range(k):
        policy.begin_trial(sim, trial)
        if co_policy is not None:
            co_policy.begin_trial(sim, trial)
        total = 0.0
        for _ in range(task.trial_length):
            a0 = policy.act(sim, 0)
            if sim.num_players == 2:
                a1 = co_policy.act(sim, 1) if co_policy else Action.NOOP
                res = sim.step((a0, a1))
            else:
                res = sim.step((a0,))
            total += res.rewards[0]
            if hasattr(policy, "observe_reward"):
                policy.observe_reward(res.rewards[0])
        totals.append(total)
        if trial < k - 1:
            sim.reset_trial()
    return totals
