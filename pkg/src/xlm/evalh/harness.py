"""Evaluation rollouts: score collection, normalizers, prompting, the
k-conditioning report, and self-play vs random-co-player comparisons."""

from __future__ import annotations

import math
import random
from typing import Iterable, Optional

import numpy as np
import torch

from ..learner.rollout import run_episode_batch, scripted_episode
from ..policies import NetPolicy, OraclePolicy, Policy, RandomPolicy
from ..taskgen.oracle import oracle_solve
from .scores import ScoreRecord, ScoreTable

EVAL_KS = (1, 2, 3, 5, 8, 13)
HELD_OUT_KS = (8, 13)


def evaluate_policy(net, tasks: list, ks: Iterable[int], repetitions: int,
                    seed: int, agent_id: str = "agent",
                    table: Optional[ScoreTable] = None,
                    co_policy: Optional[Policy] = None) -> ScoreTable:
    """Populate a score table with `repetitions` independently seeded episodes
    per (task, k); episodes for one (task, k) run as one batch."""
    table = table if table is not None else ScoreTable()
    for task in tasks:
        for k in ks:
            ep = run_episode_batch(net, [task] * repetitions, k,
                                   seed=seed * 101 + k * 7 + task.world_id,
                                   co_policy=co_policy)
            for rep in range(repetitions):
                table.add(ScoreRecord(
                    agent_id=agent_id, task_id=task.id_str, k=k,
                    repetition=rep,
                    trial_rewards=tuple(float(ep.trial_rewards[t, rep])
                                        for t in range(k)),
                ))
    return table


def compute_normalizers(tasks: list, mode: str = "max",
                        net=None, ks: Iterable[int] = (1, 5, 13),
                        repetitions: int = 8, seed: int = 0
                        ) -> tuple[dict[str, float], list[str]]:
    """Per-task normalizer: the best mean last-trial reward any reference
    policy achieves, over trial counts up to 13.

    mode "oracle" uses the planner's optimal per-trial reward; "agent" uses
    the supplied network; "max" (default) takes the larger of the two.
    Unsolvable tasks (no positive normalizer) are excluded and reported.
    """
    normalizers: dict[str, float] = {}
    excluded: list[str] = []
    for task in tasks:
        candidates = []
        if mode in ("oracle", "max"):
            rep = oracle_solve(task)
            if rep.solvable:
                candidates.append(float(rep.optimal_reward))
        if mode in ("agent", "max") and net is not None:
            best = 0.0
            for k in ks:
                if k > 13:
                    continue
                ep = run_episode_batch(net, [task] * repetitions, k,
                                       seed=seed * 31 + k)
                best = max(best, float(ep.trial_rewards[-1].mean()))
            candidates.append(best)
        norm = max(candidates) if candidates else 0.0
        if norm > 0:
            normalizers[task.id_str] = norm
        else:
            excluded.append(task.id_str)
    return normalizers, excluded


def prompt_eval(net, teacher: Policy, task, k: int, repetitions: int,
                seed: int = 0) -> dict:
    """Teacher drives trial 1 while the agent's memory watches; the agent
    plays the remaining trials. Returns prompted and unprompted mean last-trial
    rewards. k=1 episodes would be entirely the teacher's, so they are
    reported as not applicable."""
    if k <= 1:
        return {"applicable": False, "reason": "k=1 leaves the agent no trial"}

    ep = run_episode_batch(net, [task] * repetitions, k, seed=seed,
                           teacher_policy=teacher, teacher_trials=1)
    prompted = float(ep.trial_rewards[-1].mean())
    ep0 = run_episode_batch(net, [task] * repetitions, k, seed=seed)
    unprompted = float(ep0.trial_rewards[-1].mean())
    return {"applicable": True, "prompted": prompted,
            "unprompted": unprompted,
            "teacher_first_trial": float(ep.trial_rewards[0].mean())}


def k_conditioning_report(net, tasks: list, normalizers: dict,
                          ks: tuple[int, int] = (1, 8),
                          repetitions: int = 16, seed: int = 0,
                          percentiles=(20, 50, 80),
                          bootstrap: int = 200) -> dict:
    """First-trial score distribution under different announced trial counts.

    Descriptive: per-percentile paired differences with bootstrap intervals;
    no pass/fail judgement.
    """
    k_lo, k_hi = ks
    first_trial: dict[int, dict[str, float]] = {}
    for k in ks:
        per_task = {}
        for task in tasks:
            ep = run_episode_batch(net, [task] * repetitions, k,
                                   seed=seed * 17 + k)
            norm = normalizers.get(task.id_str)
            if not norm:
                continue
            per_task[task.id_str] = float(ep.trial_rewards[0].mean()) / norm
        first_trial[k] = per_task
    common = sorted(set(first_trial[k_lo]) & set(first_trial[k_hi]))
    diffs = np.array([first_trial[k_hi][t] - first_trial[k_lo][t]
                      for t in common])
    rng = np.random.default_rng(seed)
    out = {"ks": ks, "n_tasks": len(common),
           "median_difference": float(np.median(diffs)) if len(diffs) else 0.0,
           "percentiles": {}}
    for p in percentiles:
        lo_scores = [first_trial[k_lo][t] for t in common]
        hi_scores = [first_trial[k_hi][t] for t in common]
        boot = []
        for _ in range(bootstrap):
            idx = rng.integers(0, len(common), len(common))
            boot.append(np.percentile([hi_scores[i] for i in idx], p)
                        - np.percentile([lo_scores[i] for i in idx], p))
        out["percentiles"][p] = {
            "announced_low": float(np.percentile(lo_scores, p)),
            "announced_high": float(np.percentile(hi_scores, p)),
            "difference": float(np.percentile(hi_scores, p)
                                - np.percentile(lo_scores, p)),
            "ci95": [float(np.percentile(boot, 2.5)),
                     float(np.percentile(boot, 97.5))],
        }
    return out


def selfplay_vs_random(net, tasks2p: list, ks: Iterable[int],
                       repetitions: int, seed: int = 0) -> dict:
    """Cooperative self-play vs best-of-both-seatings with a random-action
    co-player. Tasks should be solvable single-handed with player-free goals;
    the caller filters."""
    out = {"self_play": {}, "random_co": {}}
    for k in ks:
        sp_scores = []
        rc_scores = []
        for task in tasks2p:
            ep = run_episode_batch(net, [task] * repetitions, k,
                                   seed=seed + k,
                                   co_policy=NetPolicy(net, seed=seed + 1))
            sp_scores.append(float(ep.trial_rewards[-1].mean()))
            # Seat 0 with a random co-player.
            ep_a = run_episode_batch(net, [task] * repetitions, k,
                                     seed=seed + 2 + k,
                                     co_policy=RandomPolicy(seed))
            seat_a = float(ep_a.trial_rewards[-1].mean())
            # Seat 1: scripted random drives seat 0, the net rides seat 1.
            totals = []
            for rep in range(repetitions):
                t = scripted_episode(task, k, seed * 97 + rep + k,
                                     RandomPolicy(seed + rep),
                                     co_policy=NetPolicy(net, seed=seed + rep))
                totals.append(t[-1])
            seat_b = float(np.mean(totals))
            rc_scores.append(max(seat_a, seat_b))
        out["self_play"][k] = float(np.median(sp_scores))
        out["random_co"][k] = float(np.median(rc_scores))
    return out
