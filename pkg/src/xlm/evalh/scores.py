"""Score tables: the substrate of every evaluation.

A record stores the full per-trial reward list of one episode; the score of a
record is its last-trial reward divided by the task's normalizer. Human and
agent episodes use the identical schema and aggregation path.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np


@dataclass(frozen=True)
class ScoreRecord:
    agent_id: str
    task_id: str
    k: int
    repetition: int
    trial_rewards: tuple[float, ...]

    @property
    def last_trial_reward(self) -> float:
        return self.trial_rewards[-1]


@dataclass
class GapReport:
    missing: list[tuple[str, int]]  # (task_id, k) cells with no records

    def __bool__(self) -> bool:
        return bool(self.missing)


@dataclass
class ScoreTable:
    records: list[ScoreRecord] = field(default_factory=list)
    normalizers: dict[str, float] = field(default_factory=dict)

    def add(self, rec: ScoreRecord) -> None:
        self.records.append(rec)

    def score(self, rec: ScoreRecord) -> float:
        norm = self.normalizers.get(rec.task_id)
        if norm is None or norm <= 0:
            raise KeyError(f"no positive normalizer for task {rec.task_id}")
        return rec.last_trial_reward / norm

    def task_ids(self) -> list[str]:
        return sorted({r.task_id for r in self.records})

    def mean_task_scores(self, k: int) -> dict[str, float]:
        """Per-task mean score over repetitions at trial count k."""
        by_task: dict[str, list[float]] = {}
        for r in self.records:
            if r.k == k:
                by_task.setdefault(r.task_id, []).append(self.score(r))
        return {t: float(np.mean(v)) for t, v in by_task.items()}

    # -- persistence -----------------------------------------------------------

    def append_to(self, path) -> None:
        with open(path, "a") as f:
            for r in self.records:
                f.write(json.dumps(asdict(r)) + "\n")

    @staticmethod
    def load(path, normalizers: Optional[dict] = None) -> "ScoreTable":
        table = ScoreTable(normalizers=dict(normalizers or {}))
        with open(path) as f:
            for line in f:
                d = json.loads(line)
                d["trial_rewards"] = tuple(d["trial_rewards"])
                table.add(ScoreRecord(**d))
        return table

    def export_csv(self, path) -> None:
        """Columnar export: one row per (record, trial)."""
        with open(path, "w") as f:
            f.write("agent_id,task_id,k,repetition,trial_index,reward,"
                    "normalizer,score\n")
            for r in self.records:
                norm = self.normalizers.get(r.task_id, float("nan"))
                score = r.last_trial_reward / norm if norm and norm > 0 else float("nan")
                for ti, reward in enumerate(r.trial_rewards):
                    f.write(f"{r.agent_id},{r.task_id},{r.k},{r.repetition},"
                            f"{ti},{reward},{norm},{score}\n")


def percentile_curves(table: ScoreTable, ks: Iterable[int],
                      percentiles: Iterable[float] = (20, 50),
                      min_repetitions: int = 1
                      ) -> tuple[dict, GapReport]:
    """Per-task mean over repetitions, then cross-task percentiles, per k.

    Returns ({percentile: {k: value}}, gap report). Missing (task, k) cells
    are reported, never imputed.
    """
    ks = list(ks)
    tasks = table.task_ids()
    missing = []
    counts: dict[tuple[str, int], int] = {}
    for r in table.records:
        counts[(r.task_id, r.k)] = counts.get((r.task_id, r.k), 0) + 1
    for t in tasks:
        for k in ks:
            if counts.get((t, k), 0) < min_repetitions:
                missing.append((t, k))
    gaps = GapReport(missing=missing)

    curves: dict[float, dict[int, float]] = {p: {} for p in percentiles}
    for k in ks:
        means = table.mean_task_scores(k)
        vals = [means[t] for t in tasks if t in means]
        if not vals:
            continue
        for p in percentiles:
            curves[p][k] = float(np.percentile(vals, p))
    return curves, gaps
