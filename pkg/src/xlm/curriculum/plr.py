"""Prioritised replay over a fixed-capacity task archive.

Robust variant: fresh tasks are only evaluated (their fitness offered to the
archive); training happens on replayed tasks. Replay sampling mixes a
rank-based fitness weight with a staleness weight:

    P(i) = (1 - s) * P_rank(i) + s * P_staleness(i)

with P_rank(i) proportional to rank(i)^-1 (rank 1 = highest fitness) and
P_staleness(i) proportional to the steps since entry i was last sampled.
Replay is disabled entirely while the archive holds fewer than N_min entries.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Callable, Optional


@dataclass(frozen=True)
class PlrConfig:
    replay_prob: float = 0.2       # p
    capacity: int = 1000           # N_max
    activation_floor: int = 900    # N_min
    episodes_per_task: int = 30    # N_train
    staleness_coef: float = 0.2    # s

    def __post_init__(self):
        if not 0.0 <= self.staleness_coef <= 1.0:
            raise ValueError("staleness coefficient must lie in [0, 1]")
        if self.activation_floor > self.capacity:
            raise ValueError("activation floor above capacity")


@dataclass
class ArchiveEntry:
    task_id: tuple
    fitness: float
    last_sampled: int


@dataclass
class PlrArchive:
    config: PlrConfig
    entries: dict = field(default_factory=dict)  # task_id -> ArchiveEntry
    step: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def min_fitness(self) -> float:
        return min(e.fitness for e in self.entries.values())

    def sample_weights(self) -> tuple[list, list[float]]:
        cfg = self.config
        items = list(self.entries.values())
        by_rank = sorted(items, key=lambda e: -e.fitness)
        rank_w = {id(e): 1.0 / (r + 1) for r, e in enumerate(by_rank)}
        total_rank = sum(rank_w.values())
        stale = {id(e): float(self.step - e.last_sampled) for e in items}
        total_stale = sum(stale.values())
        weights = []
        for e in items:
            w_rank = rank_w[id(e)] / total_rank
            w_stale = stale[id(e)] / total_stale if total_stale > 0 else 1.0 / len(items)
            weights.append((1 - cfg.staleness_coef) * w_rank
                           + cfg.staleness_coef * w_stale)
        return items, weights

    def state_dict(self) -> dict:
        return {
            "step": self.step,
            "entries": [
                {"task_id": list(e.task_id), "fitness": e.fitness,
                 "last_sampled": e.last_sampled}
                for e in self.entries.values()
            ],
        }

    @staticmethod
    def from_state(config: PlrConfig, d: dict) -> "PlrArchive":
        a = PlrArchive(config)
        a.step = d["step"]
        for ed in d["entries"]:
            tid = tuple(ed["task_id"])
            a.entries[tid] = ArchiveEntry(tid, ed["fitness"], ed["last_sampled"])
        return a


def try_insert(archive: PlrArchive, task_id: tuple, fitness: float) -> bool:
    """Insert below capacity; at capacity only when beating the minimum, which
    is then evicted. A known task updates in place."""
    entries = archive.entries
    if task_id in entries:
        entries[task_id].fitness = fitness
        return True
    if len(entries) < archive.config.capacity:
        entries[task_id] = ArchiveEntry(task_id, fitness, archive.step)
        return True
    worst_id = min(entries, key=lambda t: entries[t].fitness)
    if fitness > entries[worst_id].fitness:
        del entries[worst_id]
        entries[task_id] = ArchiveEntry(task_id, fitness, archive.step)
        return True
    return False


def plr_next_task(archive: PlrArchive, rng: random.Random,
                  candidate_source: Callable[[], tuple]) -> tuple[tuple, str]:
    """(task_id, provenance). Provenance "replay" marks the task for training;
    "fresh" marks it for evaluation followed by try_insert."""
    cfg = archive.config
    archive.step += 1
    p = cfg.replay_prob if len(archive) >= cfg.activation_floor else 0.0
    if rng.random() < p:
        if not archive.entries:
            raise RuntimeError("replay requested from an empty archive")
        items, weights = archive.sample_weights()
        chosen = rng.choices(items, weights=weights, k=1)[0]
        chosen.last_sampled = archive.step
        return chosen.task_id, "replay"
    return candidate_source(), "fresh"
