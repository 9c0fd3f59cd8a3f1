"""Fictitious self-play co-player pool: a grow-only list of policy snapshots
seeded with a random-action policy; sampling is uniform."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional


@dataclass
class CoPlayerPool:
    snapshot_every_frames: int
    entries: list = field(default_factory=list)  # (label, policy handle)
    _last_snapshot_frame: int = 0

    def __post_init__(self):
        if not self.entries:
            self.entries.append(("random-action", None))

    def __len__(self) -> int:
        return len(self.entries)

    def sample(self, rng: random.Random):
        return rng.choice(self.entries)

    def maybe_snapshot(self, frame_count: int,
                       snapshot_fn: Callable[[], Any]) -> bool:
        """Add a snapshot whenever another cadence interval has elapsed."""
        if frame_count - self._last_snapshot_frame < self.snapshot_every_frames:
            return False
        self._last_snapshot_frame = frame_count
        self.entries.append((f"snapshot@{frame_count}", snapshot_fn()))
        return True
