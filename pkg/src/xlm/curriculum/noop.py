"""No-op filtering: admit a task for training only when the agent beats a
do-nothing policy but has not yet mastered the task.

Four criteria over 10 single-trial episode scores of the agent (R) and of the
no-op policy (R'):

  1. max R' <= e1              (no-op is not too good)
  2. |{R_i >= e2}| <= e3       (agent is not too good)
  3. |{R_i >= max R' + e0}| >= e4  or  |{R_i <= min R' - e0}| >= e5
                               (agent differs enough from no-op)
  4. max R - min R >= e6       (agent scores vary enough)

Thresholds flagged relative are scaled by the trial length.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class NoopThresholds:
    e0: float = 0.01  # relative
    e1: float = 1.1   # relative
    e2: float = 0.4   # relative
    e3: float = 5.0   # absolute
    e4: float = 1.0   # absolute
    e5: float = 3.0   # absolute
    e6: float = 0.01  # relative

    def scaled(self, trial_length: int) -> "NoopThresholds":
        return NoopThresholds(
            e0=self.e0 * trial_length,
            e1=self.e1 * trial_length,
            e2=self.e2 * trial_length,
            e3=self.e3,
            e4=self.e4,
            e5=self.e5,
            e6=self.e6 * trial_length,
        )


def noop_filter(agent_scores: Sequence[float], noop_scores: Sequence[float],
                trial_length: int,
                thresholds: NoopThresholds = NoopThresholds()) -> bool:
    if len(agent_scores) != len(noop_scores):
        raise ValueError("agent and no-op score lists must have equal length")
    t = thresholds.scaled(trial_length)
    r = list(agent_scores)
    rp = list(noop_scores)

    c1 = max(rp) <= t.e1
    c2 = sum(1 for x in r if x >= t.e2) <= t.e3
    c3 = (sum(1 for x in r if x >= max(rp) + t.e0) >= t.e4
          or sum(1 for x in r if x <= min(rp) - t.e0) >= t.e5)
    c4 = max(r) - min(r) >= t.e6
    return c1 and c2 and c3 and c4
