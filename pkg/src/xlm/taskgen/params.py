"""Generation parameters shared by the world/game samplers and the pool builder."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict


class GenerationError(RuntimeError):
    """Raised when a sampler cannot satisfy its constraints within its retry budget."""


@dataclass(frozen=True)
class GenParams:
    # Worlds
    size_range: tuple[int, int] = (6, 9)
    wall_density: float = 0.12
    min_free_cells: int = 12

    # Games
    chain_depth_range: tuple[int, int] = (1, 3)
    max_distractors: int = 3
    dead_end_range: tuple[int, int] = (0, 2)
    goal_negation_prob: float = 0.15
    player_arg_prob: float = 0.25
    duplicate_input_prob: float = 0.15
    extra_spawn_prob: float = 0.25

    # Episodes
    trial_length_range: tuple[int, int] = (20, 100)

    # Internal retry budgets
    placement_retries: int = 200
    game_retries: int = 50

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "GenParams":
        d = dict(d)
        for key in ("size_range", "chain_depth_range", "dead_end_range",
                    "trial_length_range"):
            if key in d:
                d[key] = tuple(d[key])
        return GenParams(**d)


# Profile for the oracle-vs-exhaustive-search agreement check: worlds small
# enough that full-state search stays tractable, at most three objects alive.
AGREEMENT_PARAMS = GenParams(
    size_range=(5, 5),
    wall_density=0.08,
    min_free_cells=18,
    chain_depth_range=(1, 2),
    max_distractors=0,
    dead_end_range=(0, 1),
    goal_negation_prob=0.15,
    player_arg_prob=0.25,
    duplicate_input_prob=0.0,
    extra_spawn_prob=0.0,
    trial_length_range=(80, 80),
)
