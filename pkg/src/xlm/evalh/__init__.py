from .scores import GapReport, ScoreRecord, ScoreTable, percentile_curves
from .nash import max_entropy_nash, nash_adaptation_metric, solve_zero_sum
from .harness import (
    compute_normalizers,
    evaluate_policy,
    k_conditioning_report,
    prompt_eval,
    selfplay_vs_random,
)

__all__ = [
    "ScoreRecord",
    "ScoreTable",
    "GapReport",
    "percentile_curves",
    "solve_zero_sum",
    "max_entropy_nash",
    "nash_adaptation_metric",
    "evaluate_policy",
    "compute_normalizers",
    "prompt_eval",
    "k_conditioning_report",
    "selfplay_vs_random",
]
