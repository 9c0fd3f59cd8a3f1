"""Grid-world meta-RL laboratory.

Subpackages:
  env         deterministic grid simulator (goals, production rules, trials)
  taskgen     procedural task pools, holdout splits, solvability oracle
  curriculum  no-op filtering, prioritised replay, co-player pool
  nn          policy/value/model network with four memory variants
  learner     Muesli training loop (Retrace, CMPO, distillation)
  evalh       score tables, percentile curves, Nash adaptation metric
  serve       session server + wire protocol for human play
"""

__version__ = "0.1.0"
