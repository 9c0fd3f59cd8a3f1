"""The agents-vs-trial-count meta-game and its maximum-entropy Nash value.

The payoff matrix holds median scores: rows are agents (maximizing), columns
are trial counts (minimizing). Each agent's adaptation metric is its expected
payoff against the column player's maximum-entropy optimal mixture.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize


def solve_zero_sum(A: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """(game value, one optimal row mixture, one optimal column mixture)."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if m == 0 or n == 0:
        raise ValueError("empty payoff matrix")

    # Row player: maximize v s.t. x^T A >= v, sum x = 1.
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-A.T, np.ones((n, 1))])
    b_ub = np.zeros(n)
    A_eq = np.zeros((1, m + 1))
    A_eq[0, :m] = 1.0
    bounds = [(0, None)] * m + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"row LP failed: {res.message}")
    x = np.clip(res.x[:m], 0, None)
    x /= x.sum()
    value = res.x[-1]

    # Column player: minimize w s.t. A y <= w, sum y = 1.
    c2 = np.zeros(n + 1)
    c2[-1] = 1.0
    A_ub2 = np.hstack([A, -np.ones((m, 1))])
    b_ub2 = np.zeros(m)
    A_eq2 = np.zeros((1, n + 1))
    A_eq2[0, :n] = 1.0
    bounds2 = [(0, None)] * n + [(None, None)]
    res2 = linprog(c2, A_ub=A_ub2, b_ub=b_ub2, A_eq=A_eq2, b_eq=[1.0],
                   bounds=bounds2, method="highs")
    if not res2.success:
        raise RuntimeError(f"column LP failed: {res2.message}")
    y = np.clip(res2.x[:n], 0, None)
    y /= y.sum()
    return float(value), x, y


def _max_entropy_over_optimal(A: np.ndarray, value: float, side: str,
                              start: np.ndarray, tol: float = 1e-7
                              ) -> np.ndarray:
    """Maximize entropy over the optimal-mixture polytope of one player."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    dim = m if side == "row" else n

    def neg_entropy(z):
        z = np.clip(z, 1e-12, None)
        return float(np.sum(z * np.log(z)))

    def neg_entropy_grad(z):
        z = np.clip(z, 1e-12, None)
        return np.log(z) + 1.0

    constraints = [{"type": "eq", "fun": lambda z: z.sum() - 1.0,
                    "jac": lambda z: np.ones_like(z)}]
    if side == "row":
        constraints.append({
            "type": "ineq",
            "fun": lambda z: z @ A - (value - tol),
            "jac": lambda z: A.T,
        })
    else:
        constraints.append({
            "type": "ineq",
            "fun": lambda z: (value + tol) - A @ z,
            "jac": lambda z: -A,
        })
    res = minimize(neg_entropy, start, jac=neg_entropy_grad,
                   bounds=[(0.0, 1.0)] * dim, constraints=constraints,
                   method="SLSQP", options={"maxiter": 300, "ftol": 1e-12})
    z = np.clip(res.x if res.success else start, 0, None)
    return z / z.sum()


def max_entropy_nash(A: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Game value plus maximum-entropy optimal mixtures for both players."""
    value, x0, y0 = solve_zero_sum(A)
    x = _max_entropy_over_optimal(A, value, "row", x0)
    y = _max_entropy_over_optimal(A, value, "column", y0)
    return value, x, y


@dataclass
class MetaGame:
    agents: list[str]
    ks: list[int]
    payoffs: np.ndarray  # [agents, ks] median scores

    def __post_init__(self):
        self.payoffs = np.asarray(self.payoffs, dtype=float)
        if not np.isfinite(self.payoffs).all():
            raise ValueError("payoff matrix must be finite")


def nash_adaptation_metric(meta: MetaGame) -> dict[str, float]:
    """Per-agent expected payoff against the max-entropy adversarial mixture
    over trial counts. Ranking by this metric is the adaptation ranking."""
    if meta.payoffs.size == 0:
        raise ValueError("empty meta-game")
    _, _, y = max_entropy_nash(meta.payoffs)
    payoff = meta.payoffs @ y
    return {a: float(payoff[i]) for i, a in enumerate(meta.agents)}


# -- independent oracle (support enumeration), used by the acceptance tests ----


def brute_force_zero_sum(A: np.ndarray, tol: float = 1e-9
                         ) -> tuple[float, np.ndarray, np.ndarray]:
    """Support-enumeration solution of the zero-sum game (exponential but
    exact for the small matrices the tests use)."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    best = None
    for ri in range(1, m + 1):
        for rows in itertools.combinations(range(m), ri):
            for ci in range(1, n + 1):
                for cols in itertools.combinations(range(n), ci):
                    sol = _support_solution(A, rows, cols, tol)
                    if sol is not None:
                        return sol
    raise RuntimeError("no equilibrium found (numerical trouble)")


def _support_solution(A, rows, cols, tol):
    m, n = A.shape
    ri, ci = len(rows), len(cols)
    # Solve for x on `rows` equalizing columns in `cols`, and y on `cols`
    # equalizing rows in `rows`, plus normalization.
    Ax = np.zeros((ci + 1, ri + 1))
    bx = np.zeros(ci + 1)
    for j, cj in enumerate(cols):
        Ax[j, :ri] = A[list(rows), cj]
        Ax[j, ri] = -1.0
    Ax[ci, :ri] = 1.0
    bx[ci] = 1.0
    Ay = np.zeros((ri + 1, ci + 1))
    by = np.zeros(ri + 1)
    for i, rw in enumerate(rows):
        Ay[i, :ci] = A[rw, list(cols)]
        Ay[i, ci] = -1.0
    Ay[ri, :ci] = 1.0
    by[ri] = 1.0
    try:
        solx, *_ = np.linalg.lstsq(Ax, bx, rcond=None)
        soly, *_ = np.linalg.lstsq(Ay, by, rcond=None)
    except np.linalg.LinAlgError:
        return None
    if not (np.allclose(Ax @ solx, bx, atol=1e-7)
            and np.allclose(Ay @ soly, by, atol=1e-7)):
        return None
    x_s, v1 = solx[:ri], solx[ri]
    y_s, v2 = soly[:ci], soly[ci]
    if abs(v1 - v2) > 1e-6:
        return None
    if (x_s < -tol).any() or (y_s < -tol).any():
        return None
    x = np.zeros(m)
    y = np.zeros(n)
    x[list(rows)] = np.clip(x_s, 0, None)
    y[list(cols)] = np.clip(y_s, 0, None)
    x /= x.sum()
    y /= y.sum()
    v = float(v1)
    # Optimality: no deviation improves either player.
    if (A.T @ x < v - 1e-7).any():
        return None
    if (A @ y > v + 1e-7).any():
        return None
    return v, x, y
