"""Per-slot rate control.

Each slot minimises ``sum_n Q_n T0 r_n - V chi_n log2(1 + r_n)`` subject to
``0 <= sum_n r_n <= R_max`` and ``r >= 0``. The coupling constraint is handled
by two-block scaled ADMM (devices ``[0, l_r)`` vs ``[l_r, N)``); a KKT
bisection solver serves as the reference.

Rates are in Mbit/s and backlogs in Mbit, so ``Q T0 r`` and the utility are
both O(1..100) for the default parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend

LN2 = math.log(2.0)


@dataclass(frozen=True)
class RateProblem:
    queue_weights: np.ndarray  # Q_n * T0
    utility_weights: np.ndarray  # V * chi_n
    R_max: float
    split: int = 0  # 0 -> N // 2
    rho: float = 0.0  # 0 -> curvature-matched penalty
    eps_pri: float = 1e-4
    eps_dual: float = 1e-4
    max_iter: int = 500

    def __post_init__(self):
        a = np.asarray(self.queue_weights, dtype=float)
        b = np.asarray(self.utility_weights, dtype=float)
        object.__setattr__(self, "queue_weights", a)
        object.__setattr__(self, "utility_weights", b)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("weights must be 1-D arrays of equal length")
        if np.any(a < 0) or np.any(b < 0):
            raise ValueError("weights must be nonnegative")
        if self.R_max < 0 or self.rho < 0:
            raise ValueError("need R_max >= 0 and rho >= 0")
        n = a.size
        if self.split == 0:
            object.__setattr__(self, "split", max(1, n // 2))
        if n >= 2 and not 1 <= self.split <= n - 1:
            raise ValueError(f"split must lie in [1, {n - 1}]")
        if self.rho == 0:
            object.__setattr__(self, "rho", matched_penalty(a, b, self.R_max, self.split))

    @classmethod
    def from_state(cls, Q, chi, V: float, T0: float, R_max: float, **kw) -> "RateProblem":
        return cls(np.asarray(Q, float) * T0, V * np.asarray(chi, float), R_max, **kw)

    @property
    def n(self) -> int:
        return self.queue_weights.size

    def objective(self, r) -> float:
        r = np.asarray(r, dtype=float)
        return float(np.sum(self.queue_weights * r - self.utility_weights * np.log2(1.0 + r)))


@dataclass
class AdmmState:
    x_block: np.ndarray
    z_block: np.ndarray
    mu: float = 0.0
    iteration: int = 0
    residual_pri: float = math.inf
    residual_dual: float = math.inf

    @classmethod
    def cold(cls, problem: RateProblem) -> "AdmmState":
        return cls(np.zeros(problem.split), np.zeros(problem.n - problem.split))


@dataclass
class RateSolution:
    rates: np.ndarray
    iterations: int
    converged: bool
    bypassed: bool  # sum cap slack: the unconstrained optimum was returned
    mu: float = 0.0
    primal_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def residual_pri(self) -> float:
        return float(self.primal_trace[-1]) if self.primal_trace.size else 0.0

    @property
    def residual_dual(self) -> float:
        return float(self.dual_trace[-1]) if self.dual_trace.size else 0.0


def rates_at_multiplier(a, b, lam: float) -> np.ndarray:
    """Per-device minimiser of ``a r - b log2(1+r) + lam r`` over ``r >= 0``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = b / ((a + lam) * LN2) - 1.0
    r = np.where(a + lam > 0, r, np.inf)
    return np.where(b > 0, np.maximum(r, 0.0), 0.0)


def matched_penalty(a, b, R: float, split: int) -> float:
    """Penalty matched to the curvature of the two block value functions.

    Curvatures are taken at the proportionally scaled-down unconstrained
    optimum (a cheap feasible point). A block's value function has curvature
    ``1 / sum_i 1/phi_i''``; the geometric mean of the two blocks balances
    the primal and dual residual contraction.
    """
    free = rates_at_multiplier(a, b, 0.0)
    free = np.where(np.isfinite(free), free, max(R, 1.0))
    total = free.sum()
    r = free * (R / total) if total > R else free
    curv = np.where(b > 0, b / ((1.0 + r) ** 2 * LN2), 0.0)
    active = (r > 0) & (curv > 0)

    def block(sl):
        c = curv[sl][active[sl]]
        return 1.0 / np.sum(1.0 / c) if c.size else 0.0

    k1, k2 = block(slice(0, split)), block(slice(split, None))
    if k1 > 0 and k2 > 0:
        return math.sqrt(k1 * k2)
    return max(k1, k2, 1e-3)


def unconstrained_rates(problem: RateProblem) -> np.ndarray:
    return rates_at_multiplier(problem.queue_weights, problem.utility_weights, 0.0)


def x_update(problem: RateProblem, z_block, mu: float) -> np.ndarray:
    s = problem.split
    c = float(np.sum(z_block)) - problem.R_max + mu
    return _backend.block_solve(problem.queue_weights[:s], problem.utility_weights[:s], c, problem.rho)


def z_update(problem: RateProblem, x_block, mu: float) -> np.ndarray:
    s = problem.split
    c = float(np.sum(x_block)) - problem.R_max + mu
    return _backend.block_solve(problem.queue_weights[s:], problem.utility_weights[s:], c, problem.rho)


def dual_update(mu: float, x_block, z_block, R_max: float) -> float:
    return mu + float(np.sum(x_block)) + float(np.sum(z_block)) - R_max


def residuals(x_block, z_block, z_prev, rho: float, R_max: float) -> tuple[float, float]:
    primal = abs(float(np.sum(x_block)) + float(np.sum(z_block)) - R_max)
    dual = rho * abs(float(np.sum(z_block)) - float(np.sum(z_prev)))
    return primal, dual


def solve_rates_admm(problem: RateProblem, state: AdmmState | None = None) -> RateSolution:
    """Rate control by ADMM; returns the unconstrained optimum when the cap is slack.

    Non-convergence within ``max_iter`` is reported through ``converged`` with
    the last iterate returned.
    """
    free = unconstrained_rates(problem)
    if np.all(np.isfinite(free)) and free.sum() <= problem.R_max:
        return RateSolution(free, 0, True, True)
    if problem.n == 1:
        return RateSolution(np.array([problem.R_max]), 0, True, False)
    state = state or AdmmState.cold(problem)
    r, it, mu, ok, rp, rd = _backend.admm_solve(
        problem.queue_weights, problem.utility_weights, float(problem.R_max),
        problem.split, float(problem.rho), float(problem.eps_pri), float(problem.eps_dual),
        int(problem.max_iter), state.x_block, state.z_block, float(state.mu))
    state.x_block = r[:problem.split].copy()
    state.z_block = r[problem.split:].copy()
    state.mu = mu
    state.iteration += it
    if rp.size:
        state.residual_pri, state.residual_dual = float(rp[-1]), float(rd[-1])
    return RateSolution(r, it, ok, False, mu, rp, rd)


def oracle_rates(problem: RateProblem, tol: float = 1e-10) -> np.ndarray:
    """KKT solution: water-filling form with the sum multiplier found by bisection."""
    a, b, R = problem.queue_weights, problem.utility_weights, problem.R_max
    free = rates_at_multiplier(a, b, 0.0)
    if np.all(np.isfinite(free)) and free.sum() <= R:
        return free
    hi = max(1.0, float(np.max(b / LN2 - a)))
    lo = 0.0
    while rates_at_multiplier(a, b, hi).sum() > R:
        hi *= 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if rates_at_multiplier(a, b, mid).sum() > R:
            lo = mid
        else:
            hi = mid
    lam = hi
    r = rates_at_multiplier(a, b, lam)
    # close the small gap left by the bisection on the devices still active
    gap = R - r.sum()
    active = r > 0
    if gap > 0 and active.any():
        r[active] += gap / active.sum()
    return r
