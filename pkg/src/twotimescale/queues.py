"""Data and energy queues (fluid model)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ContractError(RuntimeError):
    """A controller produced a decision that violates a model constraint."""


@dataclass
class DataQueue:
    backlog: float  # Mbit
    priority: float = 1.0
    storage_cap: float = float("inf")
    initial: float | None = None
    cumulative_arrivals: float = 0.0
    cumulative_service: float = 0.0
    drop_count: float = 0.0

    def __post_init__(self):
        if self.backlog < 0:
            raise ValueError("backlog must be nonnegative")
        if self.initial is None:
            self.initial = self.backlog

    def update(self, r: float, v: float, T0: float) -> "DataQueue":
        """Serve ``v*T0`` then admit ``r*T0``; overflow beyond the cap is dropped."""
        if r < 0 or v < 0:
            raise ValueError(f"rates must be nonnegative (r={r}, v={v})")
        served = min(self.backlog, v * T0)
        arrived = r * T0
        after = self.backlog - served + arrived
        dropped = max(0.0, after - self.storage_cap)
        self.backlog = after - dropped
        self.cumulative_arrivals += arrived
        self.cumulative_service += served
        self.drop_count += dropped
        return self

    def balance_error(self) -> float:
        """Bit accounting residual; zero up to rounding."""
        return (self.cumulative_arrivals - self.cumulative_service - self.drop_count
                - (self.backlog - self.initial))


def update_data_queue(q: DataQueue, r: float, v: float, T0: float) -> DataQueue:
    return q.update(r, v, T0)


def lindley_step(Q: np.ndarray, r: np.ndarray, v: np.ndarray, T0: float,
                 cap: float = float("inf")) -> np.ndarray:
    """Vectorised data-queue update for all devices."""
    return np.minimum(cap, np.maximum(Q - v * T0, 0.0) + r * T0)


@dataclass
class EnergyQueue:
    backlog: float  # J
    capacity: float  # J

    def __post_init__(self):
        if not 0.0 <= self.backlog <= self.capacity:
            raise ValueError("energy backlog must lie in [0, E_max]")

    @property
    def headroom(self) -> float:
        return self.capacity - self.backlog

    def update(self, p_c: float, g: float, harvested: float, tol: float = 1e-9) -> "EnergyQueue":
        E = self.backlog
        if min(p_c, g, harvested) < -tol:
            raise ContractError("negative energy quantity")
        if p_c > E + tol:
            raise ContractError(f"energy causality violated: p_c={p_c} > E={E}")
        if E + g + harvested > self.capacity + tol:
            raise ContractError(f"battery capacity violated: E+g+theta={E + g + harvested} > {self.capacity}")
        self.backlog = min(self.capacity, max(E - p_c, 0.0) + g + harvested)
        return self


def update_energy_queue(e: EnergyQueue, p_c: float, g: float, harvested: float) -> EnergyQueue:
    return e.update(p_c, g, harvested)


def mean_rate_stability_stat(history) -> np.ndarray:
    """``Q(tau_last) / tau_last`` per queue; ``history`` is (slots,) or (slots, N)."""
    h = np.asarray(history, dtype=float)
    if h.shape[0] < 2:
        raise ValueError("need at least two recorded slots")
    return h[-1] / h.shape[0]


class UnstableQueue(ArithmeticError):
    pass


def time_average_delay(r_hist, v_hist) -> np.ndarray:
    """Little-style delay ``rbar / (vbar (vbar - rbar))`` per queue.

    Rates must be in the same unit; the result is in the reciprocal rate unit
    times seconds (callers pass bit/s to get seconds).
    """
    r = np.atleast_2d(np.asarray(r_hist, dtype=float).T).T
    v = np.atleast_2d(np.asarray(v_hist, dtype=float).T).T
    rbar = r.mean(axis=0)
    vbar = v.mean(axis=0)
    unstable = (vbar <= rbar) & (rbar > 0)
    if unstable.any():
        raise UnstableQueue("mean service does not exceed mean arrivals for queues "
                            f"{np.flatnonzero(unstable).tolist()}")
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(rbar > 0, rbar / (vbar * (vbar - rbar)), 0.0)
    return d
