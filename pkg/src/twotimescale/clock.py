"""Two-timescale clock and the exogenous processes (fading, EH, prices).

Slots are numbered ``tau = 1..M*T`` and grouped into frames of ``T`` slots.
Frame-scale processes (harvest cap, grid price, harvest price) are drawn once
per frame; channel gains are redrawn every slot.

Randomness is keyed, not streamed: every draw comes from a generator seeded
with ``(seed, stream, index)``, so a sample depends only on the seed and its
slot/frame index. Runs can be replayed from any point and in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import JOULES_PER_KWH, SimConfig

FADING, HARVEST, PRICE_PHASE, RANDOM_CHANNELS = range(4)


@dataclass(frozen=True)
class Clock:
    tau: int
    T: int
    M: int
    T0: float = 1.0

    def __post_init__(self):
        if self.T < 1 or self.M < 1:
            raise ValueError("T and M must be positive")
        if not 1 <= self.tau <= self.M * self.T:
            raise ValueError(f"slot {self.tau} outside horizon 1..{self.M * self.T}")

    @classmethod
    def start(cls, cfg: SimConfig) -> "Clock":
        return cls(tau=1, T=cfg.T, M=cfg.M, T0=cfg.T0)

    @property
    def frame(self) -> int:
        return -(-self.tau // self.T)

    @property
    def frame_boundary(self) -> bool:
        return self.tau % self.T == 1 % self.T

    @property
    def frame_start(self) -> int:
        return (self.frame - 1) * self.T + 1

    @property
    def slot_in_frame(self) -> int:
        return self.tau - self.frame_start + 1

    @property
    def at_end(self) -> bool:
        return self.tau == self.M * self.T

    def advance(self) -> "Clock":
        if self.at_end:
            raise ValueError(f"cannot advance past the horizon end (tau={self.tau})")
        return Clock(self.tau + 1, self.T, self.M, self.T0)


def advance(clock: Clock) -> Clock:
    return clock.advance()


@dataclass(frozen=True)
class PriceModel:
    kind: str = "sinusoid"
    min_price: float = 1.8  # RMB/kWh
    max_price: float = 9.0
    period: int = 24  # frames

    def __post_init__(self):
        if self.min_price > self.max_price:
            raise ValueError("min_price exceeds max_price")
        if self.period < 1:
            raise ValueError("period must be >= 1")
        if self.kind not in ("sinusoid", "two_tier", "constant"):
            raise ValueError(f"unknown price model {self.kind!r}")

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "PriceModel":
        return cls(cfg.price_model, cfg.price_min, cfg.price_max, cfg.price_period)

    def price_kwh(self, frame: int, phase: float = 0.0) -> float:
        """Grid price of ``frame`` in RMB/kWh; ``phase`` is a fraction of a period."""
        lo, hi = self.min_price, self.max_price
        if self.kind == "constant":
            return lo
        pos = ((frame - 1) / self.period + phase) % 1.0
        if self.kind == "two_tier":
            return hi if pos < 0.5 else lo
        value = lo + (hi - lo) * 0.5 * (1.0 + math.sin(2.0 * math.pi * pos))
        return min(hi, max(lo, value))


@dataclass(frozen=True)
class EnvSample:
    gains: np.ndarray  # (N, K) linear power gains
    eh_cap: float  # J per slot
    grid_price: float  # RMB/J
    harvest_price: float  # RMB/J
    bandwidth: np.ndarray  # (K,) MHz


def _rng(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, stream, index])


def price_phase(cfg: SimConfig) -> float:
    return float(_rng(cfg.seed, PRICE_PHASE).random())


def frame_processes(frame: int, cfg: SimConfig, phase: float | None = None) -> tuple[float, float, float]:
    """(eh_cap J, grid price RMB/J, harvest price RMB/J) for one frame."""
    if phase is None:
        phase = price_phase(cfg)
    phi = float(_rng(cfg.seed, HARVEST, frame).uniform(0.0, cfg.phi_max))
    eta = PriceModel.from_config(cfg).price_kwh(frame, phase) / JOULES_PER_KWH
    kappa = cfg.kappa / JOULES_PER_KWH
    return phi, eta, kappa


def channel_gains(tau: int, cfg: SimConfig) -> np.ndarray:
    """Rayleigh block fading: exponential unit-mean power times the large-scale gain."""
    small = _rng(cfg.seed, FADING, tau).exponential(1.0, size=(cfg.N, cfg.K))
    # zero-probability draw, but gains must stay strictly positive
    small = np.maximum(small, np.finfo(float).tiny)
    return small * np.asarray(cfg.large_scale_gains())[:, None]


def sample_env(clock: Clock, cfg: SimConfig, phase: float | None = None) -> EnvSample:
    phi, eta, kappa = frame_processes(clock.frame, cfg, phase)
    return EnvSample(
        gains=channel_gains(clock.tau, cfg),
        eh_cap=phi,
        grid_price=eta,
        harvest_price=kappa,
        bandwidth=np.full(cfg.K, float(cfg.bandwidth)),
    )


def random_channels_rng(cfg: SimConfig, tau: int) -> np.random.Generator:
    return _rng(cfg.seed, RANDOM_CHANNELS, tau)
