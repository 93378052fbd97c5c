"""Per-slot channel selection and power allocation.

Every (device, channel) pair gets its own best transmit power in closed form.
That fixes a pair value ``f = Q T0 W log2(1 + p h / noise) - headroom * p``.
Channels are then handed out by a price-rising auction with per-device
quota ``q``: devices demand their ``q`` best channels by ``f - price``, and
channels wanted by more than one device raise their price until a single
bidder is left.

Rates here are in Mbit/s (bandwidth in MHz). The delay target works in bit/s
and seconds, see :func:`delay_to_rate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import _backend

LN2 = math.log(2.0)
BITS_PER_MBIT = 1e6


# --- delay target ---------------------------------------------------------

@dataclass(frozen=True)
class DelayTarget:
    v_star: np.ndarray  # bit/s


def delay_to_rate(r, d_star):
    """Smallest service rate whose delay ``r / (v (v - r))`` equals ``d_star``.

    ``r`` in bit/s, ``d_star`` in s; returns bit/s (scalar in, scalar out).
    """
    d = np.asarray(d_star, dtype=float)
    if np.any(d <= 0):
        raise ValueError("d_star must be positive")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("arrival rate must be nonnegative")
    dr = d * r_arr
    v = (dr + np.sqrt(dr * dr + 4.0 * r_arr * d)) / (2.0 * d)
    return float(v) if v.ndim == 0 else v


def delay_residual(v, r, d_star):
    """``d v^2 - d r v - r``; zero at the delay target."""
    v = np.asarray(v, dtype=float)
    return d_star * v * v - d_star * r * v - r


def delay_targets(r_mbps, d_star) -> DelayTarget:
    return DelayTarget(np.asarray(delay_to_rate(np.asarray(r_mbps, float) * BITS_PER_MBIT, d_star)))


# --- per-pair power and value ---------------------------------------------

def optimal_power(Q, headroom, W, h, noise, T0, p_max):
    """Closed-form maximiser of :func:`pair_utility` over ``0 <= p <= p_max``.

    Vectorised over any broadcastable inputs. Zero headroom means energy is
    free, so the full power budget is used.
    """
    Q, headroom, W, h = (np.asarray(x, dtype=float) for x in (Q, headroom, W, h))
    if np.any(headroom < 0):
        raise ValueError("battery headroom must be nonnegative")
    if np.any(h <= 0):
        raise ValueError("channel gains must be positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        p = Q * T0 * W / (headroom * LN2) - noise / h
    p = np.where(headroom > 0, p, p_max)
    p = np.clip(p, 0.0, p_max)
    return float(p) if p.ndim == 0 else p


def pair_utility(Q, headroom, W, h, noise, T0, p):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("power must be nonnegative")
    val = Q * T0 * W * np.log2(1.0 + p * h / noise) - headroom * p
    return float(val) if np.ndim(val) == 0 else val


def link_rate(W, h, noise, p):
    """Shannon rate of one link, Mbit/s for W in MHz."""
    return W * np.log2(1.0 + np.asarray(p, float) * h / noise)


@dataclass(frozen=True)
class PairEvaluation:
    """All N x K pairs at their own best power."""
    power: np.ndarray  # W
    rate: np.ndarray  # Mbit/s
    utility: np.ndarray  # f, per pair
    prices: np.ndarray  # (K,)

    @property
    def preference(self) -> np.ndarray:
        return self.utility - self.prices[None, :]

    def with_prices(self, prices) -> "PairEvaluation":
        return PairEvaluation(self.power, self.rate, self.utility, np.asarray(prices, float))


def evaluate_pairs(Q, headroom: float, gains, bandwidth, noise: float, T0: float,
                   p_max: float, prices=None) -> PairEvaluation:
    gains = np.asarray(gains, dtype=float)
    N, K = gains.shape
    Qc = np.asarray(Q, dtype=float)[:, None]
    W = np.broadcast_to(np.asarray(bandwidth, dtype=float), (K,))[None, :]
    p = optimal_power(Qc, headroom, W, gains, noise, T0, p_max)
    rate = link_rate(W, gains, noise, p)
    f = Qc * T0 * rate - headroom * p
    prices = np.zeros(K) if prices is None else np.asarray(prices, float)
    return PairEvaluation(p, rate, f, prices)


def build_preferences(n: int, prices, pairs: PairEvaluation, acceptable_only: bool = False) -> list[int]:
    """Channels ordered by ``f[n, k] - price[k]``, best first; ties by index.

    With ``acceptable_only`` the channels with nonpositive preference are
    dropped (a device never bids for them).
    """
    F = pairs.utility[n] - np.asarray(prices, dtype=float)
    order = np.argsort(-F, kind="stable")
    if acceptable_only:
        order = order[F[order] > 0]
    return [int(k) for k in order]


# --- matching --------------------------------------------------------------

@dataclass
class Matching:
    channel_owner: np.ndarray  # (K,), -1 if unassigned
    prices: np.ndarray
    n_devices: int
    rounds: int = 0
    rises: int = 0
    delta_lambda: float = 0.0
    history: list = field(default_factory=list)  # tentative owners per round, if traced

    @property
    def assignment(self) -> list[frozenset]:
        out = [set() for _ in range(self.n_devices)]
        for k, n in enumerate(self.channel_owner):
            if n >= 0:
                out[n].add(k)
        return [frozenset(s) for s in out]

    @property
    def x(self) -> np.ndarray:
        x = np.zeros((self.n_devices, self.channel_owner.size), dtype=np.int8)
        own = self.channel_owner >= 0
        x[self.channel_owner[own], np.nonzero(own)[0]] = 1
        return x

    @property
    def unmatched(self) -> list[int]:
        return [n for n, s in enumerate(self.assignment) if not s]

    @property
    def price_slack(self) -> float:
        """Total price raised; bounds the welfare loss against the optimum."""
        return float(self.prices.sum())

    def check(self, q: int) -> None:
        x = self.x
        if np.any(x.sum(axis=1) > q):
            raise AssertionError("device quota exceeded")
        if np.any(x.sum(axis=0) > 1):
            raise AssertionError("channel assigned twice")


def default_delta_lambda(f, frac: float = 0.01) -> float:
    a = np.abs(np.asarray(f, dtype=float)).ravel()
    for cand in (np.median(a) if a.size else 0.0, a.max(initial=0.0)):
        if cand > 0 and math.isfinite(cand):
            return frac * float(cand)
    return 1.0


def round_limit(f, delta_lambda: float) -> int:
    """Upper bound on auction rounds: each conflict round raises some price,
    and no price can exceed the top pair value by more than one step."""
    f = np.asarray(f, dtype=float)
    top = max(float(f.max(initial=0.0)), 0.0)
    return int(f.shape[1] * (math.ceil(top / delta_lambda) + 1) + 1)


def match(f, q: int, delta_lambda: float | None = None, frac: float = 0.01,
          trace: bool = False) -> Matching:
    """Price-rising one-to-many matching on pair values ``f`` (N x K)."""
    f = np.ascontiguousarray(f, dtype=float)
    if q < 1:
        raise ValueError("quota must be at least 1")
    if delta_lambda is None or delta_lambda == 0:
        delta_lambda = default_delta_lambda(f, frac)
    if delta_lambda <= 0:
        raise ValueError("price step must be positive")
    N, K = f.shape
    limit = round_limit(f, delta_lambda)
    if trace:
        owner, prices, rounds, rises, history = _traced_auction(f, q, delta_lambda, limit)
    else:
        owner, prices, rounds, rises = _backend.price_auction(f, q, delta_lambda, limit)
        history = []
    if rounds >= limit:
        demand = _backend.demand_sets(f, prices, q)
        if np.any(demand.sum(axis=0) > 1):
            raise RuntimeError("auction hit its round bound with conflicts left")
    return Matching(np.asarray(owner, dtype=np.int64), np.asarray(prices, float), N,
                    int(rounds), int(rises), float(delta_lambda), history)


def _traced_auction(f, q, dlam, limit):
    K = f.shape[1]
    prices = np.zeros(K)
    history = []
    rounds = rises = 0
    while True:
        demand = _backend.demand_sets(f, prices, q)
        counts = demand.sum(axis=0)
        tentative = np.where(counts == 1, np.argmax(demand, axis=0), -1)
        history.append(tentative)
        rounds += 1
        conflicts = counts > 1
        if not conflicts.any() or rounds >= limit:
            break
        prices[conflicts] += dlam
        rises += int(conflicts.sum())
    return tentative, prices, rounds, rises, history


def blocking_pairs(m: Matching, f, q: int) -> list[tuple[int, int]]:
    """Pairs (n, k), k not held by n, that both gain by matching at final prices.

    Device side: spare quota and positive preference, or preference above its
    worst held channel. Channel side: unassigned, or n's value beats the owner's.
    """
    f = np.asarray(f, dtype=float)
    F = f - m.prices[None, :]
    held = m.assignment
    out = []
    for n, k in product(range(f.shape[0]), range(f.shape[1])):
        if k in held[n]:
            continue
        if len(held[n]) < q:
            dev = F[n, k] > 0
        else:
            dev = F[n, k] > min(F[n, j] for j in held[n])
        if not dev:
            continue
        o = m.channel_owner[k]
        if o < 0 or f[n, k] > f[o, k]:
            out.append((n, k))
    return out


def welfare(f, x) -> float:
    return float(np.sum(np.asarray(f, float) * np.asarray(x)))


def best_assignment(f, q: int) -> tuple[float, np.ndarray]:
    """Exhaustive optimum over all assignments (each channel to one device or none)."""
    f = np.asarray(f, dtype=float)
    N, K = f.shape
    best, best_owner = 0.0, np.full(K, -1)
    for owner in product(range(-1, N), repeat=K):
        own = np.asarray(owner)
        if any(np.sum(own == n) > q for n in range(N)):
            continue
        val = sum(f[n, k] for k, n in enumerate(owner) if n >= 0)
        if val > best:
            best, best_owner = val, own
    return float(best), best_owner


def random_assignment(N: int, K: int, q: int, rng: np.random.Generator) -> Matching:
    """Each channel, in random order, goes to a random device with quota left."""
    owner = np.full(K, -1, dtype=np.int64)
    load = np.zeros(N, dtype=int)
    for k in rng.permutation(K):
        free = np.nonzero(load < q)[0]
        if free.size == 0:
            break
        n = int(rng.choice(free))
        owner[k] = n
        load[n] += 1
    return Matching(owner, np.zeros(K), N)


# --- repairs and checks -----------------------------------------------------

def enforce_energy_causality(powers, E: float, T0: float = 1.0) -> tuple[np.ndarray, bool]:
    """Scale all powers down proportionally so total energy fits in ``E``.

    Returns the (possibly) scaled powers and whether scaling was applied.
    """
    p = np.asarray(powers, dtype=float)
    total = float(p.sum()) * T0
    if total <= E:
        return p.copy(), False
    if E <= 0:
        return np.zeros_like(p), True
    return p * (E / total), True


def service_rates(x, powers, gains, bandwidth, noise: float) -> np.ndarray:
    """Per-device Mbit/s over the assigned channels."""
    return np.sum(np.asarray(x) * link_rate(np.asarray(bandwidth, float)[None, :], gains,
                                            noise, powers), axis=1)


def check_c12(v_mbps, r_mbps, d_star) -> np.ndarray:
    """True where the service rate meets the delay target (soft constraint)."""
    target = delay_targets(r_mbps, d_star).v_star
    v = np.asarray(v_mbps, dtype=float) * BITS_PER_MBIT
    return v >= target * (1.0 - 1e-12)
