"""Pure-Python kernels. Same algorithms and signatures as ``_core.pyx``.

Used when the compiled extension is unavailable, or when
``TWOTIMESCALE_PURE=1`` is set.
"""

from __future__ import annotations

import math

import numpy as np

LN2 = math.log(2.0)
BISECT_MAX = 200


def _block_rates(a, b, lam):
    with np.errstate(divide="ignore", invalid="ignore"):
        x = b / ((a + lam) * LN2) - 1.0
    return np.where(b > 0, np.maximum(x, 0.0), 0.0)


def block_solve(a, b, c, rho):
    """argmin_x sum_i (a_i x_i - b_i log2(1 + x_i)) + rho/2 (sum x + c)^2, x >= 0.

    Given the block sum ``s`` every coordinate has a closed-form minimiser, so
    the block reduces to finding the root of ``s -> sum_i x_i(rho (s + c)) - s``,
    which is strictly decreasing; bisection on ``s`` brackets it.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    active = b > 0
    if not active.any():
        return np.zeros_like(a)
    a_min = float(a[active].min())
    # below s_lo the multiplier rho*(s+c) would make some coordinate unbounded
    s_lo = max(0.0, -a_min / rho - c)
    s_hi = max(0.0, float(np.max(b[active] / LN2 - a[active])) / rho - c)
    if s_hi <= s_lo:
        return _block_rates(a, b, rho * (s_hi + c))
    lo, hi = s_lo, s_hi
    for _ in range(BISECT_MAX):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        lam = rho * (mid + c)
        if lam <= -a_min:
            lo = mid
            continue
        if _block_rates(a, b, lam).sum() > mid:
            lo = mid
        else:
            hi = mid
    return _block_rates(a, b, rho * (hi + c))


def admm_solve(a, b, R, split, rho, eps_pri, eps_dual, max_iter, x0, z0, mu0):
    """Scaled two-block ADMM for min sum_i (a_i r_i - b_i log2(1+r_i)) s.t. sum r = R.

    Returns ``(r, iterations, mu, converged, rp_trace, rd_trace)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a1, b1, a2, b2 = a[:split], b[:split], a[split:], b[split:]
    x = np.array(x0, dtype=float)
    z = np.array(z0, dtype=float)
    mu = float(mu0)
    rp_trace = []
    rd_trace = []
    converged = False
    it = 0
    while it < max_iter:
        x = block_solve(a1, b1, z.sum() - R + mu, rho)
        z_prev_sum = z.sum()
        z = block_solve(a2, b2, x.sum() - R + mu, rho)
        rp = x.sum() + z.sum() - R
        mu += rp
        rd = rho * abs(z.sum() - z_prev_sum)
        it += 1
        rp_trace.append(abs(rp))
        rd_trace.append(rd)
        if abs(rp) <= eps_pri and rd <= eps_dual:
            converged = True
            break
    return np.concatenate([x, z]), it, mu, converged, np.array(rp_trace), np.array(rd_trace)


def demand_sets(f, prices, q):
    """Top-``q`` channels by ``f - price`` per device, positive surplus only.

    Returns an (N, K) 0/1 array. Ties go to the lower channel index.
    """
    surplus = f - prices[None, :]
    order = np.argsort(-surplus, axis=1, kind="stable")[:, :q]
    rows = np.arange(f.shape[0])[:, None]
    keep = surplus[rows, order] > 0
    out = np.zeros(f.shape, dtype=np.int8)
    out[np.broadcast_to(rows, order.shape)[keep], order[keep]] = 1
    return out


def price_auction(f, q, dlam, max_rounds):
    """Simultaneous ascending-price matching with quota ``q``.

    Each round every device demands its best ``q`` channels with positive
    surplus; every channel demanded by more than one device raises its price
    by ``dlam``. Stops when no channel is over-demanded.

    Returns ``(owner, prices, rounds, rises)``; ``owner[k] = -1`` if unmatched.
    """
    f = np.asarray(f, dtype=float)
    K = f.shape[1]
    prices = np.zeros(K)
    rounds = 0
    rises = 0
    while True:
        demand = demand_sets(f, prices, q)
        counts = demand.sum(axis=0)
        conflicts = counts > 1
        rounds += 1
        if not conflicts.any() or rounds >= max_rounds:
            break
        prices[conflicts] += dlam
        rises += int(conflicts.sum())
    owner = np.full(K, -1, dtype=np.int64)
    single = counts == 1
    owner[single] = np.argmax(demand[:, single], axis=0)
    return owner, prices, rounds, rises
