"""Acceptance checks with independent oracles.

Each ``criterion_N`` returns a :class:`CriterionResult`. They are shared by
``twotimescale check`` and ``tests/test_acceptance.py``. Thresholds and
sample counts are fixed here, not tuned per run.
"""

from __future__ import annotations

import contextlib
import filecmp
import io
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import JOULES_PER_KWH, SimConfig, default_config
from .controller import drift_bound_check, run, tradeoff_sweep
from .energy import d1_value, schedule_energy
from .matching import (best_assignment, blocking_pairs, evaluate_pairs, match, optimal_power,
                       pair_utility, welfare)
from .metrics import par
from .rates import RateProblem, oracle_rates, rates_at_multiplier, solve_rates_admm

ORACLE_SEED = 20240611


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0
    time_limit: float | None = None

    @property
    def in_time(self) -> bool:
        return self.time_limit is None or self.elapsed <= self.time_limit

    def line(self) -> str:
        tag = "PASS" if self.passed and self.in_time else "FAIL"
        limit = f" / limit {self.time_limit:.0f} s" if self.time_limit else ""
        return f"[{tag}] criterion {self.number:2d} {self.name}: {self.detail} ({self.elapsed:.1f} s{limit})"


def _timed(number, name, limit=None):
    def wrap(fn):
        def inner(*args, **kw):
            t0 = time.perf_counter()
            passed, detail = fn(*args, **kw)
            return CriterionResult(number, name, bool(passed), detail,
                                   time.perf_counter() - t0, limit)
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


# --- 1: energy management ------------------------------------------------------

def energy_grid_min(E, phi, eta, kappa, cfg: SimConfig, step=1e-3):
    """Minimum of the frame energy term over the (g, theta) grid with step ``step``.

    The term is linear in g for fixed theta, so for each theta grid point only
    the two extreme g grid points can be optimal; the result equals the full
    2-D grid minimum.
    """
    head = cfg.E_max - E
    th = np.arange(0, int(np.floor(min(phi, head) / step + 1e-9)) + 1) * step
    g_top = np.floor(np.minimum(cfg.g_max, head - th) / step + 1e-9) * step
    g_top = np.maximum(g_top, 0.0)
    vals = [d1_value(g, th, E, eta, kappa, cfg.V, cfg.T, cfg.beta, cfg.E_max)
            for g in (np.zeros_like(th), g_top)]
    return float(np.min(np.minimum(*vals)))


def energy_grid_min_full(E, phi, eta, kappa, cfg: SimConfig, step=1e-3):
    head = cfg.E_max - E
    th = np.arange(0, int(np.floor(min(phi, head) / step + 1e-9)) + 1) * step
    g = np.arange(0, int(np.floor(min(cfg.g_max, head) / step + 1e-9)) + 1) * step
    G, TH = np.meshgrid(g, th)
    ok = G + TH <= head + 1e-12
    vals = d1_value(G, TH, E, eta, kappa, cfg.V, cfg.T, cfg.beta, cfg.E_max)
    return float(vals[ok].min())


def energy_draws(n, rng, cfg: SimConfig):
    E = rng.uniform(0, cfg.E_max, n)
    phi = rng.uniform(0, cfg.phi_max, n)
    eta = rng.uniform(cfg.price_min, cfg.price_max, n) / JOULES_PER_KWH
    kappa = rng.uniform(0, 1, n) * eta
    return E, phi, eta, kappa


def energy_grid_min_batch(E, phi, eta, kappa, cfg: SimConfig, step=1e-3):
    """:func:`energy_grid_min` for arrays of draws (theta grid padded with +inf)."""
    head = cfg.E_max - E
    n_th = np.floor(np.minimum(phi, head) / step + 1e-9).astype(int)
    th = np.arange(n_th.max() + 1)[None, :] * step
    valid = np.arange(th.shape[1])[None, :] <= n_th[:, None]
    g_top = np.floor(np.minimum(cfg.g_max, head[:, None] - th) / step + 1e-9) * step
    g_top = np.maximum(g_top, 0.0)
    wb = cfg.V * cfg.T * cfg.beta
    cg = (wb * eta - head)[:, None]
    ct = (wb * kappa - head)[:, None]
    vals = ct * th + np.minimum(0.0, cg * g_top)
    return np.where(valid, vals, np.inf).min(axis=1)


@_timed(1, "energy-management optimality", 10.0)
def criterion_1(draws: int = 10_000, full_grid: int = 20, step: float = 1e-3):
    cfg = default_config()
    rng = np.random.default_rng([ORACLE_SEED, 1])
    E, phi, eta, kappa = energy_draws(draws, rng, cfg)
    ours = np.empty(draws)
    for i in range(draws):
        dec = schedule_energy(E[i], phi[i], eta[i], cfg.g_max, cfg.E_max, cfg.V, cfg.T,
                              cfg.beta, kappa=kappa[i])
        ours[i] = d1_value(dec.purchased, dec.harvested, E[i], eta[i], kappa[i], cfg.V, cfg.T,
                           cfg.beta, cfg.E_max)
    grid = np.concatenate([energy_grid_min_batch(E[i:i + 500], phi[i:i + 500], eta[i:i + 500],
                                                 kappa[i:i + 500], cfg, step)
                           for i in range(0, draws, 500)])
    # some grid point lies within one step of the optimum in each coordinate
    head = cfg.E_max - E
    wb = cfg.V * cfg.T * cfg.beta
    slack = step * (np.abs(wb * eta - head) + np.abs(wb * kappa - head)) + 1e-9
    bad = int(np.sum((ours > grid + 1e-9) | (grid - ours > slack)))
    mismatched = 0
    for i in range(full_grid):
        a = energy_grid_min(E[i], phi[i], eta[i], kappa[i], cfg, step)
        b = energy_grid_min_full(E[i], phi[i], eta[i], kappa[i], cfg, step)
        mismatched += abs(a - b) > 1e-9 or abs(a - grid[i]) > 1e-9
    ok = bad == 0 and mismatched == 0
    return ok, (f"{draws - bad}/{draws} draws match the grid minimum; "
                f"reduced grid agrees with full 2-D grid on {full_grid - mismatched}/{full_grid}")


# --- 2: power allocation -----------------------------------------------------

def power_grid_max(Q, head, W, h, noise, T0, p_max, step=1e-6, coarse=1e-3):
    """Grid maximum of the pair value over ``[0, p_max]`` at resolution ``step``.

    A coarse pass locates the peak; the fine grid is evaluated on the two
    coarse cells either side. The pair value is concave in p, so the global
    grid maximum lies in that window.
    """
    pc = np.arange(0, p_max + coarse / 2, coarse)
    fc = pair_utility(Q, head, W, h, noise, T0, pc)
    j = int(np.argmax(fc))
    lo, hi = max(0.0, pc[j] - 2 * coarse), min(p_max, pc[j] + 2 * coarse)
    i0, i1 = int(np.ceil(lo / step - 1e-9)), int(np.floor(hi / step + 1e-9))
    pf = np.arange(i0, i1 + 1) * step
    ff = pair_utility(Q, head, W, h, noise, T0, pf)
    k = int(np.argmax(ff))
    return float(ff[k]), float(pf[k])


@_timed(2, "power-allocation optimality", 30.0)
def criterion_2(draws: int = 10_000, step: float = 1e-6):
    cfg = default_config()
    rng = np.random.default_rng([ORACLE_SEED, 2])
    Q = rng.uniform(0, 6, draws)
    head = rng.uniform(0.05, cfg.E_max, draws)
    gain = rng.exponential(1.0, draws) * 10 ** (-cfg.pathloss_db[0] / 10)
    W, noise, T0, p_max = cfg.bandwidth, cfg.noise, cfg.T0, cfg.p_max
    bad = interior = 0
    for i in range(draws):
        p = optimal_power(Q[i], head[i], W, gain[i], noise, T0, p_max)
        fp = pair_utility(Q[i], head[i], W, gain[i], noise, T0, p)
        fmax, _ = power_grid_max(Q[i], head[i], W, gain[i], noise, T0, p_max, step)
        interior += 0 < p < p_max
        # p* is continuous, so its value may not fall below any grid point
        if fp < fmax - 1e-12 * max(1.0, abs(fmax)):
            bad += 1
    return bad == 0, f"{draws - bad}/{draws} instances reach the grid maximum ({interior} interior)"


# --- 3: ADMM gap and iterations ----------------------------------------------

def rate_instances(count: int, rng, sizes=(5, 50, 500)):
    out = []
    while len(out) < count:
        n = sizes[len(out) % len(sizes)]
        Q = rng.uniform(0.5, 20.0, n)
        chi = rng.uniform(0.1, 0.3, n)
        prob = RateProblem.from_state(Q, chi, 100.0, 1.0, 20.0)
        free = rates_at_multiplier(prob.queue_weights, prob.utility_weights, 0.0)
        if free.sum() <= prob.R_max or free.sum() == 0:
            continue  # cap slack: nothing for the coupled solver to do
        out.append(prob)
    return out


@_timed(3, "ADMM optimality gap", 60.0)
def criterion_3(count: int = 1000, max_iterations: int = 50, gap_limit: float = 0.01):
    rng = np.random.default_rng([ORACLE_SEED, 3])
    worst_gap = 0.0
    worst_it = 0
    bad = 0
    for prob in rate_instances(count, rng):
        sol = solve_rates_admm(prob)
        ref = oracle_rates(prob)
        obj, ref_obj = prob.objective(sol.rates), prob.objective(ref)
        gap = abs(obj - ref_obj) / abs(ref_obj)
        worst_gap = max(worst_gap, gap)
        worst_it = max(worst_it, sol.iterations)
        if gap >= gap_limit or not sol.converged or sol.iterations > max_iterations:
            bad += 1
    return bad == 0, (f"{count - bad}/{count} within gap and iterations; worst gap "
                      f"{100 * worst_gap:.3f}%, most iterations {worst_it}")


# --- 4: matching --------------------------------------------------------------

def matching_instance(rng, N, K):
    """Pair values from the radio model with random backlogs, battery and fading."""
    cfg = default_config()
    Q = rng.uniform(0.0, 30.0, N)
    head = rng.uniform(0.0, cfg.E_max)
    gains = rng.exponential(1.0, (N, K)) * 10 ** (-cfg.pathloss_db[0] / 10)
    return evaluate_pairs(Q, head, gains, np.full(K, cfg.bandwidth), cfg.noise, cfg.T0,
                          cfg.p_max).utility


@_timed(4, "matching stability and near-optimality")
def criterion_4(count: int = 10_000, exhaustive: int = 2000):
    rng = np.random.default_rng([ORACLE_SEED, 4])
    unstable = 0
    for _ in range(count):
        N, K, q = int(rng.integers(2, 9)), int(rng.integers(2, 17)), int(rng.integers(1, 4))
        f = matching_instance(rng, N, K)
        m = match(f, q)
        m.check(q)
        unstable += bool(blocking_pairs(m, f, q))
    short = 0
    for _ in range(exhaustive):
        N, K, q = int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 3))
        f = matching_instance(rng, N, K)
        m = match(f, q)
        opt, _ = best_assignment(f, q)
        short += welfare(f, m.x) < opt - m.price_slack - 1e-9 * max(1.0, opt)
    ok = unstable == 0 and short == 0
    return ok, (f"{count - unstable}/{count} stable; {exhaustive - short}/{exhaustive} "
                f"exhaustive instances within price slack of the optimum")


# --- 5-9: simulations ------------------------------------------------------------

@_timed(5, "queue stability")
def criterion_5(slots: int = 1000):
    cfg = default_config()
    cfg = cfg.with_overrides(M=-(-slots // cfg.T))
    traj = run(cfg, "proposed", audit=True)  # audit raises on any C1-C9 violation
    Q = traj.Q_path[:slots]
    stat = Q[slots - 1] / slots
    peak = Q.max(axis=0)
    ok = bool(np.all(stat < 0.01 * peak))
    return ok, (f"max Q(t)/t at t={slots}: {stat.max():.4f} Mbit vs 1% of peak "
                f"{0.01 * peak.min():.4f}..{0.01 * peak.max():.4f}; audit clean")


@_timed(6, "drift bound")
def criterion_6(seeds: int = 20):
    frames = ok = 0
    for s in range(1, seeds + 1):
        flags = drift_bound_check(run(default_config(seed=s)))
        frames += flags.size
        ok += int(flags.sum())
    return ok == frames, f"{ok}/{frames} frames satisfy the bound over {seeds} seeds"


_RUNS: dict = {}


def _cached_run(controller, seed):
    key = (controller, seed)
    if key not in _RUNS:
        _RUNS[key] = run(default_config(seed=seed), controller)
    return _RUNS[key]


@_timed(7, "cost reduction vs baseline2")
def criterion_7(seeds: int = 10, min_cost_cut: float = 0.30, max_qoe_loss: float = 0.03):
    cost_p = cost_b = qoe_p = qoe_b = 0.0
    per_seed = []
    for s in range(1, seeds + 1):
        a, b = _cached_run("proposed", s), _cached_run("baseline2", s)
        ca, cb = a.energy_cost.sum(), b.energy_cost.sum()
        per_seed.append(1 - ca / cb)
        cost_p += ca
        cost_b += cb
        qoe_p += a.U.sum(axis=1).mean()
        qoe_b += b.U.sum(axis=1).mean()
    cut = 1 - cost_p / cost_b
    loss = 1 - qoe_p / qoe_b
    ok = cut >= min_cost_cut and min(per_seed) >= min_cost_cut and loss <= max_qoe_loss
    return ok, (f"cost -{100 * cut:.1f}% (per-seed min -{100 * min(per_seed):.1f}%), "
                f"QoE loss {100 * loss:.2f}%")


@_timed(8, "PAR reduction vs baseline1")
def criterion_8(seeds: int = 10, min_cut: float = 0.10):
    """PAR per device, averaged over devices and seeds."""
    qp, qb, rp, rb = [], [], [], []
    for s in range(1, seeds + 1):
        a, b = _cached_run("proposed", s), _cached_run("baseline1", s)
        qp.append(np.mean(par(a.Q)))
        qb.append(np.mean(par(b.Q)))
        rp.append(np.mean(par(a.r)))
        rb.append(np.mean(par(b.r)))
    cut_q = 1 - np.mean(qp) / np.mean(qb)
    cut_r = 1 - np.mean(rp) / np.mean(rb)
    ok = cut_q >= min_cut and cut_r >= min_cut
    return ok, f"backlog PAR -{100 * cut_q:.1f}%, arrival-rate PAR -{100 * cut_r:.1f}%"


@_timed(9, "V tradeoff trends")
def criterion_9(V_grid=(10, 100, 1000)):
    rows = tradeoff_sweep(default_config(), V_grid)
    backlog = [r.avg_backlog for r in rows]
    gap = [r.utility_gap for r in rows]
    ok = all(np.diff(backlog) >= 0) and all(np.diff(gap) <= 0)
    cells = ", ".join(f"V={r.V:g}: Q={r.avg_backlog:.3f} gap={r.utility_gap:.3f}" for r in rows)
    return ok, cells


# --- 10: determinism ----------------------------------------------------------------

@_timed(10, "determinism")
def criterion_10(config: str | None = None, seed: int = 7):
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        outs = [Path(tmp) / "a", Path(tmp) / "b"]
        for out in outs:
            args = ["run", "--controller", "proposed", "--seed", str(seed), "--out", str(out)]
            if config:
                args += ["--config", config]
            with contextlib.redirect_stdout(io.StringIO()):
                code = main(args)
            if code != 0:
                return False, "run exited nonzero"
        names = sorted(p.name for p in outs[0].iterdir())
        same = [filecmp.cmp(outs[0] / n, outs[1] / n, shallow=False) for n in names]
        return all(same) and len(names) >= 3, f"{sum(same)}/{len(names)} output files byte-identical"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 11)}


def run_all(which=None) -> list[CriterionResult]:
    _RUNS.clear()
    return [CRITERIA[i]() for i in (which or sorted(CRITERIA))]
