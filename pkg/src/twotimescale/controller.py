"""End-to-end simulation: energy management once per frame, then rate control,
channel matching and queue updates every slot.

A run returns a :class:`Trajectory` holding per-slot and per-frame arrays.
Every slot is re-audited against the model constraints independently of the
modules that produced the decisions; a violation raises
:class:`~twotimescale.queues.ContractError` naming the slot and constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clock import Clock, price_phase, random_channels_rng, sample_env
from .config import CONTROLLERS, JOULES_PER_KWH, SimConfig
from .energy import schedule_energy
from .matching import (enforce_energy_causality, evaluate_pairs, check_c12, link_rate,
                       match, random_assignment)
from .queues import ContractError, EnergyQueue, lindley_step
from .rates import RateProblem, oracle_rates, solve_rates_admm

ALIASES = {
    "baseline1_random_channels": "baseline1",
    "baseline2_no_cost": "baseline2",
    "baseline3_oracle_rates": "baseline3",
}


def controller_kind(name: str) -> str:
    kind = ALIASES.get(name, name)
    if kind not in CONTROLLERS:
        raise ValueError(f"unknown controller {name!r}; expected one of {CONTROLLERS}")
    return kind


@dataclass
class Trajectory:
    """Recorded run. Slot arrays have length ``M*T``; frame arrays length ``M``.

    ``Q`` and ``E`` are the states at the start of each slot; ``Q_end`` and
    ``E_end`` the state after the last slot.
    """
    config: SimConfig
    controller: str
    beta: float  # weight actually used by the controller
    Q: np.ndarray  # (S, N) Mbit
    r: np.ndarray  # (S, N) Mbit/s
    v: np.ndarray  # (S, N) Mbit/s
    U: np.ndarray  # (S, N)
    E: np.ndarray  # (S,) J
    g: np.ndarray  # (S,) J
    theta: np.ndarray  # (S,) J
    p_c: np.ndarray  # (S,) J
    eta: np.ndarray  # (S,) RMB/J
    kappa: np.ndarray  # (S,) RMB/J
    f: np.ndarray  # (S,) per-slot objective
    energy_cost: np.ndarray  # (S,) RMB
    c12: np.ndarray  # (S, N) bool
    admm_iterations: np.ndarray
    residual_pri: np.ndarray
    residual_dual: np.ndarray
    admm_converged: np.ndarray
    rate_repaired: np.ndarray
    match_rounds: np.ndarray
    price_slack: np.ndarray
    power_scaled: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    frame_E: np.ndarray  # (M,) J at the frame boundary
    frame_phi: np.ndarray
    frame_g: np.ndarray  # frame decision
    frame_theta: np.ndarray
    frame_psi: np.ndarray
    frame_d1: np.ndarray
    Q_end: np.ndarray
    E_end: float
    v_max: float  # largest top-q rate at full power seen in any slot

    @property
    def slots(self) -> int:
        return self.E.size

    @property
    def frames(self) -> int:
        return self.frame_E.size

    @property
    def tau(self) -> np.ndarray:
        return np.arange(1, self.slots + 1)

    @property
    def Q_path(self) -> np.ndarray:
        """Backlogs at tau = 1 .. S+1."""
        return np.vstack([self.Q, self.Q_end[None, :]])

    @property
    def E_path(self) -> np.ndarray:
        return np.append(self.E, self.E_end)


@dataclass
class _Recorder:
    S: int
    N: int
    M: int
    cols: dict = field(default_factory=dict)

    def __post_init__(self):
        vec = ("E", "g", "theta", "p_c", "eta", "kappa", "f", "energy_cost", "residual_pri",
               "residual_dual", "price_slack", "d2", "d3")
        for name in vec:
            self.cols[name] = np.zeros(self.S)
        for name in ("admm_iterations", "match_rounds"):
            self.cols[name] = np.zeros(self.S, dtype=np.int64)
        for name in ("admm_converged", "rate_repaired", "power_scaled"):
            self.cols[name] = np.zeros(self.S, dtype=bool)
        for name in ("Q", "r", "v", "U"):
            self.cols[name] = np.zeros((self.S, self.N))
        self.cols["c12"] = np.zeros((self.S, self.N), dtype=bool)
        for name in ("E", "phi", "g", "theta", "psi", "d1"):
            self.cols["frame_" + name] = np.zeros(self.M)


def audit_slot(tau: int, cfg: SimConfig, *, E: float, g: float, theta: float, phi: float,
               x: np.ndarray, p: np.ndarray, r: np.ndarray, tol: float = 1e-9) -> None:
    """Re-check one slot's decisions against C1-C9; raise on the first violation."""
    def fail(c, msg):
        raise ContractError(f"slot {tau}: {c} violated: {msg}")

    if not -tol <= g <= cfg.g_max + tol:
        fail("C1", f"g={g} outside [0, {cfg.g_max}]")
    if not -tol <= theta <= phi + tol:
        fail("C2", f"theta={theta} outside [0, {phi}]")
    if E + g + theta > cfg.E_max + tol:
        fail("C3", f"E+g+theta={E + g + theta} > E_max={cfg.E_max}")
    if float(np.sum(p * x)) * cfg.T0 > E + tol:
        fail("C4", f"consumed {float(np.sum(p * x)) * cfg.T0} J > available {E} J")
    if np.any(p < -tol) or np.any(p > cfg.p_max + tol):
        fail("C5", "power outside [0, p_max]")
    if not np.all((x == 0) | (x == 1)):
        fail("C6", "non-binary channel indicator")
    if np.any(x.sum(axis=1) > cfg.q):
        fail("C7", f"device quota {cfg.q} exceeded")
    if np.any(x.sum(axis=0) > 1):
        fail("C8", "channel shared by several devices")
    if np.any(r < -tol) or r.sum() > cfg.R_max * (1 + tol) + tol:
        fail("C9", f"sum rate {r.sum()} > R_max={cfg.R_max}")


def run(cfg: SimConfig, controller: str = "proposed", audit: bool = True) -> Trajectory:
    """Simulate ``cfg.M`` frames of ``cfg.T`` slots under one controller."""
    kind = controller_kind(controller)
    cfg.validate()
    N, K, T, M, T0 = cfg.N, cfg.K, cfg.T, cfg.M, cfg.T0
    beta = 0.0 if kind == "baseline2" else cfg.beta
    chi = np.asarray(cfg.chi_vector())
    S = M * T
    rec = _Recorder(S, N, M)
    c = rec.cols
    phase = price_phase(cfg)

    Q = np.full(N, float(cfg.Q_init))
    battery = EnergyQueue(float(cfg.E_init), float(cfg.E_max))
    clock = Clock.start(cfg)
    g_star = theta_star = 0.0
    v_max = 0.0
    for i in range(S):
        tau = clock.tau
        env = sample_env(clock, cfg, phase)
        E = battery.backlog
        headroom = battery.headroom
        eta, kappa = env.grid_price, env.harvest_price

        # energy management, once per frame
        if clock.frame_boundary:
            m = clock.frame - 1
            dec = schedule_energy(E, env.eh_cap, eta, cfg.g_max, cfg.E_max, cfg.V, T, beta,
                                  kappa=kappa)
            g_star, theta_star = dec.purchased, dec.harvested
            c["frame_E"][m] = E
            c["frame_phi"][m] = env.eh_cap
            c["frame_g"][m] = g_star
            c["frame_theta"][m] = theta_star
            c["frame_psi"][m] = dec.psi
            c["frame_d1"][m] = (cfg.V * T * beta * (eta * g_star + kappa * theta_star)
                                - headroom * (g_star + theta_star))
        theta = min(theta_star, headroom)
        g = min(g_star, headroom - theta)

        # rate control
        problem = RateProblem.from_state(Q, chi, cfg.V, T0, cfg.R_max, split=cfg.block_split,
                                         rho=cfg.rho, eps_pri=cfg.eps_pri, eps_dual=cfg.eps_dual,
                                         max_iter=cfg.admm_max_iter)
        if kind == "baseline3":
            r = oracle_rates(problem)
            c["admm_converged"][i] = True
        else:
            sol = solve_rates_admm(problem)
            r = np.maximum(sol.rates, 0.0)
            c["admm_iterations"][i] = sol.iterations
            c["admm_converged"][i] = sol.converged
            c["residual_pri"][i] = sol.residual_pri
            c["residual_dual"][i] = sol.residual_dual
        if r.sum() > cfg.R_max:
            # last iterate of an unconverged solve may overshoot by the residual
            r = r * (cfg.R_max / r.sum())
            c["rate_repaired"][i] = True

        # channel selection and power allocation
        pairs = evaluate_pairs(Q, headroom, env.gains, env.bandwidth, cfg.noise, T0, cfg.p_max)
        if kind == "baseline1":
            mt = random_assignment(N, K, cfg.q, random_channels_rng(cfg, tau))
        else:
            mt = match(pairs.utility, cfg.q, cfg.delta_lambda or None, cfg.delta_lambda_frac)
            c["match_rounds"][i] = mt.rounds
            c["price_slack"][i] = mt.price_slack
        x = mt.x
        p, scaled = enforce_energy_causality(pairs.power * x, E, T0)
        c["power_scaled"][i] = scaled
        link = link_rate(env.bandwidth[None, :], env.gains, cfg.noise, p) * x
        v = link.sum(axis=1)
        p_c = float(p.sum()) * T0

        full = link_rate(env.bandwidth[None, :], env.gains, cfg.noise, cfg.p_max)
        v_max = max(v_max, float(np.max(np.sort(full, axis=1)[:, -cfg.q:].sum(axis=1))))

        if audit:
            audit_slot(tau, cfg, E=E, g=g, theta=theta, phi=env.eh_cap, x=x, p=p, r=r)

        U = chi * np.log2(1.0 + r)
        cost = eta * g + kappa * theta
        c["Q"][i], c["r"][i], c["v"][i], c["U"][i] = Q, r, v, U
        c["E"][i], c["g"][i], c["theta"][i], c["p_c"][i] = E, g, theta, p_c
        c["eta"][i], c["kappa"][i] = eta, kappa
        c["energy_cost"][i] = cost
        c["f"][i] = U.sum() - beta * cost
        c["c12"][i] = check_c12(v, r, cfg.d_star)
        c["d2"][i] = float(np.sum(Q * r * T0) - cfg.V * U.sum())
        c["d3"][i] = float(np.sum(Q * v * T0) - headroom * p_c)

        # queue updates
        Q = lindley_step(Q, r, v, T0, cfg.storage_cap)
        battery.update(p_c, g, theta)
        if not clock.at_end:
            clock = clock.advance()

    return Trajectory(config=cfg, controller=kind, beta=beta, Q_end=Q, E_end=battery.backlog,
                      v_max=v_max, **c)


# --- analysis ---------------------------------------------------------------

def compute_B(N: int, r_max: float, v_max: float, T0: float, E_max: float, g_max: float,
              theta_max: float) -> float:
    return N * (r_max ** 2 + v_max ** 2) * T0 ** 2 + E_max ** 2 + (g_max + theta_max) ** 2


def drift_bound_check(traj: Trajectory, rtol: float = 1e-9) -> np.ndarray:
    """Per-frame check that realised drift-minus-utility stays under its bound.

    Left side: change of ``L = (sum Q^2 + headroom^2) / 2`` over the frame
    minus ``V`` times the summed per-slot objective. Right side: the constant
    term plus the frame energy term plus the per-slot rate and matching terms.
    ``r_max = R_max``, ``theta_max = phi_max``; ``v_max`` is the largest
    full-power rate seen in the run, since fading gains are unbounded.
    """
    cfg = traj.config
    T = cfg.T
    B = compute_B(cfg.N, cfg.R_max, traj.v_max, cfg.T0, cfg.E_max, cfg.g_max, cfg.phi_max)
    const = 0.5 * (B + (T - 1) / 2 * (cfg.g_max + cfg.phi_max) ** 2) * T
    Qp = traj.Q_path
    headroom = cfg.E_max - traj.E_path
    L = 0.5 * (np.sum(Qp ** 2, axis=1) + headroom ** 2)
    ok = np.zeros(traj.frames, dtype=bool)
    for m in range(traj.frames):
        a, b = m * T, (m + 1) * T
        lhs = L[b] - L[a] - cfg.V * traj.f[a:b].sum()
        rhs = const + traj.frame_d1[m] + np.sum(traj.d2[a:b] - traj.d3[a:b])
        ok[m] = lhs <= rhs + rtol * max(1.0, abs(rhs), abs(lhs))
    return ok


@dataclass(frozen=True)
class TradeoffRow:
    V: float
    avg_backlog: float  # Mbit, time and device average
    avg_utility: float  # time-average per-slot objective
    utility_gap: float  # best observed average utility minus this one


def tradeoff_sweep(cfg: SimConfig, V_grid, controller: str = "proposed") -> list[TradeoffRow]:
    """Run the same scenario (same seed) for each ``V``."""
    V_grid = [float(v) for v in V_grid]
    if len(V_grid) < 3:
        raise ValueError("tradeoff sweep needs at least three values of V")
    out = []
    for V in V_grid:
        traj = run(cfg.with_overrides(V=V), controller)
        out.append((V, float(traj.Q.mean()), float(traj.f.mean())))
    best = max(u for _, _, u in out)
    return [TradeoffRow(V, b, u, best - u) for V, b, u in out]


def horizon_for_slots(cfg: SimConfig, slots: int) -> SimConfig:
    """Config whose horizon covers ``slots`` slots (rounded up to whole frames)."""
    if slots < 1:
        raise ValueError("slots must be positive")
    return cfg.with_overrides(M=math.ceil(slots / cfg.T))


def price_kwh(traj: Trajectory) -> np.ndarray:
    return traj.eta * JOULES_PER_KWH
