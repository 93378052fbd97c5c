"""Per-slot records, aggregate statistics and on-disk formats.

Time series go to CSV with the unit in every column header; scalar results
go to a JSON summary. Both carry ``SCHEMA_VERSION``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .config import JOULES_PER_KWH

SCHEMA_VERSION = 1


def qoe(r, chi):
    """Quality of experience ``chi * log2(1 + r)`` with r in Mbit/s."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("rates must be nonnegative")
    u = np.asarray(chi, dtype=float) * np.log2(1.0 + r)
    return float(u) if u.ndim == 0 else u


def shannon_rate(x, p, h, W, noise):
    """Service rate of one device over its assigned channels (Mbit/s for W in MHz)."""
    x, p, h = (np.asarray(a, dtype=float) for a in (x, p, h))
    return float(np.sum(x * np.asarray(W, float) * np.log2(1.0 + p * h / noise)))


def _nonempty(series) -> np.ndarray:
    s = np.asarray(series, dtype=float)
    if s.size == 0 or s.shape[0] == 0:
        raise ValueError("empty series")
    return s


def par(series, axis=0):
    """Peak-to-average ratio along ``axis`` (per column for 2-D input)."""
    s = _nonempty(series)
    if np.any(s < 0):
        raise ValueError("PAR needs a nonnegative series")
    mean = s.mean(axis=axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(mean > 0, s.max(axis=axis) / np.where(mean > 0, mean, 1.0), 1.0)
    return float(out) if np.ndim(out) == 0 else out


def cdf(series, grid) -> np.ndarray:
    """Empirical ``P(X <= g)`` at each grid point."""
    s = np.sort(_nonempty(series).ravel())
    return np.searchsorted(s, np.asarray(grid, dtype=float), side="right") / s.size


def time_avg_std(series, axis=0):
    s = _nonempty(series)
    return s.mean(axis=axis), s.std(axis=axis)


def cumulative_cost(records) -> float:
    """Total energy bill in RMB: sum of ``eta*g + kappa*theta`` over slots."""
    if isinstance(getattr(records, "eta", None), np.ndarray):  # a whole trajectory
        return float(np.sum(records.eta * records.g + records.kappa * records.theta))
    return float(sum(rec.eta * rec.g + rec.kappa * rec.theta for rec in records))


@dataclass(frozen=True)
class MetricsRecord:
    tau: int
    frame: int
    Q: tuple  # Mbit
    r: tuple  # Mbit/s
    v: tuple  # Mbit/s
    U: tuple
    E: float  # J
    g: float  # J
    theta: float  # J
    eta: float  # RMB/J
    kappa: float  # RMB/J
    f: float
    energy_cost: float  # RMB
    c12: tuple
    admm_iterations: int
    residual_pri: float
    residual_dual: float


def records(traj) -> Iterator[MetricsRecord]:
    T = traj.config.T
    for i in range(traj.slots):
        yield MetricsRecord(
            tau=i + 1, frame=i // T + 1,
            Q=tuple(traj.Q[i]), r=tuple(traj.r[i]), v=tuple(traj.v[i]), U=tuple(traj.U[i]),
            E=float(traj.E[i]), g=float(traj.g[i]), theta=float(traj.theta[i]),
            eta=float(traj.eta[i]), kappa=float(traj.kappa[i]), f=float(traj.f[i]),
            energy_cost=float(traj.energy_cost[i]), c12=tuple(bool(b) for b in traj.c12[i]),
            admm_iterations=int(traj.admm_iterations[i]),
            residual_pri=float(traj.residual_pri[i]), residual_dual=float(traj.residual_dual[i]))


# --- aggregates ---------------------------------------------------------------

def summarize(traj, drift_ok=None) -> dict:
    """Scalar aggregates of one run (JSON-ready, plain Python types)."""
    cfg = traj.config
    total_u = traj.U.sum(axis=1)
    qoe_mean, qoe_std = time_avg_std(total_u)
    backlog_mean, backlog_std = time_avg_std(traj.Q)
    out = {
        "schema_version": SCHEMA_VERSION,
        "controller": traj.controller,
        "seed": cfg.seed,
        "slots": traj.slots,
        "frames": traj.frames,
        "config": cfg.as_dict(),
        "total_cost_rmb": cumulative_cost(traj),
        "grid_energy_j": float(traj.g.sum()),
        "harvested_energy_j": float(traj.theta.sum()),
        "qoe_mean": float(qoe_mean),
        "qoe_std": float(qoe_std),
        "objective_mean": float(traj.f.mean()),
        "backlog_mean_mbit": [float(x) for x in backlog_mean],
        "backlog_std_mbit": [float(x) for x in backlog_std],
        "backlog_par": [float(x) for x in par(traj.Q)],
        "arrival_par": [float(x) for x in par(traj.r)],
        "backlog_par_mean": float(np.mean(par(traj.Q))),
        "arrival_par_mean": float(np.mean(par(traj.r))),
        "stability_stat": [float(x) for x in traj.Q_end / (traj.slots + 1)],
        "c12_met_fraction": float(traj.c12.mean()),
        "power_scaled_fraction": float(traj.power_scaled.mean()),
        "admm_iterations_mean": float(traj.admm_iterations.mean()),
        "admm_iterations_max": int(traj.admm_iterations.max(initial=0)),
        "admm_converged_fraction": float(traj.admm_converged.mean()),
        "v_max_mbps": float(traj.v_max),
    }
    if drift_ok is not None:
        out["drift_bound_fraction"] = float(np.mean(drift_ok))
    return out


def compare_summaries(a: dict, b: dict) -> dict:
    """Relative improvements of run ``a`` over reference run ``b``, in percent."""
    def reduction(x, y):
        return 100.0 * (1.0 - x / y) if y else 0.0

    return {
        "controllers": [a["controller"], b["controller"]],
        "cost_reduction_pct": reduction(a["total_cost_rmb"], b["total_cost_rmb"]),
        "backlog_par_reduction_pct": reduction(a["backlog_par_mean"], b["backlog_par_mean"]),
        "arrival_par_reduction_pct": reduction(a["arrival_par_mean"], b["arrival_par_mean"]),
        "qoe_delta_pct": -reduction(a["qoe_mean"], b["qoe_mean"]),
    }


# --- files ----------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def slot_columns(N: int) -> list[str]:
    cols = ["tau", "frame"]
    for name, unit in (("Q", "Mbit"), ("r", "Mbit/s"), ("v", "Mbit/s"), ("U", "-")):
        cols += [f"{name}_{n + 1} [{unit}]" for n in range(N)]
    cols += ["E [J]", "g [J]", "theta [J]", "p_c [J]", "eta [RMB/kWh]", "kappa [RMB/kWh]",
             "f [-]", "energy_cost [RMB]", "cumulative_cost [RMB]"]
    cols += [f"c12_{n + 1} [flag]" for n in range(N)]
    cols += ["admm_iterations [-]", "residual_pri [Mbit/s]", "residual_dual [Mbit/s]",
             "match_rounds [-]", "price_slack [-]", "power_scaled [flag]"]
    return cols


def write_slot_csv(traj, path: str | Path) -> None:
    cum = np.cumsum(traj.energy_cost)
    T = traj.config.T
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"# schema_version={SCHEMA_VERSION}"])
        w.writerow(slot_columns(traj.config.N))
        for i in range(traj.slots):
            row = [i + 1, i // T + 1, *traj.Q[i], *traj.r[i], *traj.v[i], *traj.U[i],
                   traj.E[i], traj.g[i], traj.theta[i], traj.p_c[i],
                   traj.eta[i] * JOULES_PER_KWH, traj.kappa[i] * JOULES_PER_KWH,
                   traj.f[i], traj.energy_cost[i], cum[i], *traj.c12[i],
                   traj.admm_iterations[i], traj.residual_pri[i], traj.residual_dual[i],
                   traj.match_rounds[i], traj.price_slack[i], traj.power_scaled[i]]
            w.writerow([_fmt(x) for x in row])


FRAME_COLUMNS = ["frame", "E_start [J]", "phi [J]", "g [J]", "theta [J]", "psi [J]",
                 "eta [RMB/kWh]", "frame_cost [RMB]", "drift_bound_ok [flag]"]


def write_frame_csv(traj, path: str | Path, drift_ok=None) -> None:
    T = traj.config.T
    cost = traj.energy_cost.reshape(traj.frames, T).sum(axis=1)
    eta = traj.eta[::T] * JOULES_PER_KWH
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"# schema_version={SCHEMA_VERSION}"])
        w.writerow(FRAME_COLUMNS)
        for m in range(traj.frames):
            ok = True if drift_ok is None else bool(drift_ok[m])
            row = [m + 1, traj.frame_E[m], traj.frame_phi[m], traj.frame_g[m],
                   traj.frame_theta[m], traj.frame_psi[m], eta[m], cost[m], ok]
            w.writerow([_fmt(x) for x in row])


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], np.array(rows[1:], dtype=float)


def write_summary(summary: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def read_summary(path: str | Path) -> dict:
    data = json.loads(Path(path).read_text())
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported summary schema {version!r}")
    return data


def write_table(rows: Iterable, path: str | Path, header: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) if not isinstance(x, str) else x for x in row])
