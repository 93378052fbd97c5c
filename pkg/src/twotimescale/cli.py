"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 contract violation,
3 acceptance failure (``check`` only).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import CONTROLLERS, ConfigError, SimConfig, load_config, parse_config, default_config
from .controller import controller_kind, drift_bound_check, horizon_for_slots, run, tradeoff_sweep
from .metrics import (compare_summaries, read_summary, summarize, write_frame_csv, write_slot_csv,
                      write_summary, write_table)
from .queues import ContractError

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT, EXIT_ACCEPTANCE = 0, 1, 2, 3


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in _float_list(text)]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twotimescale",
                                description="Two-timescale energy/rate/channel control simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario(sp):
        sp.add_argument("--config", help="scenario file (default: built-in default preset)")
        sp.add_argument("--seed", type=int, help="override sim.seed")
        sp.add_argument("--slots", type=int, help="horizon in slots (rounded up to whole frames)")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config entry; repeatable")

    sp = sub.add_parser("run", help="simulate one controller")
    scenario(sp)
    sp.add_argument("--controller", default="proposed", help=f"one of {', '.join(CONTROLLERS)}")
    sp.add_argument("--out", default="runs/run", help="output directory")

    sp = sub.add_parser("sweep", help="run a grid of V values, seeds and controllers")
    scenario(sp)
    sp.add_argument("--controller", action="append", help="repeatable; default proposed")
    sp.add_argument("--v-grid", type=_float_list, help="comma-separated V values")
    sp.add_argument("--seeds", type=_int_list, help="comma-separated seeds")
    sp.add_argument("--out", default="runs/sweep", help="output directory")

    sp = sub.add_parser("compare", help="relative deltas of run A against reference run B")
    sp.add_argument("a", help="summary.json path, run directory, or controller name")
    sp.add_argument("b", help="reference: summary.json path, run directory, or controller name")
    scenario(sp)

    sp = sub.add_parser("check", help="run the acceptance suite")
    sp.add_argument("--criteria", type=_int_list, help="subset, e.g. 1,2,3")
    return p


def scenario_config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.set:
        text = "\n".join(args.set)
        cfg = parse_config(text, source="--set", base=cfg)
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    if args.slots is not None:
        cfg = horizon_for_slots(cfg, args.slots)
    return cfg


def execute(cfg: SimConfig, controller: str, out: Path) -> dict:
    traj = run(cfg, controller)
    ok = drift_bound_check(traj)
    out.mkdir(parents=True, exist_ok=True)
    write_slot_csv(traj, out / "slots.csv")
    write_frame_csv(traj, out / "frames.csv", ok)
    summary = summarize(traj, ok)
    write_summary(summary, out / "summary.json")
    (out / "config.cfg").write_text(cfg.to_text())
    return summary


def cmd_run(args) -> int:
    cfg = scenario_config(args)
    kind = controller_kind(args.controller)
    s = execute(cfg, kind, Path(args.out))
    print(f"{kind}: {s['slots']} slots, cost {s['total_cost_rmb']:.6g} RMB, "
          f"QoE {s['qoe_mean']:.4f}, backlog PAR {s['backlog_par_mean']:.3f} -> {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = scenario_config(args)
    controllers = [controller_kind(c) for c in (args.controller or ["proposed"])]
    V_grid = args.v_grid or [base.V]
    seeds = args.seeds or [base.seed]
    out = Path(args.out)
    rows = []
    for kind in controllers:
        for seed in seeds:
            for V in V_grid:
                cfg = base.with_overrides(V=V, seed=seed)
                s = execute(cfg, kind, out / f"{kind}_V{V:g}_s{seed}")
                rows.append([kind, seed, V, sum(s["backlog_mean_mbit"]) / cfg.N,
                             s["objective_mean"], s["qoe_mean"], s["total_cost_rmb"]])
                print(f"{kind} seed={seed} V={V:g}: backlog {rows[-1][3]:.3f} Mbit, "
                      f"objective {rows[-1][4]:.4f}")
    write_table(rows, out / "sweep.csv", ["controller", "seed", "V", "avg_backlog [Mbit]",
                                          "avg_objective [-]", "avg_qoe [-]", "total_cost [RMB]"])
    return EXIT_OK


def _resolve_summary(ref: str, args) -> dict:
    path = Path(ref)
    if path.is_dir():
        path = path / "summary.json"
    if path.is_file():
        return read_summary(path)
    if ref in CONTROLLERS or ref.startswith("baseline"):
        return summarize(run(scenario_config(args), controller_kind(ref)))
    raise FileNotFoundError(f"{ref!r} is neither a summary file nor a controller name")


def cmd_compare(args) -> int:
    a, b = _resolve_summary(args.a, args), _resolve_summary(args.b, args)
    d = compare_summaries(a, b)
    print(f"{d['controllers'][0]} vs {d['controllers'][1]}:")
    print(f"  energy cost reduction     {d['cost_reduction_pct']:8.2f} %")
    print(f"  backlog PAR reduction     {d['backlog_par_reduction_pct']:8.2f} %")
    print(f"  arrival-rate PAR reduction{d['arrival_par_reduction_pct']:8.2f} %")
    print(f"  QoE change                {d['qoe_delta_pct']:8.2f} %")
    return EXIT_OK


def cmd_check(args) -> int:
    from .acceptance import run_all

    results = run_all(args.criteria)
    for r in results:
        print(r.line(), flush=True)
    return EXIT_OK if all(r.passed and r.in_time for r in results) else EXIT_ACCEPTANCE


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "compare": cmd_compare, "check": cmd_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
