"""Command line entry point.

Exit codes: 0 converged and feasible, 1 usage error, 2 iteration cap hit,
3 infeasible.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bench_td, report, sca
from .scenario import ScenarioError, default_scenario, load_scenario, random_scenario

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MAX_ITER = 2
EXIT_INFEASIBLE = 3

PJ_SWEEP_MW = (0.1, 1.0, 10.0, 100.0)
N0_SWEEP = (10, 20, 40)
SPEED_SWEEP = (10.0, 20.0)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="coshf",
                description="Dual-UAV jamming-aided secure trajectory design")
    p.add_argument("--scenario", help="config document path")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for a randomly generated scenario")
    p.add_argument("--random-k", type=int, default=4,
                   help="user count for random scenarios")
    p.add_argument("--area", type=float, default=500.0,
                   help="square side for random scenarios, meters")
    p.add_argument("--mode", choices=("coshf", "td", "single"),
                   default="coshf")
    p.add_argument("--td-n0", type=int, default=20, help="TD slot count")
    p.add_argument("--eps", type=float, default=1e-3,
                   help="objective convergence threshold, bits/Hz")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--quad-order", type=int, default=8)
    p.add_argument("--no-round", action="store_true",
                   help="keep relaxed scheduling weights")
    p.add_argument("--sweep", choices=("pj", "n0", "speed"))
    p.add_argument("--out", default=None,
                   help="output directory (default $COSHF_OUT_DIR or ./coshf_out)")
    return p


def _load(args):
    if args.scenario:
        return load_scenario(args.scenario)
    if args.random_k == 4 and args.area == 500.0:
        return default_scenario(seed=args.seed)
    return random_scenario(seed=args.seed, K=args.random_k, area=args.area)


def _run_once(scenario, args):
    if args.mode == "td":
        cfg = bench_td.TdConfig(n0=args.td_n0, eps=args.eps,
                                max_outer=args.max_iter,
                                round_schedule=not args.no_round)
        return bench_td.run_td(scenario, cfg)
    cfg = sca.ScaConfig(eps=args.eps, max_outer=args.max_iter,
                        quad_order=args.quad_order,
                        round_schedule=not args.no_round)
    if args.mode == "single":
        return sca.run_single_uav(scenario, cfg)
    return sca.run(scenario, cfg)


def _exit_code(report_obj, scenario) -> int:
    if report_obj.status == "infeasible":
        return EXIT_INFEASIBLE
    aud = report_obj.audit or {}
    feasible = (aud.get("max_speed_violation", 0.0) <= 1e-6
                and aud.get("min_pair_distance", np.inf)
                >= scenario.d_min - 1e-3
                and aud.get("time_budget_slack", 0.0) >= -1e-6 * scenario.T)
    if report_obj.converged and feasible:
        return EXIT_OK
    return EXIT_MAX_ITER


def _sweep(scenario, args, out_dir):
    rows = []
    worst = EXIT_OK
    if args.sweep == "pj":
        values = [(f"{v:g}mW", scenario.with_(P_J=v * 1e-3)) for v in PJ_SWEEP_MW]
        param = "P_J_mW"
        raw = PJ_SWEEP_MW
    elif args.sweep == "n0":
        values = [(str(v), scenario) for v in N0_SWEEP]
        param = "N0"
        raw = N0_SWEEP
    else:
        values = [(f"{v:g}", scenario.with_(V=v)) for v in SPEED_SWEEP]
        param = "V_mps"
        raw = SPEED_SWEEP
    for value, (label, sc) in zip(raw, values):
        sweep_args = argparse.Namespace(**vars(args))
        if args.sweep == "n0":
            sweep_args.mode = "td"
            sweep_args.td_n0 = int(value)
        _, rep = _run_once(sc, sweep_args)
        code = _exit_code(rep, sc)
        worst = max(worst, code)
        rows.append((param, float(value), rep.objective, rep.iters,
                     rep.wallclock["total"], rep.status,
                     int(code in (EXIT_OK, EXIT_MAX_ITER))))
    report.write_sweep(out_dir, args.sweep, rows)
    return worst


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.td_n0 < 2:
        sys.stderr.write("error: N0 must be at least 2\n")
        return EXIT_USAGE
    if args.eps <= 0 or args.max_iter < 1 or args.quad_order < 1:
        sys.stderr.write("error: eps, max-iter and quad-order must be positive\n")
        return EXIT_USAGE
    try:
        scenario = _load(args)
    except (ScenarioError, FileNotFoundError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE

    out_dir = args.out or report.default_out_dir()
    try:
        if args.sweep:
            code = _sweep(scenario, args, out_dir)
            print(f"sweep '{args.sweep}' written to {out_dir}")
            return code
        solution, rep = _run_once(scenario, args)
    except (sca.InitializationError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INFEASIBLE

    config = {"mode": args.mode, "eps": args.eps, "max_iter": args.max_iter,
              "quad_order": args.quad_order, "td_n0": args.td_n0,
              "seed": args.seed, "round_schedule": not args.no_round}
    report.export(out_dir, scenario, rep.to_dict(), solution, config=config)
    print(f"mode={rep.mode} status={rep.status} "
          f"objective={rep.objective:.6f} bits/Hz iters={rep.iters} "
          f"out={out_dir}")
    return _exit_code(rep, scenario)


if __name__ == "__main__":
    sys.exit(main())
