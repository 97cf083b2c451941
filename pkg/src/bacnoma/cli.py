"""Command-line front end.

Human-readable summaries go to stdout; machine output (CSV/JSON) only to
the path given with ``--out``.  Exit codes: 0 success, 1 infeasible solve
or failed check, 2 usage/configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from . import harness
from .allocator import grid_oracle, grid_slack, qos_attainable, solve_optimal
from .model import ConfigError, ScenarioConfig, downlink_rate, rate_report, sample_channels, watts_to_dbm


class UsageError(Exception):
    pass


def _int_auto(s: str) -> int:
    return int(s, 0)


def _schemes(s: str) -> tuple[str, ...]:
    out = tuple(x.strip() for x in s.split(",") if x.strip())
    bad = [x for x in out if x not in harness.SCHEMES]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"unknown scheme(s) {bad}; choose from {','.join(harness.SCHEMES)}")
    return out


def _floats(s: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON scenario file")
    common.add_argument("--out", help="write machine-readable output here")
    common.add_argument("--trials", type=int, help="Monte Carlo trials per sweep point")
    common.add_argument("--seed", type=_int_auto, default=harness.DEFAULT_SEED, help="master seed (default %(default)#x)")
    common.add_argument("--scheme", type=_schemes, default=harness.SCHEMES, help="comma-separated scheme list")
    common.add_argument("--steps", type=int, help="grid resolution for exhaustive search")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--quiet", action="store_true", help="suppress the stdout summary")

    p = argparse.ArgumentParser(prog="bacnoma", description="BAC-NOMA resource allocation tools")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("solve", parents=[common], help="optimal allocation for one scenario file")
    sub.add_parser("fig3", parents=[common], help="deterministic two-device study")
    sm = sub.add_parser("sweep-m", parents=[common], help="average sum rate versus device count")
    sm.add_argument("--values", type=_floats, help="device counts (default 2..8)")
    sm.add_argument("--r0", type=float, default=1.0, help="downlink target rate in BPCU")
    sm.add_argument("--alpha", type=float, default=0.01)
    sa = sub.add_parser("sweep-alpha", parents=[common], help="average sum rate versus self-interference")
    sa.add_argument("--values", type=_floats, help="alpha values")
    sa.add_argument("--r0", type=float, default=3.0)
    sa.add_argument("--devices", type=int, default=4, help="device count M")
    sub.add_parser("oracle-check", parents=[common], help="LP versus grid search on random two-device draws")
    sub.add_parser("selftest", parents=[common], help="quick property checks")
    return p


def _say(args, *lines):
    if not args.quiet:
        for line in lines:
            print(line)


def cmd_solve(args) -> int:
    if not args.config:
        raise UsageError("solve needs --config")
    cfg = ScenarioConfig.load(args.config)
    ch = sample_channels(cfg, np.random.default_rng(cfg.seed))
    params = cfg.params
    if not qos_attainable(ch, params):
        print(
            "infeasible: downlink QoS constraint cannot be met even with every eta = 0 "
            f"(p_max*|h0|^2 = {params.p_max * ch.h0_sq:.4g} W < eps0*sigma2 = {params.eps0 * params.sigma2:.4g} W)",
            file=sys.stderr,
        )
        return 1
    res = solve_optimal(ch, params)
    if not res.feasible:
        print("infeasible: downlink QoS constraint cannot be met within the power budget", file=sys.stderr)
        return 1
    rep = rate_report(ch, res.allocation, params.alpha, params.sigma2)
    _say(
        args,
        f"P0          = {res.p0:.6g} W ({watts_to_dbm(res.p0):.2f} dBm)" if res.p0 > 0 else "P0 = 0",
        "eta         = " + ", ".join(f"{e:.6f}" for e in res.eta),
        f"avg rate    = {rep.avg_sum_rate:.6f} BPCU",
        f"downlink    = {rep.downlink_rate:.6f} BPCU (target {params.r0:g})",
    )
    if args.out:
        with open(args.out, "w") as fh:
            json.dump({"scenario": cfg.to_dict(), "result": res.to_dict(), "rates": vars(rep)}, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_two_device(args) -> int:
    cfg = ScenarioConfig.load(args.config) if args.config else None
    rep = harness.run_deterministic_study(cfg, steps=args.steps or 1000)
    _say(
        args,
        f"LP:          P0 = {rep.lp.p0:.6g} W, eta = ({rep.lp.eta[0]:.6f}, {rep.lp.eta[1]:.6f}), rate = {rep.rate_lp:.9f} BPCU",
        f"closed form: eta = ({rep.closed_form.eta[0]:.6f}, {rep.closed_form.eta[1]:.6f}), rate = {rep.rate_closed_form:.9f} BPCU",
        f"grid @ LP P0:     eta = ({rep.grid_at_lp_p0.eta[0]:.3f}, {rep.grid_at_lp_p0.eta[1]:.3f}), rate = {rep.grid_at_lp_p0.p_star:.9f} BPCU",
        f"grid @ P0={harness.REPORTED_P0}: eta = ({rep.grid_at_reported_p0.eta[0]:.3f}, {rep.grid_at_reported_p0.eta[1]:.3f}), rate = {rep.grid_at_reported_p0.p_star:.9f} BPCU",
        f"rate at P0={harness.REPORTED_P0} with LP eta: {rep.rate_at_reported_p0:.9f} BPCU (relative difference {rep.p0_flatness:.2e})",
        f"oracle gap: {rep.rate_lp - rep.grid_at_lp_p0.p_star:.3e} BPCU (slack bound {rep.grid_slack:.3e})",
    )
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rep.to_dict(), fh, indent=2)
            fh.write("\n")
    return 0


def _cmd_sweep(args, kind: str) -> int:
    overrides = {}
    if args.values:
        overrides["values"] = args.values
    if kind == "M":
        overrides.update(r0=args.r0, alpha=args.alpha)
    else:
        overrides.update(r0=args.r0, M=args.devices)
    spec = harness.default_sweep_spec(kind, trials=args.trials or harness.DEFAULT_TRIALS, seed=args.seed, **overrides)
    if args.config:
        base = ScenarioConfig.load(args.config)
        spec = harness.ExperimentSpec(base, kind, spec.values, spec.trials, spec.schemes, spec.master_seed)
    spec = harness.ExperimentSpec(spec.base, spec.sweep, spec.values, spec.trials, args.scheme, spec.master_seed)

    t0 = time.perf_counter()
    result = harness.run_sweep(spec, jobs=args.jobs)
    wall = time.perf_counter() - t0
    label = "M" if kind == "M" else "alpha"
    lines = [f"{label:>8}  {'scheme':<15} {'mean BPCU':>10} {'stderr':>8} {'infeas':>6}"]
    for r in result.rows:
        mean = "-" if r.mean_bpcu is None else f"{r.mean_bpcu:10.4f}"
        se = "-" if r.stderr_bpcu is None else f"{r.stderr_bpcu:8.4f}"
        lines.append(f"{r.sweep_value:>8g}  {r.scheme:<15} {mean:>10} {se:>8} {r.infeasible:>6}")
    lines.append(f"{spec.trials} trials per point, seed {spec.master_seed:#x}, {wall:.1f} s")
    _say(args, *lines)
    if args.out:
        harness.emit_csv(result, args.out)
        notes = []
        if kind == "M" and not args.config:
            notes.append("r0 for the device-count sweep is an assumption (default 1 BPCU)")
        harness.write_metadata(spec, args.out + ".meta.json", wall, notes)
    return 0


def cmd_oracle_check(args) -> int:
    trials = args.trials or 50
    steps = args.steps or 500
    cfg = ScenarioConfig(M=2, fading=True)
    params = cfg.params
    rng = np.random.default_rng(args.seed)
    worst, failures, checked = 0.0, 0, 0
    for _ in range(trials):
        ch = sample_channels(cfg, rng)
        lp = solve_optimal(ch, params)
        if not lp.feasible:
            continue
        checked += 1
        g = grid_oracle(ch, params, lp.p0, steps)
        gap = lp.p_star - g.p_star
        slack = grid_slack(ch, params, lp.p0, steps, lp.objective_ratio)
        worst = max(worst, gap / slack if slack > 0 else 0.0)
        if gap < -1e-9 * max(1.0, lp.p_star) or gap > slack:
            failures += 1
    _say(args, f"{checked} instances, {failures} failures, worst gap / slack = {worst:.3f}")
    return 0 if failures == 0 else 1


def cmd_selftest(args) -> int:
    from .specfun import avg_rate_kernel, avg_rate_kernel_derivative, e1

    checks = []
    checks.append(("e1(1)", abs(e1(1.0) - 0.219383934395520) < 1e-14))
    xs = np.logspace(-3, 3, 200)
    checks.append(("kernel increasing", bool(np.all(np.diff(avg_rate_kernel(xs)) > 0))))
    checks.append(("kernel slope >= 0", bool(np.all(avg_rate_kernel_derivative(xs) >= 0))))
    rep = harness.run_deterministic_study()
    checks.append(("two-device LP eta", abs(rep.lp.eta[0] - 1) <= 1e-3 and abs(rep.lp.eta[1] - 0.28830) <= 2e-3))
    checks.append(("P0 flatness", rep.p0_flatness <= 1e-6))
    cfg = ScenarioConfig(M=4)
    rng = np.random.default_rng(args.seed)
    ok = True
    for _ in range(50):
        ch = sample_channels(cfg, rng)
        res = solve_optimal(ch, cfg.params)
        if res.feasible:
            ok &= downlink_rate(ch, res.allocation, cfg.sigma2) >= cfg.r0 - 1e-6
            ok &= math.isclose(res.objective_ratio, res.lp_ratio, rel_tol=1e-8)
    checks.append(("LP recovery", bool(ok)))
    for name, passed in checks:
        _say(args, f"{'PASS' if passed else 'FAIL'}  {name}")
    return 0 if all(p for _, p in checks) else 1


COMMANDS = {
    "solve": cmd_solve,
    "fig3": cmd_two_device,
    "sweep-m": lambda a: _cmd_sweep(a, "M"),
    "sweep-alpha": lambda a: _cmd_sweep(a, "alpha"),
    "oracle-check": cmd_oracle_check,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"bacnoma {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bacnoma {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
