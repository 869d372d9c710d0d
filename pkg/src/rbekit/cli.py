"""Command-line driver: ``rbekit {kinematics-check,kernel-check,collide,simulate}``.

Exit codes: 0 success, 1 property failure, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import diagnostics as dg
from .config import ConfigError, RunConfig
from .kernels import (ball_integral, check_condition_de, check_condition_hard, de_leading_term,
                      hard_bound_closed_form, hard_power, load_table, zero_kernel)
from .suites import collision_suite, kinematics_suite, renormalization_ratios
from .transport import PositivityError, causality_check, run, write_snapshot

EXIT_OK, EXIT_PROPERTY, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("rbekit")


def set_threads(flag: int | None, config_value: int = 1) -> int:
    """Thread count: the flag wins over ``RBE_THREADS``, which wins over the config."""
    n = flag
    if n is None and os.environ.get("RBE_THREADS"):
        try:
            n = int(os.environ["RBE_THREADS"])
        except ValueError as exc:
            raise ConfigError("RBE_THREADS must be an integer") from exc
    n = config_value if n is None else n
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return n


def cmd_kinematics_check(args) -> int:
    res = kinematics_suite(args.pairs, args.seed, corrupt=args.corrupt_energy)
    print("\n".join(res.lines()))
    if not res.passed:
        first = next(k for k, lim in res.limits.items() if res.values[k] > lim)
        print(f"first failing check: {first}")
    return EXIT_OK if res.passed else EXIT_PROPERTY


def _kernel_from_args(args):
    if args.family == "zero":
        return zero_kernel()
    if args.family == "tabulated":
        if not args.table:
            raise ConfigError("--table is required for a tabulated kernel")
        return load_table(args.table)
    try:
        return hard_power(args.beta, args.gamma, args.C)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_kernel_check(args) -> int:
    k = _kernel_from_args(args)
    ps = np.concatenate([[0.0], np.logspace(-1, math.log10(args.pmax), args.points)])
    hard = check_condition_hard(k, args.R, ps)
    de = check_condition_de(k, args.R, ps)
    print("\n".join(hard.lines()))
    print("\n".join(de.lines()))
    if k.family == "hard-power" and k.beta == 0:
        lead = de_leading_term(k, args.R)
        print(f"p0^-1 sequence: last value {de.limit_estimate:.8g}, analytic limit {lead:.8g}, "
              f"relative gap {abs(de.limit_estimate - lead) / lead:.2e}")
    p0 = 2.0
    closed = hard_bound_closed_form(args.C, args.R, p0)
    numeric = ball_integral(lambda g: args.C * np.asarray(g) ** 2, math.sqrt(p0 * p0 - 1), args.R)
    print(f"closed form (C={args.C:g}, R={args.R:g}, p0={p0:g}): {closed:.10g}  "
          f"numerical {numeric:.10g}  rel.diff {abs(closed - numeric) / closed:.2e}")
    # every admissible family satisfies the p0^-2 condition
    return EXIT_OK if hard.passed else EXIT_PROPERTY


def cmd_collide(args) -> int:
    cfg = RunConfig.load(args.config)
    set_threads(args.threads, cfg.threads)
    k = cfg.base_kernel
    op_kernel = k.truncate(cfg.n) if k.family != "zero" else k
    from .collision import CollisionOperator

    op = CollisionOperator(cfg.momentum, op_kernel, cfg.sphere_rule, cfg.partners, cfg.seed)
    print(f"events {op.events.size}, leaking {op.events.leak_rate.size}, unresolved {op.events.n_null}")
    res = collision_suite(op, cfg.seed, args.states)
    print("\n".join(res.lines()))
    ok = res.passed
    if k.family != "zero":
        rr = renormalization_ratios(op, cfg.n, 2 * args.samples, cfg.seed)
        for name, gr in rr.growth(args.samples).items():
            good = np.isfinite(gr) and gr < 2.0
            ok &= bool(good)
            print(f"{'renormalized':>12s} {name + ' growth':<22s} {gr:12.4e}  <  2.0e+00 {'PASS' if good else 'FAIL'}")
    return EXIT_OK if ok else EXIT_PROPERTY


def _support_radius(f) -> float:
    live = np.any(f.values > 0, axis=1)
    return float(np.max(f.space.outer_radius[live])) if np.any(live) else 0.0


def summary_block(cfg: RunConfig, traj, f0) -> tuple[list[str], bool]:
    lines, ok = [], True

    def add(name, passed, detail):
        nonlocal ok
        ok &= bool(passed)
        lines.append(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

    drift = dg.conservation_drift(traj)
    add("conservation", max(drift.values()) <= 1e-6,
        ", ".join(f"{k} {v:.2e}" for k, v in drift.items()))
    add("H_monotone", dg.h_monotone_violation(traj) <= 1e-10,
        f"max relative increase {dg.h_monotone_violation(traj):.2e}")
    if len(traj.records) >= 3:
        for rep in (dg.verify_shifted_identity(traj), dg.verify_inertia_identity(traj)):
            add(f"{rep.name}_identity", rep.passed, f"max residual {rep.max_residual:.2e}")
    bounds = dg.verify_bounds(traj, f0, cfg.T)
    for c in bounds.checks:
        add(f"bound_{c.name}", c.passed, f"max {c.worst_lhs:.6g} <= {c.bound:.6g} (margin {c.margin:.3g})")
    if traj.states and cfg.geometry != "homogeneous" and cfg.boundary == "outflow":
        R0 = _support_radius(f0)
        rep = causality_check(traj, R0)
        add("causality", rep.passed, f"R0 {R0:g}, max mass fraction outside cone {rep.max_violation:.2e}")
    return lines, ok


def cmd_simulate(args) -> int:
    cfg = RunConfig.load(args.config)
    threads = set_threads(args.threads, cfg.threads)
    out = args.output or cfg.output
    f0 = cfg.initial_state()
    try:
        traj = run(cfg, keep_states=cfg.geometry != "homogeneous")
    except PositivityError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        snap = (cfg.snapshot or (out or "rbekit") + ".snapshot")
        last = getattr(exc, "state", None)
        if last is not None:
            write_snapshot(last, snap)
            print(f"last good state written to {snap}", file=sys.stderr)
        return EXIT_RUNTIME
    header = f"rbekit simulate seed={cfg.seed} threads={threads}\nconfig {cfg.to_json().replace(chr(10), ' ')}"
    text = traj.to_csv(header)
    lines, ok = summary_block(cfg, traj, f0)
    text += "".join(f"# {ln}\n" for ln in lines)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg.snapshot:
        write_snapshot(traj.final, cfg.snapshot)
    print("\n".join(lines), file=sys.stderr if not out else sys.stdout)
    return EXIT_OK if ok else EXIT_PROPERTY


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rbekit", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kinematics-check", help="collision invariants on random pairs")
    p.add_argument("--pairs", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt-energy", action="store_true", help="inject an energy error (self test)")
    p.set_defaults(func=cmd_kinematics_check)

    p = sub.add_parser("kernel-check", help="large-|p| conditions and the closed-form ball integral")
    p.add_argument("--family", choices=("hard-power", "zero", "tabulated"), default="hard-power")
    p.add_argument("--table")
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--pmax", type=float, default=1e4)
    p.add_argument("--points", type=int, default=20)
    p.set_defaults(func=cmd_kernel_check)

    p = sub.add_parser("collide", help="collision operator property suite")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int)
    p.add_argument("--states", type=int, default=20)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_collide)

    p = sub.add_parser("simulate", help="run the split-step solver and check the trajectory")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PositivityError, FloatingPointError, MemoryError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
