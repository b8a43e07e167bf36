"""Command-line interface: ``rclmc {sample,benchmark,verify,bounds,plan}``.

Exit codes: 0 success, 1 a verification suite failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench, bounds
from .config import ConfigError, config_hash, load_benchmark, load_config
from .schedule import ScheduleError
from .targets import TargetError
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _threads(args):
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("RCLMC_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise UsageError(f"RCLMC_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise UsageError("thread count must be at least 1")
    return n


def _seed(value):
    n = int(value, 0)
    if not 0 <= n < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return n


def _floats(text):
    """``1.5`` or ``1,2,3`` or ``[1,2,3]``."""
    text = text.strip()
    try:
        if text.startswith("["):
            vals = json.loads(text)
        else:
            vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or a comma list, got {text!r}")
    return [float(v) for v in vals]


def _scalar(vals, name):
    if vals is None:
        raise UsageError(f"--{name} is required")
    if len(vals) != 1:
        raise UsageError(f"--{name} takes a single number")
    return vals[0]


def _located_target_error(exc, path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return ConfigError(str(exc), "target").located(path, text)


def _out_dir(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _with_seed(config, seed):
    return config if seed is None else config.replace(seed=seed)


# -- subcommands -----------------------------------------------------------

def cmd_sample(args):
    if not args.config:
        raise UsageError("sample needs --config")
    config = _with_seed(load_config(args.config), args.seed)
    try:
        record, curve, target = bench.run_config(config, threads=_threads(args),
                                                 keep_states=bool(args.snapshots_bin))
    except (TargetError, ScheduleError) as exc:
        raise _located_target_error(exc, args.config) from None
    out = _out_dir(args)
    name = config.label or "sample"
    bench.write_text(os.path.join(out, f"{name}.csv"), bench.curve_csv(curve))
    if args.snapshots_bin:
        bench.write_snapshots(os.path.join(out, args.snapshots_bin), record)
    mean = record.mean[-1]
    summary = {
        "config_hash": config_hash(config),
        "method": config.method,
        "chains": record.n_chains,
        "diverged": record.n_diverged,
        "iterations": int(record.iterations[-1]),
        "nominal_cost": int(record.nominal_cost[-1]),
        "mean_work_cost": float(curve.work_cost[-1]),
        "mean_elapsed": float(curve.elapsed[-1]),
        "final_error": float(curve.error[-1]),
        "final_stderr": float(curve.stderr[-1]),
        "final_mean_norm": float(np.linalg.norm(mean)),
        "final_second_moment": float(np.sum(record.mean_sumsq[-1]) / record.valid_count[-1]),
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_benchmark(args):
    threads = _threads(args)
    if args.preset:
        if args.preset != "block_gaussian":
            raise UsageError(f"unknown preset {args.preset!r}")
        n = args.N or (1_000_000 if args.full else 10_000)
        configs = bench.block_benchmark_configs(N=n, seed=args.seed or 0)
    elif args.config:
        configs = load_benchmark(args.config)
        if args.seed is not None:
            configs = [c.replace(seed=args.seed) for c in configs]
    else:
        raise UsageError("benchmark needs --config or --preset")
    try:
        results = bench.run_benchmark(configs, threads=threads)
    except (TargetError, ScheduleError) as exc:
        if args.config:
            raise _located_target_error(exc, args.config) from None
        raise
    out = _out_dir(args)
    curves = [c for _, c in results]
    for curve in curves:
        bench.write_text(os.path.join(out, f"{curve.label}.csv"), bench.curve_csv(curve))
    bench.write_text(os.path.join(out, "benchmark.csv"), bench.combined_csv(curves, configs))
    bench.write_text(os.path.join(out, "benchmark.dat"), bench.gnuplot_dat(curves, configs))
    report = {"runs": [c.label for c in curves], "out": out}
    if args.preset:
        order = bench.ordering_report(curves[::-1])
        report["ordering_fraction"] = order["fraction"]
        report["ordering_costs"] = order["n_costs"]
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_verify(args):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    for name in names:
        if name not in SUITES:
            raise UsageError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}")
    results = [run_suite(name, seed=args.seed) for name in names]
    passed = all(r["passed"] for r in results)
    payload = results[0] if len(results) == 1 else {"passed": passed, "suites": results}
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        bench.write_text(os.path.join(_out_dir(args), "verify.json"), text + "\n")
    return EXIT_OK if passed else EXIT_FAIL


def _bound_report(args):
    W0 = _scalar(args.W0, "W0")
    mu = _scalar(args.mu, "mu")
    h = _scalar(args.h, "h")
    m = args.m
    if args.method == "lmc":
        L = _scalar(args.L, "L")
        d = args.d
        if d is None:
            raise UsageError("--d is required for lmc bounds")
        if args.case == 1:
            return bounds.lmc_bound_case1(W0, mu, L, d, h, m)
        return bounds.lmc_bound_case2(W0, mu, L, _scalar(args.H or [0.0], "H"), d, h, m)
    if args.L is None or args.phi is None:
        raise UsageError("rclmc bounds need --L and --phi lists")
    lg = None if args.lips_global is None else _scalar(args.lips_global, "lips-global")
    if args.case == 1:
        return bounds.rclmc_bound_case1(W0, mu, h, m, args.L, args.phi, lips_global=lg)
    H = args.H if args.H is not None else [0.0] * len(args.L)
    return bounds.rclmc_bound_case2(W0, mu, h, m, args.L, H, args.phi, lips_global=lg)


def cmd_bounds(args):
    rep = _bound_report(args)
    if args.json:
        print(rep.to_json())
    else:
        status = "admissible" if rep.admissible else f"NOT admissible ({rep.violated})"
        print(f"bound = {rep.bound!r}\ndecay = {rep.decay!r}\nbias  = {rep.bias!r}\n{status}")
    return EXIT_OK


def cmd_plan(args):
    eps = args.eps
    if eps is None or not eps > 0:
        raise UsageError("--eps must be positive")
    W0 = _scalar(args.W0, "W0")
    mu = _scalar(args.mu, "mu")
    if args.method == "lmc":
        L = _scalar(args.L, "L")
        if args.d is None:
            raise UsageError("--d is required for lmc plans")
        if args.case == 1:
            plan = bounds.lmc_stopping_case1(eps, W0, mu, L, args.d)
        else:
            plan = bounds.lmc_stopping_case2(eps, W0, mu, L, _scalar(args.H or [0.0], "H"),
                                             args.d)
    else:
        if args.L is None:
            raise UsageError("rclmc plans need --L")
        lg = None if args.lips_global is None else _scalar(args.lips_global, "lips-global")
        if args.case == 1:
            plan = bounds.rclmc_stopping_case1(eps, W0, mu, lg if lg is not None else max(args.L),
                                               args.L, args.alpha)
        else:
            H = args.H if args.H is not None else [0.0] * len(args.L)
            plan = bounds.rclmc_stopping_case2(eps, W0, mu, args.L, H, L_global=lg)
    if args.json:
        print(json.dumps(plan.to_dict(), sort_keys=True))
    else:
        print(f"h = {plan.h!r}\nM = {plan.M}")
        if plan.phi is not None:
            print("phi = " + ",".join(repr(float(p)) for p in plan.phi))
        if plan.capped:
            print("step capped by admissibility")
        if plan.note:
            print(f"note: {plan.note}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON configuration file")
    parser.add_argument("--seed", type=_seed, default=default, help="master seed (u64)")
    parser.add_argument("--threads", type=int, default=default,
                        help="worker threads; affects speed only (env RCLMC_THREADS)")
    parser.add_argument("--out", default=default, help="output directory")


def _theory_flags(p):
    p.add_argument("--method", choices=("lmc", "rclmc"), default="rclmc")
    p.add_argument("--case", type=int, choices=(1, 2), default=1)
    p.add_argument("--W0", type=_floats)
    p.add_argument("--mu", type=_floats)
    p.add_argument("--L", type=_floats, help="global constant (lmc) or list L_i (rclmc)")
    p.add_argument("--H", type=_floats, help="Hessian constant(s)")
    p.add_argument("--d", type=int)
    p.add_argument("--lips-global", type=_floats, dest="lips_global")
    p.add_argument("--json", action="store_true", help="machine-readable output")


def build_parser():
    parser = argparse.ArgumentParser(prog="rclmc", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="run one ensemble and write its error curve")
    _global_flags(p, suppress=True)
    p.add_argument("--snapshots-bin", help="also write raw snapshots to this file in --out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("benchmark", help="run several configs on a shared cost axis")
    _global_flags(p, suppress=True)
    p.add_argument("--preset", help="built-in benchmark (block_gaussian)")
    p.add_argument("--full", action="store_true", help="large ensemble for the preset")
    p.add_argument("--N", type=int, help="override the preset ensemble size")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("verify", help="run a built-in statistical suite")
    _global_flags(p, suppress=True)
    p.add_argument("suite", help=f"one of {', '.join(SUITES)} or all")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bounds", help="evaluate a convergence bound")
    _global_flags(p, suppress=True)
    _theory_flags(p)
    p.add_argument("--h", type=_floats)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--phi", type=_floats)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("plan", help="step size and iteration count for a tolerance")
    _global_flags(p, suppress=True)
    _theory_flags(p)
    p.add_argument("--eps", type=float)
    p.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(func=cmd_plan)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (UsageError, bounds.BoundError, ScheduleError, TargetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
