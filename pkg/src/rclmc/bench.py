"""Error-versus-cost curves, benchmark orchestration and output files."""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, RunConfig, config_hash, parse_config
from .samplers import run_ensemble, observable_key
from .targets import build_target

CSV_HEADER = "m,elapsed,nominal_cost,work_cost,error,stderr"
SNAPSHOT_MAGIC = b"RCLM"
SNAPSHOT_VERSION = 1

# benchmark target preset: ten coupled coordinates inside a 100-dim Gaussian
BLOCK_D = 100
BLOCK_K = 10
BLOCK_H = 5e-5
BLOCK_MAX_COST = 20_000
BLOCK_COST_STEP = 400
BLOCK_BURN_IN = 0.2


@dataclass
class ErrorCurve:
    m: np.ndarray
    elapsed: np.ndarray
    nominal_cost: np.ndarray
    work_cost: np.ndarray
    error: np.ndarray
    stderr: np.ndarray
    label: str | None = None
    config_hash: str | None = None

    def rows(self):
        for i in range(self.m.size):
            yield (int(self.m[i]), float(self.elapsed[i]), int(self.nominal_cost[i]),
                   float(self.work_cost[i]), float(self.error[i]), float(self.stderr[i]))

    def at_cost(self, cost):
        i = np.searchsorted(self.nominal_cost, cost)
        if i >= self.nominal_cost.size or self.nominal_cost[i] != cost:
            raise KeyError(cost)
        return float(self.error[i]), float(self.stderr[i])


def resolve_reference(config, target, extras):
    """Exact expectation of the reported observable under the target."""
    if config.reference is not None:
        return float(config.reference)
    obs = config.error_observable
    (name, arg), = obs.items()
    if name == "psi_spectral":
        if "reference_psi" in extras and int(arg) == getattr(target, "block_size", None):
            return float(extras["reference_psi"])
        return float(target.expectation("psi_spectral", int(arg)))
    return float(target.expectation(name))


def error_curve(record, config, reference):
    key = observable_key(config.error_observable)
    mean, se = record.summary(key)
    return ErrorCurve(
        m=record.iterations.copy(),
        elapsed=record.mean_elapsed(),
        nominal_cost=record.nominal_cost.copy(),
        work_cost=record.mean_work_cost(),
        error=np.abs(mean - reference),
        stderr=se,
        label=config.label,
        config_hash=config_hash(config),
    )


def run_config(config: RunConfig, threads=1, keep_states=False):
    """Build the target, run the ensemble and reduce it to an error curve."""
    target, extras = build_target(config.target)
    record = run_ensemble(config, target, threads=threads, keep_states=keep_states)
    ref = resolve_reference(config, target, extras)
    return record, error_curve(record, config, ref), target


def _fmt(v):
    return repr(float(v))


def curve_csv(curve: ErrorCurve, with_label=False):
    out = io.StringIO()
    out.write(f"# config_hash={curve.config_hash}\n")
    out.write(("label," if with_label else "") + CSV_HEADER + "\n")
    for m, t, c, w, e, s in curve.rows():
        prefix = f"{curve.label}," if with_label else ""
        out.write(f"{prefix}{m},{_fmt(t)},{c},{_fmt(w)},{_fmt(e)},{_fmt(s)}\n")
    return out.getvalue()


def read_curve_csv(text):
    lines = text.splitlines()
    if not lines[0].startswith("# config_hash="):
        raise ValueError("missing config hash line")
    if lines[1] != CSV_HEADER:
        raise ValueError(f"unexpected header {lines[1]!r}")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]]).reshape(-1, 6)
    return ErrorCurve(data[:, 0].astype(np.int64), data[:, 1], data[:, 2].astype(np.int64),
                      data[:, 3], data[:, 4], data[:, 5],
                      config_hash=lines[0].split("=", 1)[1])


def check_comparable(configs):
    """Benchmarked runs must share target and reported observable."""
    first = configs[0]
    for c in configs[1:]:
        if c.target != first.target:
            raise ConfigError(f"run '{c.label}' uses a different target than '{first.label}'",
                              "target")
        if c.error_observable != first.error_observable:
            raise ConfigError(f"run '{c.label}' reports a different observable", "observables")


def combined_hash(configs):
    return config_hash({"runs": [c.to_dict() for c in configs]})


def combined_csv(curves, configs):
    out = io.StringIO()
    out.write(f"# config_hash={combined_hash(configs)}\n")
    out.write("label," + CSV_HEADER + "\n")
    for curve in curves:
        out.write(curve_csv(curve, with_label=True).split("\n", 2)[2])
    return out.getvalue()


def gnuplot_dat(curves, configs):
    """Whitespace table aligned on nominal cost; runs missing a cost print ``nan``."""
    costs = sorted(set().union(*(set(c.nominal_cost.tolist()) for c in curves)))
    out = io.StringIO()
    out.write(f"# config_hash={combined_hash(configs)}\n")
    cols = ["cost"] + [f"{k}_{c.label}" for c in curves for k in ("error", "stderr")]
    out.write("# " + " ".join(f"{i + 1}:{name}" for i, name in enumerate(cols)) + "\n")
    lookup = [dict(zip(c.nominal_cost.tolist(), zip(c.error, c.stderr))) for c in curves]
    for cost in costs:
        vals = [str(cost)]
        for table in lookup:
            e, s = table.get(cost, (float("nan"), float("nan")))
            vals += [_fmt(e), _fmt(s)]
        out.write(" ".join(vals) + "\n")
    return out.getvalue()


def run_benchmark(configs, threads=1):
    check_comparable(configs)
    results = []
    for c in configs:
        record, curve, _ = run_config(c, threads=threads)
        results.append((record, curve))
    return results


def ordering_report(curves, burn_in=BLOCK_BURN_IN, n_se=4.0):
    """Fraction of matched costs past burn-in where errors are ordered as listed.

    ``curves`` runs from the expected best to the expected worst; each
    adjacent pair must satisfy ``error_a <= error_b + n_se * combined SE``.
    """
    common = set(curves[0].nominal_cost.tolist())
    for c in curves[1:]:
        common &= set(c.nominal_cost.tolist())
    top = max(common)
    costs = sorted(x for x in common if x > burn_in * top)
    ok = 0
    detail = []
    for cost in costs:
        pairs = [c.at_cost(cost) for c in curves]
        good = all(a[0] <= b[0] + n_se * np.hypot(a[1], b[1]) for a, b in zip(pairs, pairs[1:]))
        ok += good
        detail.append({"cost": int(cost), "errors": [p[0] for p in pairs],
                       "stderrs": [p[1] for p in pairs], "ordered": bool(good)})
    frac = ok / len(costs) if costs else 0.0
    return {"fraction": frac, "n_costs": len(costs), "detail": detail}


def block_benchmark_configs(N=10_000, seed=0, h=BLOCK_H, max_cost=BLOCK_MAX_COST,
                     cost_step=BLOCK_COST_STEP, target_seed=0):
    """Configs comparing full-gradient LMC and RC-LMC with alpha = 0 and alpha = 1.

    All runs share the base step ``h`` and start from the target shifted by
    one along the ten coupled coordinates.  Snapshots sit on a common linear
    grid of nominal cost so curves can be compared point by point.
    """
    d, k = BLOCK_D, BLOCK_K
    if cost_step % d:
        raise ValueError("cost step must be a multiple of the dimension")
    costs = list(range(0, max_cost + 1, cost_step))
    base = {
        "target": {"name": "block_gaussian", "seed": target_seed, "d": d, "k": k},
        "h": h,
        "N": N,
        "seed": seed,
        "init": {"target": {"shift": [1.0] * k + [0.0] * (d - k)}},
        "observables": [{"psi_spectral": k}],
        "snapshots": {"cost": costs},
    }
    runs = [
        dict(base, method="lmc", M=max_cost // d, label="lmc"),
        dict(base, method="rclmc", phi="alpha:0", M=max_cost, label="rclmc_alpha0"),
        dict(base, method="rclmc", phi="alpha:1", M=max_cost, label="rclmc_alpha1"),
    ]
    return [parse_config(r) for r in runs]


# -- binary snapshots ------------------------------------------------------

def write_snapshots(path, record):
    """Raw snapshot dump: header, iteration numbers, then all states.

    Layout (little endian): ``b"RCLM"``, u32 version, u32 d, u32 N, u32 count,
    ``count`` f64 iteration numbers, then ``count * N * d`` f64 values in
    snapshot, chain, coordinate order.
    """
    if record.states is None:
        raise ValueError("record was run without keep_states")
    count, n, d = record.states.shape
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<4I", SNAPSHOT_VERSION, d, n, count))
        fh.write(np.asarray(record.iterations, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(record.states, dtype="<f8").tobytes())


def read_snapshots(path):
    with open(path, "rb") as fh:
        if fh.read(4) != SNAPSHOT_MAGIC:
            raise ValueError("not a snapshot file")
        version, d, n, count = struct.unpack("<4I", fh.read(16))
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        its = np.frombuffer(fh.read(8 * count), dtype="<f8")
        states = np.frombuffer(fh.read(8 * count * n * d), dtype="<f8").reshape(count, n, d)
    return its.astype(np.int64), states


def write_text(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
