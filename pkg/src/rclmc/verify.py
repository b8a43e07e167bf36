"""Built-in statistical verification suites.

Each suite runs a fixed, seeded experiment and compares ensemble statistics
with an exact prediction, allowing ``N_SE`` standard errors of slack.  A
suite returns a JSON-serializable dict with an overall ``passed`` flag and
one entry per individual check.
"""

from __future__ import annotations

import math

import numpy as np

from . import bounds
from .config import RunConfig
from .diagnostics import gaussian_w2, moment_lower_bound_w2
from .samplers import run_coupled, run_ensemble
from .schedule import phi_uniform
from .targets import QuadraticTarget

N_SE = 4.0
DIAG4 = (1.0, 2.0, 3.0, 4.0)


def _run(target, method="rclmc", threads=1, **kw):
    cfg = RunConfig(method=method, target={"name": "gaussian"}, **kw)
    return run_ensemble(cfg, target, threads=threads)


def _result(name, checks, params):
    return {"suite": name, "passed": all(c["passed"] for c in checks), "checks": checks,
            "params": params}


def recursion(seed=1, d=50, h=1e-3, N=10_000, M=1_000, every=50):
    """Second moment on N(0, I_d) tracks the closed-form recursion at every snapshot."""
    target = QuadraticTarget(np.eye(d))
    rec = _run(target, phi="uniform", h=h, M=M, N=N, seed=seed,
               observables=[{"second_moment": True}], snapshots={"every": every})
    mean, se = rec.summary("second_moment")
    checks = []
    for m, e, s in zip(rec.iterations, mean, se):
        pred = bounds.moment_recursion(d, h, int(m), float(d))
        checks.append({"name": f"m={int(m)}", "empirical": float(e), "predicted": pred,
                       "stderr": float(s), "passed": bool(abs(e - pred) <= N_SE * s)})
    return _result("recursion", checks, dict(d=d, h=h, N=N, M=M, seed=seed))


def _window_average(rec, key, start):
    """Per-chain time average over snapshots at or after ``start``; mean and SE across chains."""
    sel = rec.iterations >= start
    per_chain = np.nanmean(rec.scalars[key][sel], axis=0)
    per_chain = per_chain[np.isfinite(per_chain)]
    return float(per_chain.mean()), float(per_chain.std(ddof=1) / math.sqrt(per_chain.size))


def fixed_point(seed=2, d=50, h=1e-3, N=10_000, M=20_000, burn=5_000, every=100,
                ratio_window=(1.7, 2.3)):
    """Long-run second moment sits at the biased fixed point; the excess scales as O(h)."""
    target = QuadraticTarget(np.eye(d))
    checks = []
    excess = {}
    for step in (h, h / 2):
        rec = _run(target, phi="uniform", h=step, M=M, N=N, seed=seed,
                   observables=[{"second_moment": True}], snapshots={"every": every})
        avg, se = _window_average(rec, "second_moment", burn)
        pred = bounds.moment_fixed_point(d, step)
        excess[step] = (avg - d, se)
        checks.append({"name": f"fixed point h={step:g}", "empirical": avg, "predicted": pred,
                       "stderr": se, "passed": bool(abs(avg - pred) <= N_SE * se)})
    (e1, s1), (e2, s2) = excess[h], excess[h / 2]
    ratio = e1 / e2
    ratio_se = abs(ratio) * math.hypot(s1 / e1, s2 / e2)
    predicted = (bounds.moment_fixed_point(d, h) - d) / (bounds.moment_fixed_point(d, h / 2) - d)
    checks.append({"name": "excess ratio h vs h/2", "empirical": ratio, "predicted": predicted,
                   "stderr": ratio_se,
                   "passed": bool(ratio_window[0] <= ratio <= ratio_window[1])})
    # halving h should shrink the excess by the predicted amount
    shift = e1 - e2
    shift_pred = bounds.moment_fixed_point(d, h) - bounds.moment_fixed_point(d, h / 2)
    checks.append({"name": "fixed point shift", "empirical": shift, "predicted": shift_pred,
                   "stderr": math.hypot(s1, s2),
                   "passed": bool(abs(shift - shift_pred) <= N_SE * math.hypot(s1, s2))})
    return _result("fixed-point", checks, dict(d=d, h=h, N=N, M=M, burn=burn, seed=seed))


def stationarity(seed=3, d=10, h=1e-3, N=10_000, M=1_000, every=100):
    """Chains started at the target keep zero mean and drift only toward the fixed point."""
    target = QuadraticTarget(np.eye(d))
    rec = _run(target, phi="uniform", h=h, M=M, N=N, seed=seed, init={"target": {"shift": 0.0}},
               observables=[{"second_moment": True}, {"mean": True}],
               snapshots={"every": every})
    mean2, se2 = rec.summary("second_moment")
    mu, mu_se = rec.mean, rec.mean_se
    checks = [{"name": "step admissible",
               "passed": bool(bounds.sde_step_admissible(1.0, 1.0, 1.0 / d, h))}]
    for j, m in enumerate(rec.iterations):
        z = np.abs(mu[j]) / mu_se[j]
        pred = bounds.moment_recursion(d, h, int(m), float(d))
        ok = bool(np.all(z <= N_SE) and mean2[j] <= pred + N_SE * se2[j]
                  and mean2[j] >= d - N_SE * se2[j])
        checks.append({"name": f"m={int(m)}", "max_mean_z": float(z.max()),
                       "second_moment": float(mean2[j]), "predicted": pred,
                       "stderr": float(se2[j]), "passed": ok})
    return _result("stationarity", checks, dict(d=d, h=h, N=N, M=M, seed=seed))


def contraction(seed=4, lam=DIAG4, h=1.0 / 512, N=10_000, M=500):
    """Coupled Euler/exact pairs contract at rate h mu / 2 up to the discretization term."""
    lam = np.asarray(lam, dtype=float)
    d = lam.size
    target = QuadraticTarget(np.diag(lam))
    dist = phi_uniform(d, h)
    mu = float(lam.min())
    cap = bounds.rclmc_admissible_step(mu, dist.probs, float(lam.max()))
    rng = np.random.default_rng(seed)
    Y0 = rng.standard_normal((N, d)) / np.sqrt(lam)
    X0 = 1.0 + math.sqrt(2.0) * rng.standard_normal((N, d))
    D = run_coupled(target, dist, X0, Y0, M, master_seed=seed)
    C = 10.0 * h * h / mu * float(np.sum(lam ** 2 / dist.probs))
    rate = 1.0 - h * mu / 2.0
    Y = D[1:] - rate * D[:-1]
    ybar = Y.mean(axis=1)
    yse = Y.std(axis=1, ddof=1) / math.sqrt(N)
    slack = C + N_SE * yse - ybar
    worst = int(np.argmin(slack))
    checks = [
        {"name": "step admissible", "h": h, "cap": cap, "passed": bool(h <= cap)},
        {"name": "one-step contraction, all m", "worst_m": worst,
         "lhs": float(ybar[worst]), "rhs": float(C + N_SE * yse[worst]),
         "passed": bool(np.all(slack >= 0))},
    ]
    return _result("contraction", checks, dict(lam=lam.tolist(), h=h, N=N, M=M, seed=seed, C=C))


def lowerbound(seed=5, d=100, h=5e-3, N=10_000, M=1_000, snapshots=None):
    """Second moment from N(e, 2I) stays above the geometric-plus-fixed-point floor."""
    target = QuadraticTarget(np.eye(d))
    snaps = snapshots or {"geometric": 1.3}
    rec = _run(target, phi="uniform", h=h, M=M, N=N, seed=seed,
               init={"normal": {"mean": 1.0, "scale": math.sqrt(2.0)}},
               observables=[{"second_moment": True}], snapshots=snaps)
    mean, se = rec.summary("second_moment")
    floor_fp = bounds.moment_fixed_point(d, h)
    checks = []
    for m, e, s in zip(rec.iterations, mean, se):
        if m < 1:
            continue
        floor = d * (1.0 - 2.0 * h) ** int(m) + floor_fp
        checks.append({"name": f"m={int(m)}", "empirical": float(e), "floor": floor,
                       "stderr": float(s), "passed": bool(e >= floor - N_SE * s)})
    grid = [(dd, hh) for dd in (1, 2, 5, 10, 50, 100, 1000, 10_000)
            for hh in np.linspace(1e-4, 1.0, 40) / dd]
    bad = [(dd, hh) for dd, hh in grid
           if math.sqrt(bounds.moment_fixed_point(dd, hh)) - math.sqrt(dd)
           < dd ** 1.5 * hh / 6.0]
    checks.append({"name": "fixed-point excess dominates the bias floor",
                   "n_grid": len(grid), "violations": len(bad), "passed": not bad})
    return _result("lowerbound", checks, dict(d=d, h=h, N=N, M=M, seed=seed))


def bounds_dominance(seed=6, lam=DIAG4, steps=None, N=10_000, M=2_000):
    """Measured moment lower bound on W2 never exceeds the O(h) upper bound."""
    lam = np.asarray(lam, dtype=float)
    d = lam.size
    target = QuadraticTarget(np.diag(lam))
    mu = float(lam.min())
    phi = np.full(d, 1.0 / d)
    cap = bounds.rclmc_admissible_step(mu, phi, float(lam.max()))
    steps = steps or (cap, cap / 4)
    w0 = gaussian_w2(np.ones(d), 2.0 * np.eye(d), np.zeros(d), np.diag(1.0 / lam))
    ep = float(np.sum(1.0 / lam))
    checks = []
    for h in steps:
        rec = _run(target, phi="uniform", h=h, M=M, N=N, seed=seed,
                   init={"normal": {"mean": 1.0, "scale": math.sqrt(2.0)}},
                   observables=[{"second_moment": True}], snapshots={"geometric": 1.3})
        mean, se = rec.summary("second_moment")
        for m, e, s in zip(rec.iterations, mean, se):
            lb = moment_lower_bound_w2(float(e), ep)
            lb_se = float(s) / (2.0 * math.sqrt(float(e)))
            rep = bounds.rclmc_bound_case2(w0, mu, h, int(m), lam, np.zeros(d), phi,
                                           lips_global=float(lam.max()))
            checks.append({"name": f"h={h:g} m={int(m)}", "lower": lb, "upper": rep.bound,
                           "stderr": lb_se, "admissible": rep.admissible,
                           "passed": bool(rep.admissible and lb <= rep.bound + N_SE * lb_se)})
    return _result("bounds-dominance", checks, dict(lam=lam.tolist(), steps=list(steps), N=N,
                                                    M=M, seed=seed, W0=w0))


SUITES = {
    "recursion": recursion,
    "contraction": contraction,
    "stationarity": stationarity,
    "lowerbound": lowerbound,
    "bounds-dominance": bounds_dominance,
    "fixed-point": fixed_point,
}


def run_suite(name, seed=None, **kw):
    if name not in SUITES:
        raise KeyError(name)
    if seed is not None:
        kw["seed"] = seed
    return SUITES[name](**kw)
