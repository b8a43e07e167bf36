"""Independent brute-force oracles used by the verification suites and tests.

Nothing here is used on the sampling path; these routines exist so the
closed-form pieces of the library can be checked against numbers obtained
a different way.
"""

from __future__ import annotations

import math

import numpy as np


def ou_noise_path_oracle(lam, h, n_substeps=100_000, n_paths=1_000_000,
                         seed=0, paths_per_chunk=2000, substeps_per_block=5000,
                         progress=None):
    """Estimate the joint law of a Brownian increment and an OU stochastic integral.

    Simulates ``n_paths`` Brownian paths on a uniform grid of ``n_substeps``
    cells over ``[0, h]`` and accumulates, per path,

        B = sum_k dB_k,    J = sum_k exp(-lam * (h - t_k)) dB_k,

    with ``t_k`` the left endpoint of cell ``k`` (Ito sum).  Both are mean
    zero, so second moments are estimated about zero.

    Besides the raw estimators, control-variate estimators are returned that
    use the known grid variance ``Var(B) = h``; they have the same
    expectation and far smaller variance because ``B`` and ``J`` are almost
    perfectly correlated when ``lam * h`` is small.

    Returns:
        dict with keys ``var_b``, ``cov``, ``var_j`` (raw), ``cov_cv``,
        ``var_j_cv`` (control variate) and ``*_se`` standard errors.
    """
    if lam <= 0 or h <= 0:
        raise ValueError("lam and h must be positive")
    delta = h / n_substeps
    t_left = np.arange(n_substeps) * delta
    weights = np.exp(-lam * (h - t_left))
    sqrt_delta = math.sqrt(delta)
    rng = np.random.Generator(np.random.SFC64(seed))

    b_all = np.empty(n_paths)
    j_all = np.empty(n_paths)
    block = np.empty((substeps_per_block, paths_per_chunk))
    for start in range(0, n_paths, paths_per_chunk):
        p = min(paths_per_chunk, n_paths - start)
        b = np.zeros(p)
        j = np.zeros(p)
        for k0 in range(0, n_substeps, substeps_per_block):
            s = min(substeps_per_block, n_substeps - k0)
            z = block[:s, :p]
            rng.standard_normal(out=z)
            b += z.sum(axis=0)
            j += weights[k0:k0 + s] @ z
        b_all[start:start + p] = b * sqrt_delta
        j_all[start:start + p] = j * sqrt_delta
        if progress is not None:
            progress(start + p, n_paths)

    return summarize_noise_samples(b_all, j_all, h)


def summarize_noise_samples(b, j, h):
    """Raw and control-variate second-moment estimates from paired samples."""
    n = b.size
    bb = b * b
    bj = b * j
    jj = j * j
    ctrl = bb - h
    var_ctrl = ctrl.var()

    def cv(y):
        beta = np.mean((y - y.mean()) * (ctrl - ctrl.mean())) / var_ctrl
        resid = y - beta * ctrl
        return float(resid.mean()), float(resid.std(ddof=1) / math.sqrt(n))

    cov_cv, cov_cv_se = cv(bj)
    var_j_cv, var_j_cv_se = cv(jj)
    return {
        "n_paths": int(n),
        "var_b": float(bb.mean()),
        "var_b_se": float(bb.std(ddof=1) / math.sqrt(n)),
        "cov": float(bj.mean()),
        "cov_se": float(bj.std(ddof=1) / math.sqrt(n)),
        "var_j": float(jj.mean()),
        "var_j_se": float(jj.std(ddof=1) / math.sqrt(n)),
        "cov_cv": cov_cv,
        "cov_cv_se": cov_cv_se,
        "var_j_cv": var_j_cv,
        "var_j_cv_se": var_j_cv_se,
    }
