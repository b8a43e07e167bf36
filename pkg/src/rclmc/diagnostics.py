"""Distances and error estimators for comparing chains with their target."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import jacobi_eigh, jacobi_eigvalsh, sym_sqrtm

TRACE_CLAMP = 1e-9


@dataclass
class MomentSummary:
    n: int
    mean: np.ndarray
    mean_se: np.ndarray
    second_moment: float
    second_moment_se: float
    cov: np.ndarray | None = None


def moment_summary(samples, with_cov=False):
    """Empirical moments of an ``(n, d)`` sample with standard errors."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two samples")
    sq = np.sum(x * x, axis=1)
    cov = np.cov(x, rowvar=False).reshape(x.shape[1], x.shape[1]) if with_cov else None
    return MomentSummary(
        n=n,
        mean=x.mean(axis=0),
        mean_se=x.std(axis=0, ddof=1) / math.sqrt(n),
        second_moment=float(sq.mean()),
        second_moment_se=float(sq.std(ddof=1) / math.sqrt(n)),
        cov=cov,
    )


def _check_spd(cov, name, tol=1e-12):
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    w, _ = jacobi_eigh(cov, symmetry_tol=1e-10)
    if w[0] < -tol * max(1.0, abs(w[-1])):
        raise ValueError(f"{name} is not positive semi-definite (eigenvalue {w[0]:.3e})")
    return 0.5 * (cov + cov.T)


def gaussian_w2(mean1, cov1, mean2, cov2):
    """Wasserstein-2 distance between two Gaussians (Bures formula)."""
    m1 = np.atleast_1d(np.asarray(mean1, dtype=float))
    m2 = np.atleast_1d(np.asarray(mean2, dtype=float))
    s1 = _check_spd(cov1, "cov1")
    s2 = _check_spd(cov2, "cov2")
    if s1.shape != s2.shape or m1.shape != m2.shape or m1.shape[0] != s1.shape[0]:
        raise ValueError("dimension mismatch")
    r2 = sym_sqrtm(s2)
    cross = sym_sqrtm(r2 @ s1 @ r2)
    bures = float(np.trace(s1) + np.trace(s2) - 2.0 * np.trace(cross))
    if bures < -TRACE_CLAMP:
        raise ValueError(f"Bures term is negative ({bures:.3e}); numerical failure")
    d2 = float(np.sum((m1 - m2) ** 2)) + max(bures, 0.0)
    return math.sqrt(d2)


def gaussian_w2_diag(mean1, var1, mean2, var2):
    """Closed form for diagonal covariances: sum of 1-D mean and std differences."""
    m1, m2 = np.asarray(mean1, dtype=float), np.asarray(mean2, dtype=float)
    s1, s2 = np.sqrt(np.asarray(var1, dtype=float)), np.sqrt(np.asarray(var2, dtype=float))
    return math.sqrt(float(np.sum((m1 - m2) ** 2 + (s1 - s2) ** 2)))


def w2_1d_empirical(samples_a, samples_b):
    """Exact W2 between two equal-size empirical measures on the line."""
    a = np.sort(np.asarray(samples_a, dtype=float).ravel())
    b = np.sort(np.asarray(samples_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    if a.size != b.size:
        raise ValueError("samples must have equal size")
    return math.sqrt(float(np.mean((a - b) ** 2)))


def psi_spectral(x, k, method="identity"):
    """Spectral norm of ``v v^T`` for ``v`` the first ``k`` entries of ``x``.

    ``method="identity"`` uses ``||v v^T||_2 = |v|^2``; ``method="eig"``
    builds the matrix and takes its largest eigenvalue.
    """
    x = np.asarray(x, dtype=float)
    if k > x.size:
        raise ValueError(f"k={k} exceeds dimension {x.size}")
    v = x[:k]
    if method == "identity":
        return float(v @ v)
    if method == "eig":
        return float(jacobi_eigvalsh(np.outer(v, v))[-1])
    raise ValueError(f"unknown method {method!r}")


def psi_spectral_batch(X, k):
    v = np.asarray(X)[:, :k]
    return np.sum(v * v, axis=1)


def error_M(samples, psi, reference):
    """Observable error ``|mean psi(x_i) - reference|`` and its standard error."""
    values = np.array([psi(s) for s in samples], dtype=float)
    return error_from_values(values, reference)


def error_from_values(values, reference):
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    n = values.size
    if n < 2:
        raise ValueError("need at least two samples")
    err = abs(float(values.mean()) - reference)
    return err, float(values.std(ddof=1) / math.sqrt(n))


def moment_lower_bound_w2(second_moment_q, second_moment_p):
    """``sqrt(E_q|x|^2) - sqrt(E_p|x|^2)``; a lower bound on W2 when positive."""
    if second_moment_q < 0 or second_moment_p < 0:
        raise ValueError("second moments must be non-negative")
    return math.sqrt(second_moment_q) - math.sqrt(second_moment_p)
