"""Small dense symmetric linear algebra: cyclic Jacobi eigensolver and friends."""

from __future__ import annotations

import numpy as np


class NotSymmetricError(ValueError):
    pass


def _check_symmetric(a, tol):
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {a.shape}")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > tol:
        raise NotSymmetricError(f"matrix is not symmetric (max |A - A^T| = {asym:.3e})")
    return 0.5 * (a + a.T)


def off_diagonal_norm(a):
    """Frobenius norm of the off-diagonal part."""
    a = np.asarray(a)
    off = a[~np.eye(a.shape[0], dtype=bool)]
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigh(a, tol=1e-12, max_sweeps=100, symmetry_tol=1e-12):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps over all (p, q) pairs until the off-diagonal Frobenius norm drops
    below ``tol`` times the Frobenius norm of the input.

    Returns:
        (eigenvalues ascending, eigenvectors as columns).
    """
    a = _check_symmetric(a, symmetry_tol * max(1.0, float(np.max(np.abs(a))) if np.size(a) else 1.0))
    n = a.shape[0]
    v = np.eye(n)
    scale = float(np.linalg.norm(a))
    if n <= 1 or scale == 0.0:
        w = np.diag(a).copy()
        return w, v
    threshold = tol * scale
    for _ in range(max_sweeps):
        if off_diagonal_norm(a) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    a[p, q] = a[q, p] = 0.0
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise np.linalg.LinAlgError("Jacobi iteration did not converge")
    w = np.diag(a).copy()
    order = np.argsort(w)
    return w[order], v[:, order]


def jacobi_eigvalsh(a, **kw):
    return jacobi_eigh(a, **kw)[0]


def sym_sqrtm(a, **kw):
    """Principal square root of a symmetric PSD matrix; negative eigenvalues clamp to 0."""
    w, v = jacobi_eigh(a, **kw)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
