"""Strongly log-concave targets with closed-form constants and cost accounting.

A target is the potential ``f`` of a density ``p(x) ~ exp(-f(x))``.  Besides
values and derivatives it carries the constants the convergence theory
needs: strong convexity ``mu``, the global gradient Lipschitz constant
``lips_global``, the per-coordinate constants ``lips_coord`` and, when the
Hessian is Lipschitz, ``hess_lips_coord``.

Every target evaluates partial derivatives in batch form,
``partial_batch(idx, X)`` returning ``d f / d x_{idx[n]}`` at ``X[n]``; the
single-point ``partial`` and ``gradient`` methods are thin wrappers so that
``gradient(x)[i] == partial(i, x)`` holds bit for bit.

Indices are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .linalg import NotSymmetricError, jacobi_eigvalsh

__all__ = [
    "TargetModel",
    "QuadraticTarget",
    "GraphTarget",
    "ProductTarget",
    "QuadraticSpec",
    "GraphSpec",
    "TargetError",
    "make_gaussian_target",
    "make_block_gaussian_target",
    "make_graph_target",
    "make_skewed_target",
    "make_product_target",
    "validate_partials",
    "build_target",
]


class TargetError(ValueError):
    """Raised for target specifications that violate the model assumptions."""


class TargetModel:
    """Base class; subclasses implement ``potential``, ``partial_batch`` and ``gradient_batch``."""

    name = "target"

    def __init__(self, dim, mu, lips_global, lips_coord, hess_lips_coord=None,
                 minimizer=None, partial_cost_units=None):
        self.dim = int(dim)
        if self.dim < 1:
            raise TargetError("dimension must be positive")
        self.mu = float(mu)
        self.lips_global = float(lips_global)
        self.lips_coord = np.asarray(lips_coord, dtype=float).copy()
        self.hess_lips_coord = (None if hess_lips_coord is None
                                else np.asarray(hess_lips_coord, dtype=float).copy())
        self.minimizer = None if minimizer is None else np.asarray(minimizer, dtype=float).copy()
        if partial_cost_units is None:
            partial_cost_units = np.ones(self.dim, dtype=np.int64)
        self.partial_cost_units = np.asarray(partial_cost_units, dtype=np.int64).copy()
        if self.mu <= 0:
            raise TargetError(f"strong convexity constant must be positive, got {self.mu}")
        if self.lips_coord.shape != (self.dim,):
            raise TargetError("lips_coord must have one entry per coordinate")
        if np.any(self.partial_cost_units < 1):
            raise TargetError("partial cost units must be positive integers")
        for arr in (self.lips_coord, self.hess_lips_coord, self.minimizer, self.partial_cost_units):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def gradient_cost_units(self):
        return int(self.partial_cost_units.sum())

    def potential(self, x):
        raise NotImplementedError

    def partial_batch(self, idx, X):
        raise NotImplementedError

    def gradient_batch(self, X):
        raise NotImplementedError

    def partial(self, i, x):
        x = np.asarray(x, dtype=float)
        return float(self.partial_batch(np.array([i]), x[None, :])[0])

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self.gradient_batch(x[None, :])[0]

    def expectation(self, observable, k=None):
        """Exact expectation under the target of a named observable."""
        raise NotImplementedError(f"{type(self).__name__} has no exact {observable!r}")

    def __repr__(self):
        return (f"{type(self).__name__}(dim={self.dim}, mu={self.mu:.6g}, "
                f"L={self.lips_global:.6g})")


def _sparse_rows(a):
    """Pad the nonzero pattern of each row of ``a`` to a common width."""
    d = a.shape[0]
    nz = [np.flatnonzero(a[i]) for i in range(d)]
    width = max(1, max(len(r) for r in nz))
    cols = np.zeros((d, width), dtype=np.intp)
    vals = np.zeros((d, width))
    for i, r in enumerate(nz):
        cols[i, :len(r)] = r
        cols[i, len(r):] = i
        vals[i, :len(r)] = a[i, r]
    return cols, vals


class QuadraticTarget(TargetModel):
    """Gaussian target ``f(x) = (x - b)^T A (x - b) / 2``.

    Partial derivatives are evaluated from the nonzero pattern of the rows of
    the precision, so sparse precisions are cheap per coordinate.
    """

    name = "gaussian"

    def __init__(self, precision, mean=None, *, eigenvalues=None, partial_cost_units=None,
                 symmetry_tol=1e-12):
        a = np.array(precision, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise TargetError(f"precision must be square, got shape {a.shape}")
        d = a.shape[0]
        asym = float(np.max(np.abs(a - a.T)))
        if asym > symmetry_tol:
            raise TargetError(f"precision is not symmetric (max |A - A^T| = {asym:.3e})")
        a = 0.5 * (a + a.T)
        b = np.zeros(d) if mean is None else np.array(mean, dtype=float)
        if b.shape != (d,):
            raise TargetError(f"mean must have length {d}")
        if eigenvalues is None:
            try:
                eigenvalues = jacobi_eigvalsh(a)
            except NotSymmetricError as exc:  # pragma: no cover - guarded above
                raise TargetError(str(exc)) from exc
        lo, hi = float(np.min(eigenvalues)), float(np.max(eigenvalues))
        if lo <= 0:
            j = int(np.argmin(eigenvalues))
            raise TargetError(
                f"precision is not positive definite: eigenvalue #{j} = {lo:.6g} <= 0")
        super().__init__(d, lo, hi, np.diag(a).copy(), np.zeros(d), b, partial_cost_units)
        self.precision = a
        self.precision.setflags(write=False)
        self.mean = self.minimizer
        self._cols, self._vals = _sparse_rows(a)
        self._cov = None
        self._chol = None

    @property
    def is_diagonal(self):
        return not np.any(self.precision - np.diag(np.diag(self.precision)))

    def potential(self, x):
        y = np.asarray(x, dtype=float) - self.mean
        return 0.5 * float(y @ self.precision @ y)

    def partial_batch(self, idx, X):
        X = np.asarray(X, dtype=float)
        idx = np.asarray(idx, dtype=np.intp)
        cols = self._cols[idx]
        rows = np.arange(X.shape[0])[:, None]
        y = X[rows, cols] - self.mean[cols]
        return (self._vals[idx] * y).sum(axis=1)

    def gradient_batch(self, X):
        X = np.asarray(X, dtype=float)
        y = X[:, self._cols] - self.mean[self._cols]
        return (self._vals[None, :, :] * y).sum(axis=2)

    def covariance(self):
        if self._cov is None:
            cov = np.linalg.inv(self.precision)
            self._cov = 0.5 * (cov + cov.T)
        return self._cov

    def sample_exact(self, z):
        """Map standard normals ``z`` (shape ``(n, d)``) to exact target draws."""
        if self._chol is None:
            self._chol = np.linalg.cholesky(self.precision)
        from scipy.linalg import solve_triangular

        z = np.atleast_2d(np.asarray(z, dtype=float))
        return self.mean + solve_triangular(self._chol.T, z.T, lower=False).T

    def expectation(self, observable, k=None):
        cov = self.covariance()
        if observable == "second_moment":
            return float(np.trace(cov) + self.mean @ self.mean)
        if observable == "psi_spectral":
            k = self.dim if k is None else int(k)
            return float(np.trace(cov[:k, :k]) + self.mean[:k] @ self.mean[:k])
        if observable == "mean":
            return self.mean.copy()
        return super().expectation(observable, k)


@dataclass
class QuadraticSpec:
    """Precision ``A`` and mean ``b`` of ``f(x) = (x - b)^T A (x - b) / 2``."""

    precision: np.ndarray
    mean: np.ndarray | None = None

    def to_dict(self):
        d = {"precision": np.asarray(self.precision, dtype=float).tolist()}
        if self.mean is not None:
            d["mean"] = np.asarray(self.mean, dtype=float).tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["precision"], dtype=float),
                   None if d.get("mean") is None else np.asarray(d["mean"], dtype=float))


def make_gaussian_target(spec):
    """Gaussian target from a :class:`QuadraticSpec` with exact constants."""
    return QuadraticTarget(spec.precision, spec.mean)


def make_skewed_target(d, ridge=1.0):
    """Precision ``e e^T + ridge * I``: coordinate constants far below the global one."""
    if ridge <= 0:
        raise TargetError("ridge must be positive")
    a = np.ones((d, d)) + ridge * np.eye(d)
    # spectrum is known exactly: ridge (multiplicity d-1) and d + ridge
    eig = np.full(d, float(ridge))
    eig[-1] = d + ridge
    t = QuadraticTarget(a, eigenvalues=eig)
    t.name = "skewed"
    return t


def make_block_gaussian_target(seed=0, d=100, k=10, T=None, max_condition=1e12):
    """Block-Gaussian benchmark target.

    The first ``k`` coordinates have precision ``(T + (d/10) I)^T (T + (d/10) I)``
    with ``T`` a ``k x k`` standard normal matrix drawn from ``seed`` (or
    given explicitly); the remaining coordinates are standard normal.

    Returns:
        (target, reference_psi) where ``reference_psi`` is the trace of the
        inverse block precision, i.e. the exact mean of ``|x_{:k}|^2``.
    """
    if T is None:
        T = np.random.default_rng(seed).standard_normal((k, k))
    T = np.asarray(T, dtype=float)
    if T.shape != (k, k):
        raise TargetError(f"T must be {k}x{k}")
    m = T + (d / 10.0) * np.eye(k)
    block = m.T @ m
    block = 0.5 * (block + block.T)
    w = jacobi_eigvalsh(block)
    if w[0] <= 0 or w[-1] / w[0] > max_condition:
        raise TargetError(f"block precision is singular or ill-conditioned (eigenvalues "
                          f"{w[0]:.3e} .. {w[-1]:.3e})")
    a = np.eye(d)
    a[:k, :k] = block
    eig = np.concatenate([w, np.ones(d - k)])
    target = QuadraticTarget(a, eigenvalues=eig)
    target.name = "block_gaussian"
    target.block = block
    target.block_size = k
    reference_psi = float(np.sum(1.0 / w))
    return target, reference_psi


@dataclass
class GraphSpec:
    """``f(x) = sum_{(i,j) in E} w_ij (x_i - x_j)^2 / 2 + ridge |x|^2 / 2``."""

    d: int
    edges: list
    weights: list | None = None
    ridge: float = 1.0

    def to_dict(self):
        out = {"d": int(self.d), "edges": [[int(i), int(j)] for i, j in self.edges],
               "ridge": float(self.ridge)}
        if self.weights is not None:
            out["weights"] = [float(w) for w in self.weights]
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["d"]), [tuple(e) for e in d.get("edges", [])], d.get("weights"),
                   float(d.get("ridge", 1.0)))


class GraphTarget(QuadraticTarget):
    """Edge-sum potential over a graph; a partial derivative touches only incident edges."""

    name = "graph"

    def __init__(self, spec):
        d = int(spec.d)
        edges = [(int(i), int(j)) for i, j in spec.edges]
        weights = (np.ones(len(edges)) if spec.weights is None
                   else np.asarray(spec.weights, dtype=float))
        if spec.ridge <= 0:
            raise TargetError(f"ridge must be positive (got {spec.ridge}); "
                              "without it the potential is not strongly convex")
        if weights.shape != (len(edges),):
            raise TargetError("need one weight per edge")
        if np.any(weights < 0):
            raise TargetError("edge weights must be non-negative")
        seen = set()
        for i, j in edges:
            if not (0 <= i < d and 0 <= j < d):
                raise TargetError(f"edge ({i}, {j}) out of range for d={d}")
            if i == j:
                raise TargetError(f"self-loop at node {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise TargetError(f"duplicate edge ({i}, {j})")
            seen.add(key)
        lap = np.zeros((d, d))
        degree = np.zeros(d, dtype=np.int64)
        for (i, j), w in zip(edges, weights):
            lap[i, i] += w
            lap[j, j] += w
            lap[i, j] -= w
            lap[j, i] -= w
            degree[i] += 1
            degree[j] += 1
        a = lap + spec.ridge * np.eye(d)
        super().__init__(a, partial_cost_units=degree + 1)
        # the Laplacian is singular, so the smallest Hessian eigenvalue is exactly the ridge
        self.mu = float(spec.ridge)
        self.edges = np.array(edges, dtype=np.intp).reshape(-1, 2)
        self.weights = weights
        self.ridge = float(spec.ridge)
        self.degree = degree
        self.spec = spec

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        if len(self.edges):
            diff = x[self.edges[:, 0]] - x[self.edges[:, 1]]
            edge_part = 0.5 * float(np.sum(self.weights * diff * diff))
        else:
            edge_part = 0.0
        return edge_part + 0.5 * self.ridge * float(x @ x)


def make_graph_target(spec):
    return GraphTarget(spec)


_SECH2_SLOPE = 4.0 / (3.0 * math.sqrt(3.0))  # max |d/dt sech^2 t|


class ProductTarget(TargetModel):
    """Separable non-Gaussian target ``f(x) = sum_i lam_i x_i^2 / 2 + c_i log cosh x_i``.

    The Hessian is diagonal with entries ``lam_i + c_i sech^2(x_i)``, so
    ``mu = min lam_i``, ``L_i = lam_i + c_i`` and the diagonal Hessian entry is
    Lipschitz with ``H_i = c_i * 4 / (3 sqrt 3)``.
    """

    name = "product"

    def __init__(self, lam, c=None):
        lam = np.asarray(lam, dtype=float)
        c = np.zeros_like(lam) if c is None else np.asarray(c, dtype=float)
        if lam.ndim != 1 or c.shape != lam.shape:
            raise TargetError("lam and c must be 1-D arrays of equal length")
        if np.any(lam <= 0):
            raise TargetError("all lam_i must be positive")
        if np.any(c < 0):
            raise TargetError("all c_i must be non-negative")
        lips = lam + c
        super().__init__(lam.size, lam.min(), lips.max(), lips, c * _SECH2_SLOPE,
                         np.zeros(lam.size))
        self.lam = lam
        self.c = c

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        logcosh = np.logaddexp(x, -x) - math.log(2.0)
        return float(np.sum(0.5 * self.lam * x * x + self.c * logcosh))

    def partial_batch(self, idx, X):
        X = np.asarray(X, dtype=float)
        idx = np.asarray(idx, dtype=np.intp)
        xi = X[np.arange(X.shape[0]), idx]
        return self.lam[idx] * xi + self.c[idx] * np.tanh(xi)

    def gradient_batch(self, X):
        X = np.asarray(X, dtype=float)
        return self.lam * X + self.c * np.tanh(X)

    def _coord_second_moments(self):
        out = np.empty(self.dim)
        for i, (lam, c) in enumerate(zip(self.lam, self.c)):
            def g(t, lam=lam, c=c):
                return 0.5 * lam * t * t + c * (np.logaddexp(t, -t) - math.log(2.0))

            z = integrate.quad(lambda t: math.exp(-g(t)), -np.inf, np.inf)[0]
            m2 = integrate.quad(lambda t: t * t * math.exp(-g(t)), -np.inf, np.inf)[0]
            out[i] = m2 / z
        return out

    def expectation(self, observable, k=None):
        if observable == "mean":
            return np.zeros(self.dim)
        if observable in ("second_moment", "psi_spectral"):
            m2 = self._coord_second_moments()
            if observable == "psi_spectral":
                m2 = m2[: (self.dim if k is None else int(k))]
            return float(m2.sum())
        return super().expectation(observable, k)


def make_product_target(lam, c=None):
    return ProductTarget(lam, c)


def validate_partials(target, x, delta=1e-4):
    """Largest deviation between ``partial`` and central differences of ``potential``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=float)
    worst = 0.0
    for i in range(target.dim):
        e = np.zeros_like(x)
        e[i] = delta
        fd = (target.potential(x + e) - target.potential(x - e)) / (2.0 * delta)
        worst = max(worst, abs(target.partial(i, x) - fd))
    return worst


def build_target(spec):
    """Construct a catalog target from its JSON description.

    Returns ``(target, extras)`` where ``extras`` may carry ``reference_psi``.
    """
    spec = dict(spec)
    name = spec.pop("name", None)
    if name == "gaussian":
        if "precision" in spec:
            a = np.asarray(spec["precision"], dtype=float)
        elif "diag" in spec:
            a = np.diag(np.asarray(spec["diag"], dtype=float))
        elif "d" in spec:
            a = np.eye(int(spec["d"]))
        else:
            raise TargetError("gaussian target needs 'precision', 'diag' or 'd'")
        return make_gaussian_target(QuadraticSpec(a, spec.get("mean"))), {}
    if name == "block_gaussian":
        target, ref = make_block_gaussian_target(int(spec.get("seed", 0)), int(spec.get("d", 100)),
                                           int(spec.get("k", 10)))
        return target, {"reference_psi": ref}
    if name == "graph":
        return make_graph_target(GraphSpec.from_dict(spec)), {}
    if name == "product":
        return make_product_target(spec["lam"], spec.get("c")), {}
    if name == "skewed":
        return make_skewed_target(int(spec["d"]), float(spec.get("ridge", 1.0))), {}
    raise TargetError(f"unknown target {name!r}; expected one of "
                      "gaussian, block_gaussian, graph, product, skewed")
