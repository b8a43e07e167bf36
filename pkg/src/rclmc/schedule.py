"""Coordinate-selection distributions and the step sizes they induce.

A :class:`CoordinateDistribution` holds probabilities ``phi_i`` and a base
step ``h``; coordinate ``i`` is updated with step ``h / phi_i``.  The step
for a coordinate is always recomputed from ``h`` and ``phi_i`` rather than
stored, so ``step_size(i) * phi_i`` reproduces ``h``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng

PROB_FLOOR = 1e-12


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class CoordinateDistribution:
    probs: np.ndarray
    base_step: float
    cumulative: np.ndarray = field(repr=False)
    guide: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self):
        return self.probs.size

    def step_size(self, i):
        return self.base_step / self.probs[i]

    def step_sizes(self):
        return self.base_step / self.probs

    def with_step(self, h):
        return _make(self.probs, h, normalize=False)

    def index_for(self, u):
        """Smallest index whose cumulative probability is at least ``u``.

        Uses a guide table over ``K`` equal buckets (``K`` a power of two, so
        bucket arithmetic is exact) and a short forward scan; the result is
        identical to ``searchsorted(cumulative, u, side="left")``.
        """
        if self.guide is None:
            return np.searchsorted(self.cumulative, u, side="left")
        u = np.asarray(u, dtype=float)
        k = self.guide.size - 1
        idx = self.guide[(u * k).astype(np.int64)]
        cum = self.cumulative
        last = cum.size - 1
        behind = cum[idx] < u
        while np.any(behind):
            idx = idx + behind
            behind = cum[np.minimum(idx, last)] < u
        return idx


def _make(probs, h, normalize=True):
    probs = np.array(probs, dtype=float)
    if probs.ndim != 1 or probs.size == 0:
        raise ScheduleError("need at least one coordinate")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0):
        bad = int(np.flatnonzero(~np.isfinite(probs) | (probs < 0))[0])
        raise ScheduleError(f"invalid probability at index {bad}: {probs[bad]}")
    if not h > 0:
        raise ScheduleError(f"base step must be positive, got {h}")
    if normalize:
        probs = probs / probs.sum()
    if probs.min() < PROB_FLOOR:
        warnings.warn(f"coordinate probabilities below {PROB_FLOOR} clamped", RuntimeWarning,
                      stacklevel=3)
        probs = np.maximum(probs, PROB_FLOOR)
        probs = probs / probs.sum()
    total = probs.sum()
    if abs(total - 1.0) > 1e-12:
        raise ScheduleError(f"probabilities sum to {total!r}, not 1")
    cumulative = np.cumsum(probs)
    cumulative[-1] = 1.0
    probs.setflags(write=False)
    cumulative.setflags(write=False)
    k = 1 << max(6, int(np.ceil(np.log2(4 * probs.size))))
    guide = np.searchsorted(cumulative, np.arange(k + 1) / k, side="left")
    guide = np.minimum(guide, probs.size - 1)
    guide.setflags(write=False)
    return CoordinateDistribution(probs, float(h), cumulative, guide)


def phi_uniform(d, h):
    if d < 1:
        raise ScheduleError("dimension must be at least 1")
    return _make(np.full(d, 1.0 / d), h, normalize=False)


def phi_alpha(lips, alpha, h):
    """``phi_i`` proportional to ``L_i ** alpha``, exponentiated in log space."""
    lips = np.asarray(lips, dtype=float)
    bad = np.flatnonzero(~(lips > 0))
    if bad.size:
        raise ScheduleError(f"coordinate constant L[{bad[0]}] = {lips[bad[0]]} is not positive")
    if alpha == 0:
        return phi_uniform(lips.size, h)
    ref = lips.max() if alpha > 0 else lips.min()
    t = np.exp(alpha * np.log(lips / ref))
    return _make(t / t.sum(), h, normalize=False)


def phi_hessian_optimal(lips, hess_lips, h):
    """``phi_i`` proportional to ``(L_i^3 + H_i^2)^(1/3)``."""
    lips = np.asarray(lips, dtype=float)
    hess = np.asarray(hess_lips, dtype=float)
    if lips.shape != hess.shape:
        raise ScheduleError("L and H must have the same length")
    if np.any(lips < 0) or np.any(hess < 0):
        raise ScheduleError("constants must be non-negative")
    w = np.cbrt(lips ** 3 + hess ** 2)
    bad = np.flatnonzero(w == 0)
    if bad.size:
        raise ScheduleError(f"L[{bad[0]}] and H[{bad[0]}] are both zero")
    return _make(w / w.sum(), h, normalize=False)


def phi_explicit(probs, h):
    probs = np.asarray(probs, dtype=float)
    if np.any(probs <= 0):
        raise ScheduleError("explicit probabilities must all be positive")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ScheduleError(f"explicit probabilities sum to {probs.sum()!r}")
    return _make(probs, h, normalize=True)


def floored_lips(target):
    """Coordinate constants with zeros lifted to ``1e-12 * L``."""
    floor = 1e-12 * target.lips_global
    return np.maximum(np.asarray(target.lips_coord, dtype=float), floor)


def parse_phi_spec(spec, target, h):
    """Build a distribution from a CLI/config string.

    Accepted forms: ``uniform``, ``alpha:<float>``, ``hessian-opt`` and
    ``explicit:[p1,...,pd]``.
    """
    spec = spec.strip()
    if spec == "uniform":
        return phi_uniform(target.dim, h)
    if spec.startswith("alpha:"):
        try:
            alpha = float(spec[len("alpha:"):])
        except ValueError:
            raise ScheduleError(f"bad alpha in phi spec {spec!r}") from None
        return phi_alpha(floored_lips(target), alpha, h)
    if spec == "hessian-opt":
        if target.hess_lips_coord is None:
            raise ScheduleError("hessian-opt needs a target with Hessian Lipschitz constants")
        return phi_hessian_optimal(floored_lips(target), target.hess_lips_coord, h)
    if spec.startswith("explicit:"):
        try:
            probs = json.loads(spec[len("explicit:"):])
        except json.JSONDecodeError:
            raise ScheduleError(f"bad probability list in phi spec {spec!r}") from None
        if len(probs) != target.dim:
            raise ScheduleError(f"explicit phi has {len(probs)} entries, target has {target.dim}")
        return phi_explicit(probs, h)
    raise ScheduleError(f"unknown phi spec {spec!r}")


def sample_index(dist, state):
    """Draw one coordinate index; returns ``(index, next_state)``."""
    u, state = state.uniform(1)
    return int(dist.index_for(u[0])), state


def sample_indices(dist, keys, counter):
    """Vectorized draw of one index per stream at ``counter``."""
    u = _rng.uniforms(keys, counter, 1)[:, 0]
    return dist.index_for(u)
