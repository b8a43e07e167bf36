"""Closed-form convergence bounds, step-size admissibility and stopping rules.

All bounds are Wasserstein-2 upper bounds of the form ``decay + bias`` where
the decay term carries the initial distance ``W0`` and shrinks with the
iteration count ``m``, and the bias is the ``m``-independent floor left by
discretization.  Stopping rules choose ``h`` so that the bias equals a fixed
fraction of the tolerance and then pick the smallest ``M`` whose decay term
covers the rest.  The numeric constants (100, 5, 3, the 4/(mu h) rate) are
the explicit constants from the convergence proofs; they are not tuned.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .schedule import phi_alpha, phi_hessian_optimal

PROOF_CONSTANTS_NOTE = "proof constants"


class BoundError(ValueError):
    pass


@dataclass
class BoundReport:
    bound: float
    decay: float
    bias: float
    admissible: bool
    violated: str | None = None
    inputs: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


class Plan(NamedTuple):
    h: float
    M: int
    phi: np.ndarray | None = None
    capped: bool = False
    note: str = ""

    def to_dict(self):
        out = {"h": self.h, "M": self.M, "capped": self.capped, "note": self.note}
        if self.phi is not None:
            out["phi"] = [float(p) for p in self.phi]
        return out


def _positive(**kw):
    for name, value in kw.items():
        if not (value > 0 and math.isfinite(value)):
            raise BoundError(f"{name} must be positive and finite, got {value}")


def _nonneg(**kw):
    for name, value in kw.items():
        if not (value >= 0 and math.isfinite(value)):
            raise BoundError(f"{name} must be non-negative, got {value}")


def _vectors(L, phi, H=None):
    L = np.asarray(L, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if L.ndim != 1 or L.shape != phi.shape:
        raise BoundError(f"length mismatch: {L.size} constants vs {phi.size} probabilities")
    if np.any(phi <= 0) or abs(phi.sum() - 1.0) > 1e-9:
        raise BoundError("phi must be positive and sum to 1")
    if np.any(L < 0):
        raise BoundError("coordinate constants must be non-negative")
    if H is not None:
        H = np.asarray(H, dtype=float)
        if H.shape != L.shape:
            raise BoundError(f"length mismatch: {H.size} Hessian constants vs {L.size}")
        if np.any(H < 0):
            raise BoundError("Hessian constants must be non-negative")
    return L, phi, H


def _report(decay, bias, admissible, violated, inputs):
    return BoundReport(decay + bias, decay, bias, bool(admissible),
                       None if admissible else violated, inputs)


def _iterations(rate, W0, epsilon, split):
    """Smallest M with exp(-rate M) W0 <= epsilon / split."""
    ratio = split * W0 / epsilon
    if ratio <= 1.0:
        return 0
    return max(0, math.ceil(math.log(ratio) / rate))


# -- full-gradient chain --------------------------------------------------

def lmc_bound_case1(W0, mu, L, d, h, m):
    _positive(mu=mu, L=L, h=h)
    _nonneg(W0=W0, m=m)
    kappa = L / mu
    decay = math.exp(-mu * h * m / 2.0) * W0
    bias = 2.0 * math.sqrt(kappa * h * d)
    ok = h <= 1.0 / L
    return _report(decay, bias, ok, "h <= 1/L",
                   dict(W0=W0, mu=mu, L=L, d=d, h=h, m=m))


def lmc_bound_case2(W0, mu, L, H, d, h, m):
    _positive(mu=mu, L=L, h=h)
    _nonneg(W0=W0, m=m, H=H)
    kappa = L / mu
    decay = math.exp(-mu * h * m) * W0
    bias = H * h * d / (2.0 * mu) + 3.0 * kappa ** 1.5 * math.sqrt(mu) * h * math.sqrt(d)
    ok = h < 2.0 / (mu + L)
    return _report(decay, bias, ok, "h < 2/(mu+L)",
                   dict(W0=W0, mu=mu, L=L, H=H, d=d, h=h, m=m))


def lmc_stopping_case1(epsilon, W0, mu, L, d):
    """Step and iteration count putting the case-1 bound below ``epsilon``.

    The bias is set to ``epsilon / 2`` and the decay term covers the rest.
    """
    _positive(epsilon=epsilon, mu=mu, L=L)
    _nonneg(W0=W0)
    kappa = L / mu
    h = epsilon ** 2 / (16.0 * kappa * d)
    cap = 1.0 / L
    capped = h > cap
    h = min(h, cap)
    M = _iterations(mu * h / 2.0, W0, epsilon, 2.0)
    note = "already within tolerance" if epsilon >= 2.0 * W0 else PROOF_CONSTANTS_NOTE
    return Plan(h, M, None, capped, note)


def lmc_stopping_case2(epsilon, W0, mu, L, H, d):
    """Each of the two bias terms and the decay term gets ``epsilon / 3``."""
    _positive(epsilon=epsilon, mu=mu, L=L)
    _nonneg(W0=W0, H=H)
    kappa = L / mu
    h_lin = 2.0 * mu * epsilon / (3.0 * H * d) if H > 0 else math.inf
    h_sq = epsilon / (9.0 * kappa ** 1.5 * math.sqrt(mu) * math.sqrt(d))
    h = min(h_lin, h_sq)
    # the admissible region is open, so stay strictly inside it
    cap = math.nextafter(2.0 / (mu + L), 0.0)
    capped = h > cap
    h = min(h, cap)
    M = _iterations(mu * h, W0, epsilon, 3.0)
    note = "already within tolerance" if epsilon >= 3.0 * W0 else PROOF_CONSTANTS_NOTE
    return Plan(h, M, None, capped, note)


# -- random-coordinate chain ----------------------------------------------

def rclmc_admissible_step(mu, phi, lips_global):
    return mu * float(np.min(phi)) / (8.0 * lips_global ** 2)


def rclmc_bound_case1(W0, mu, h, m, L, phi, lips_global=None):
    """Bound for targets with Lipschitz coordinate gradients.

    ``lips_global`` enters only the admissibility check and defaults to
    ``max(L)``, the smallest value consistent with the coordinate constants.
    """
    _positive(mu=mu, h=h)
    _nonneg(W0=W0, m=m)
    L, phi, _ = _vectors(L, phi)
    lg = float(L.max()) if lips_global is None else float(lips_global)
    decay = math.exp(-mu * h * m / 4.0) * W0
    bias = 5.0 * math.sqrt(h) / mu * math.sqrt(float(np.sum(L ** 2 / phi)))
    ok = h <= rclmc_admissible_step(mu, phi, lg)
    return _report(decay, bias, ok, "h <= mu*min(phi)/(8 L^2)",
                   dict(W0=W0, mu=mu, h=h, m=m, L=L.tolist(), phi=phi.tolist(),
                        lips_global=lg))


def rclmc_bound_case2(W0, mu, h, m, L, H, phi, lips_global=None):
    """Bound when coordinate Hessians are also Lipschitz; bias is O(h)."""
    _positive(mu=mu, h=h)
    _nonneg(W0=W0, m=m)
    L, phi, H = _vectors(L, phi, H)
    lg = float(L.max()) if lips_global is None else float(lips_global)
    decay = math.exp(-mu * h * m / 4.0) * W0
    bias = 3.0 * h / mu * math.sqrt(float(np.sum((L ** 3 + H ** 2) / phi ** 2)))
    ok = h <= rclmc_admissible_step(mu, phi, lg)
    return _report(decay, bias, ok, "h <= mu*min(phi)/(8 L^2)",
                   dict(W0=W0, mu=mu, h=h, m=m, L=L.tolist(), H=H.tolist(),
                        phi=phi.tolist(), lips_global=lg))


def _rc_plan(h, epsilon, W0, mu, phi, lips_global):
    cap = rclmc_admissible_step(mu, phi, lips_global)
    capped = h > cap
    h = min(h, cap)
    M = _iterations(mu * h / 4.0, W0, epsilon, 2.0)
    note = "already within tolerance" if epsilon >= 2.0 * W0 else PROOF_CONSTANTS_NOTE
    return Plan(h, M, phi, capped, note)


def rclmc_stopping_case1(epsilon, W0, mu, L_global, L, alpha=1.0):
    _positive(epsilon=epsilon, mu=mu, L_global=L_global)
    _nonneg(W0=W0)
    L = np.asarray(L, dtype=float)
    phi = phi_alpha(L, alpha, 1.0).probs
    h = mu ** 2 * epsilon ** 2 / (100.0 * float(np.sum(L ** 2 / phi)))
    return _rc_plan(h, epsilon, W0, mu, phi, L_global)


def rclmc_stopping_case2(epsilon, W0, mu, L, H, L_global=None):
    _positive(epsilon=epsilon, mu=mu)
    _nonneg(W0=W0)
    L = np.asarray(L, dtype=float)
    H = np.asarray(H, dtype=float)
    phi = phi_hessian_optimal(L, H, 1.0).probs
    lg = float(L.max()) if L_global is None else float(L_global)
    h = mu * epsilon / (6.0 * math.sqrt(float(np.sum((L ** 3 + H ** 2) / phi ** 2))))
    return _rc_plan(h, epsilon, W0, mu, phi, lg)


def sde_step_admissible(mu, L, phi_min, h):
    """Step condition under which the chain has a stationary density."""
    return h <= mu * phi_min / (4.0 + 8.0 * L ** 2 + 32.0 * L ** 4)


# -- lower bound on the standard Gaussian ----------------------------------

def isotropic_w2_lower_bound(d, h, m):
    """Lower bound on W2 after ``m`` steps from ``N(e, 2I)`` towards ``N(0, I)``."""
    _positive(h=h)
    if m < 1:
        raise BoundError("m must be at least 1")
    if d * h > 1:
        raise BoundError(f"requires d*h <= 1, got {d * h}")
    return math.exp(-2.0 * m * h) * math.sqrt(d) / 3.0 + d ** 1.5 * h / 6.0


def moment_fixed_point(d, h):
    return 2.0 * d / (2.0 - d * h)


def moment_recursion(d, h, m, E0):
    """Second moment after ``m`` steps of the chain on ``N(0, I_d)`` with uniform phi."""
    if d * h > 1:
        raise BoundError(f"requires d*h <= 1, got {d * h}")
    if E0 < 0:
        raise BoundError("E0 must be non-negative")
    a = 1.0 - 2.0 * h + d * h * h
    s = moment_fixed_point(d, h)
    return a ** m * (E0 - s) + s


def coordinate_moment_step(second, mean, lam, phi, h):
    """One expected step of per-coordinate moments on a diagonal Gaussian.

    With probability ``phi_i`` coordinate ``i`` moves by the step
    ``h_i = h / phi_i``; averaging over the index gives
    ``E x_i'^2 = E x_i^2 (1 - 2 h lam_i + h^2 lam_i^2 / phi_i) + 2h`` and
    ``E x_i' = (1 - h lam_i) E x_i``.
    """
    lam = np.asarray(lam, dtype=float)
    phi = np.asarray(phi, dtype=float)
    second = np.asarray(second, dtype=float)
    mean = np.asarray(mean, dtype=float)
    new_second = second * (1.0 - 2.0 * h * lam + h * h * lam ** 2 / phi) + 2.0 * h
    return new_second, (1.0 - h * lam) * mean


def coordinate_moments(second0, mean0, lam, phi, h, m):
    second, mean = np.asarray(second0, dtype=float), np.asarray(mean0, dtype=float)
    for _ in range(m):
        second, mean = coordinate_moment_step(second, mean, lam, phi, h)
    return second, mean


# -- constants -------------------------------------------------------------

class Conditioning(NamedTuple):
    kappa: float
    kappa_i: np.ndarray
    kappa_max: float
    consistent: bool
    note: str


def condition_numbers(mu, L_global, L, rtol=1e-12):
    _positive(mu=mu)
    L = np.asarray(L, dtype=float)
    lmax = float(L.max())
    slack = rtol * max(L_global, lmax)
    ok = lmax <= L_global + slack and L_global <= L.size * lmax + slack
    note = "" if ok else "inconsistent-constants"
    return Conditioning(L_global / mu, L / mu, lmax / mu, ok, note)


def holder_sum(kappa, alpha):
    kappa = np.asarray(kappa, dtype=float)
    return float(np.sum(np.exp(alpha * np.log(kappa))))


def holder_product(kappa, alpha):
    """``K_{2-alpha} K_alpha``, minimized over alpha at alpha = 1."""
    return holder_sum(kappa, 2.0 - alpha) * holder_sum(kappa, alpha)
