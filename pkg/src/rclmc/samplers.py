"""RC-LMC and LMC transitions, coupled reference chains and ensemble runs.

Random-number consumption is fixed per transition and is part of the
reproducibility contract:

* RC-LMC step: 3 draws (coordinate index, then a Box-Muller pair of which
  only the cosine branch is used).
* LMC step: ``2 * ceil(d / 2)`` draws for ``d`` normals.
* coupled step: 3 draws (index, then both branches of one Box-Muller pair).
* initial state: ``2 * ceil(d / 2)`` draws, whatever the initial law.

Ensembles are split into fixed-size chunks of chains.  Each chunk is an
independent computation, so running chunks over any number of threads gives
bit-identical output.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as _rng
from .diagnostics import psi_spectral_batch
from .rng import RngState

CHUNK_SIZE = 4096
RC_DRAWS = 3
COUPLED_DRAWS = 3


def lmc_draws(d):
    return 2 * ((d + 1) // 2)


init_draws = lmc_draws


@dataclass(frozen=True)
class ChainState:
    """One chain: iterate, iteration count, elapsed time and cost counters."""

    x: np.ndarray
    rng: RngState
    m: int = 0
    elapsed: float = 0.0
    nominal_cost: int = 0
    work_cost: int = 0
    diverged: bool = False

    @classmethod
    def start(cls, x0, master_seed=0, chain=0):
        return cls(np.array(x0, dtype=float), RngState.for_chain(master_seed, chain))


# iterates beyond this magnitude are treated as diverged so squared norms stay finite
DIVERGENCE_LIMIT = 1e100


def _rc_update(X, idx, xi, target, dist, active):
    """Apply the single-coordinate update to rows of ``X`` in place.

    Returns ``(step sizes, ok mask)``; rows that are inactive or produce a
    non-finite value are left untouched.
    """
    rows = np.arange(X.shape[0])
    with np.errstate(invalid="ignore", over="ignore"):
        g = target.partial_batch(idx, X)
        step = dist.base_step / dist.probs[idx]
        new = X[rows, idx] - step * g + np.sqrt(2.0 * step) * xi
    ok = active & (np.abs(new) <= DIVERGENCE_LIMIT)
    X[rows[ok], idx[ok]] = new[ok]
    return step, ok


def _lmc_update(X, z, target, h, active):
    with np.errstate(invalid="ignore", over="ignore"):
        new = X - h * target.gradient_batch(X) + math.sqrt(2.0 * h) * z
    ok = active & np.all(np.abs(new) <= DIVERGENCE_LIMIT, axis=1)
    X[ok] = new[ok]
    return ok


def rc_lmc_step(state, target, dist, *, index=None, noise=None):
    """One RC-LMC transition.

    ``index`` and ``noise`` override the drawn coordinate and Gaussian (for
    testing); the stream is advanced by the same amount either way.
    """
    if dist.dim != target.dim:
        raise ValueError(f"distribution has {dist.dim} coordinates, target has {target.dim}")
    nxt = replace(state.rng, counter=state.rng.counter + RC_DRAWS)
    if state.diverged:
        return replace(state, rng=nxt)
    u = _rng.uniforms(np.array([state.rng.key], dtype=np.uint64), state.rng.counter, RC_DRAWS)
    i = int(dist.index_for(u[0, 0])) if index is None else int(index)
    xi = _rng.box_muller_cos(u[:, 1], u[:, 2])[0] if noise is None else float(noise)
    X = state.x.copy()[None, :]
    step, ok = _rc_update(X, np.array([i]), np.array([xi]), target, dist, np.array([True]))
    if not ok[0]:
        return replace(state, rng=nxt, diverged=True)
    return ChainState(X[0], nxt, state.m + 1, state.elapsed + float(step[0]),
                      state.nominal_cost + 1,
                      state.work_cost + int(target.partial_cost_units[i]))


def lmc_step(state, target, h, *, noise=None):
    """One full-gradient LMC transition."""
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    d = target.dim
    nxt = replace(state.rng, counter=state.rng.counter + lmc_draws(d))
    if state.diverged:
        return replace(state, rng=nxt)
    if noise is None:
        z, _ = _rng.normals(np.array([state.rng.key], dtype=np.uint64), state.rng.counter, d)
    else:
        z = np.asarray(noise, dtype=float).reshape(1, d)
    X = state.x.copy()[None, :]
    ok = _lmc_update(X, z, target, h, np.array([True]))
    if not ok[0]:
        return replace(state, rng=nxt, diverged=True)
    return ChainState(X[0], nxt, state.m + 1, state.elapsed + h, state.nominal_cost + d,
                      state.work_cost + target.gradient_cost_units)


def rc_index_sequence(dist, key, start_counter, n_steps):
    """Coordinates an RC-LMC chain draws over ``n_steps`` steps from ``start_counter``."""
    keys = np.array([key], dtype=np.uint64)
    out = np.empty(n_steps, dtype=np.intp)
    for s in range(n_steps):
        u = _rng.uniforms(keys, start_counter + s * RC_DRAWS, 1)[0, 0]
        out[s] = dist.index_for(u)
    return out


def replay_elapsed(dist, key, start_counter, n_steps):
    """Elapsed time recomputed from the replayed coordinate sequence."""
    idx = rc_index_sequence(dist, key, start_counter, n_steps)
    return math.fsum(dist.base_step / dist.probs[idx])


# --- exact reference chain for diagonal Gaussian targets -------------------

def ou_noise_law(lam, h):
    """Joint law of the Euler noise and the exact OU noise over one step.

    For ``dX = -lam X dt + sqrt(2) dB`` over a time step ``h`` the Euler
    scheme adds ``W = sqrt(2) B_h`` while the exact solution adds
    ``U = sqrt(2) int_0^h exp(-lam (h - s)) dB_s``.  Both are driven by the
    same Brownian path, so they are jointly Gaussian with

        Var W = 2 h,
        Cov(W, U) = 2 (1 - exp(-lam h)) / lam,
        Var U = (1 - exp(-2 lam h)) / lam.

    Returns ``(var_w, cov, var_u)``; works elementwise on arrays.
    """
    lam = np.asarray(lam, dtype=float)
    h = np.asarray(h, dtype=float)
    var_w = 2.0 * h
    cov = -2.0 * np.expm1(-lam * h) / lam
    var_u = -np.expm1(-2.0 * lam * h) / lam
    return var_w, cov, var_u


def _ou_loadings(lam, h):
    """Coefficients ``(a, c)`` with ``U = a z1 + c z2`` when ``W = sqrt(2h) z1``."""
    var_w, cov, var_u = ou_noise_law(lam, h)
    a = cov / np.sqrt(var_w)
    c = np.sqrt(np.maximum(var_u - a * a, 0.0))
    return a, c


def _require_diagonal(target):
    prec = getattr(target, "precision", None)
    if prec is None or np.any(prec - np.diag(np.diag(prec))):
        raise ValueError("coupled reference chain needs a diagonal quadratic target")
    return np.diag(prec), target.mean


def _coupled_update(X, Y, u, target, dist, lam, b):
    idx = dist.index_for(u[:, 0])
    z1, z2 = _rng.box_muller(u[:, 1], u[:, 2])
    step, _ = _rc_update(X, idx, z1, target, dist, np.ones(X.shape[0], dtype=bool))
    rows = np.arange(Y.shape[0])
    lr = lam[idx]
    a, c = _ou_loadings(lr, step)
    y = Y[rows, idx] - b[idx]
    Y[rows, idx] = b[idx] + np.exp(-lr * step) * y + a * z1 + c * z2
    return idx, step


def coupled_pair_step(states, target, dist):
    """Advance an (Euler, exact) pair by one shared-randomness step.

    The first chain takes the ordinary RC-LMC update; the second integrates
    the selected coordinate's OU dynamics exactly with the Brownian path
    shared with the first, so it stays distributed as the target.
    """
    lam, b = _require_diagonal(target)
    s1, s2 = states
    u = _rng.uniforms(np.array([s1.rng.key], dtype=np.uint64), s1.rng.counter, COUPLED_DRAWS)
    X = s1.x.copy()[None, :]
    Y = s2.x.copy()[None, :]
    idx, step = _coupled_update(X, Y, u, target, dist, lam, b)
    i, hs = int(idx[0]), float(step[0])
    nxt = replace(s1.rng, counter=s1.rng.counter + COUPLED_DRAWS)
    units = int(target.partial_cost_units[i])
    out1 = ChainState(X[0], nxt, s1.m + 1, s1.elapsed + hs, s1.nominal_cost + 1,
                      s1.work_cost + units)
    out2 = ChainState(Y[0], nxt, s2.m + 1, s2.elapsed + hs, s2.nominal_cost, s2.work_cost)
    return out1, out2


def run_coupled(target, dist, X0, Y0, n_iter, master_seed=0, start_counter=0):
    """Run ``len(X0)`` coupled pairs; returns ``|X^m - Y^m|^2`` of shape ``(n_iter + 1, N)``."""
    lam, b = _require_diagonal(target)
    X = np.array(X0, dtype=float)
    Y = np.array(Y0, dtype=float)
    keys = _rng.chain_keys(master_seed, np.arange(X.shape[0]))
    out = np.empty((n_iter + 1, X.shape[0]))
    out[0] = np.sum((X - Y) ** 2, axis=1)
    for s in range(n_iter):
        u = _rng.uniforms(keys, start_counter + s * COUPLED_DRAWS, COUPLED_DRAWS)
        _coupled_update(X, Y, u, target, dist, lam, b)
        out[s + 1] = np.sum((X - Y) ** 2, axis=1)
    return out


# --- ensembles ---------------------------------------------------------------

def snapshot_iterations(schedule, n_iter, cost_per_iter=1):
    """Iteration numbers at which an ensemble is recorded.

    ``{"geometric": r}``: 0, the distinct floors of ``r**k`` below ``n_iter``,
    and ``n_iter``.  ``{"every": n}``: multiples of ``n`` plus ``n_iter``.
    ``{"explicit": [...]}``: exactly the listed iterations.
    ``{"cost": [...]}``: iterations ``c // cost_per_iter`` for nominal costs ``c``.
    """
    if not isinstance(schedule, dict) or len(schedule) != 1:
        raise ValueError(f"bad snapshot schedule {schedule!r}")
    (kind, arg), = schedule.items()
    if kind == "geometric":
        r = float(arg)
        if not r > 1:
            raise ValueError("geometric ratio must exceed 1")
        its = {0, n_iter}
        v = 1.0
        while v < n_iter:
            its.add(int(v))
            v *= r
    elif kind == "every":
        n = int(arg)
        if n < 1:
            raise ValueError("snapshot spacing must be positive")
        its = set(range(0, n_iter + 1, n)) | {n_iter}
    elif kind == "explicit":
        its = {int(m) for m in arg}
    elif kind == "cost":
        its = {int(c) // int(cost_per_iter) for c in arg}
    else:
        raise ValueError(f"unknown snapshot schedule {kind!r}")
    its = sorted(its)
    if its and (its[0] < 0 or its[-1] > n_iter):
        raise ValueError(f"snapshot iterations must lie in [0, {n_iter}]")
    return np.array(its, dtype=np.int64)


def observable_key(obs):
    if isinstance(obs, str):
        return obs
    (name, arg), = obs.items()
    return f"{name}:{int(arg)}" if name == "psi_spectral" else name


def _scalar_observable(key, X):
    if key == "second_moment":
        return np.sum(X * X, axis=1)
    if key.startswith("psi_spectral:"):
        return psi_spectral_batch(X, int(key.split(":", 1)[1]))
    raise ValueError(f"unknown observable {key!r}")


def initial_states(init, target, keys):
    """Draw the initial iterate of each stream; consumes ``init_draws(d)`` draws."""
    d = target.dim
    z, _ = _rng.normals(keys, 0, d)
    if init in (None, "standard"):
        return z
    (kind, arg), = init.items()
    if kind == "point":
        x0 = np.broadcast_to(np.asarray(arg, dtype=float), (d,))
        return np.tile(x0, (len(keys), 1))
    if kind == "normal":
        mean = np.broadcast_to(np.asarray(arg.get("mean", 0.0), dtype=float), (d,))
        return mean + float(arg.get("scale", 1.0)) * z
    if kind == "target":
        if not hasattr(target, "sample_exact"):
            raise ValueError(f"{type(target).__name__} cannot be sampled exactly")
        shift = np.broadcast_to(np.asarray(arg.get("shift", 0.0), dtype=float), (d,))
        return target.sample_exact(z) + shift
    raise ValueError(f"unknown initial distribution {kind!r}")


@dataclass
class EnsembleRecord:
    """Snapshots of an ensemble run.

    Per-chain arrays have shape ``(n_snapshots, N)``; diverged chains are
    NaN in ``scalars`` from the first snapshot after they diverged.
    """

    method: str
    dim: int
    iterations: np.ndarray
    nominal_cost: np.ndarray
    elapsed: np.ndarray
    work_cost: np.ndarray
    scalars: dict
    mean_sum: np.ndarray
    mean_sumsq: np.ndarray
    valid_count: np.ndarray
    diverged: np.ndarray
    final_states: np.ndarray
    states: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_chains(self):
        return self.diverged.size

    @property
    def n_diverged(self):
        return int(self.diverged.sum())

    def summary(self, key):
        """Per-snapshot ``(mean, standard error)`` of a scalar observable over valid chains."""
        vals = self.scalars[key]
        n = np.sum(np.isfinite(vals), axis=1)
        mean = np.nanmean(vals, axis=1)
        sd = np.nanstd(vals, axis=1, ddof=1) if vals.shape[1] > 1 else np.zeros(len(n))
        return mean, sd / np.sqrt(n)

    @property
    def mean(self):
        return self.mean_sum / self.valid_count[:, None]

    @property
    def mean_se(self):
        n = self.valid_count[:, None]
        var = (self.mean_sumsq - self.mean_sum ** 2 / n) / np.maximum(n - 1, 1)
        return np.sqrt(np.maximum(var, 0.0) / n)

    def mean_elapsed(self):
        return np.nanmean(np.where(self.diverged[None, :], np.nan, self.elapsed), axis=1)

    def mean_work_cost(self):
        return np.nanmean(np.where(self.diverged[None, :], np.nan, self.work_cost), axis=1)


def _run_chunk(config, target, dist, snaps, chains, keep_states):
    d = target.dim
    n = len(chains)
    keys = _rng.chain_keys(config.seed, chains)
    X = np.array(initial_states(config.init, target, keys), dtype=float)
    active = np.all(np.isfinite(X), axis=1)
    elapsed = np.zeros(n)
    work = np.zeros(n, dtype=np.int64)
    counter = init_draws(d)
    s_count = len(snaps)
    scalar_keys = [k for k in map(observable_key, config.observables) if k != "mean"]
    scalars = {k: np.empty((s_count, n)) for k in scalar_keys}
    el_rec = np.empty((s_count, n))
    wk_rec = np.empty((s_count, n))
    msum = np.zeros((s_count, d))
    msq = np.zeros((s_count, d))
    cnt = np.zeros(s_count, dtype=np.int64)
    states = np.empty((s_count, n, d)) if keep_states else None
    units = target.partial_cost_units
    grad_units = target.gradient_cost_units
    h = config.h
    rc = config.method == "rclmc"
    per_step = RC_DRAWS if rc else lmc_draws(d)

    def record(j):
        for k in scalar_keys:
            v = _scalar_observable(k, X)
            v[~active] = np.nan
            scalars[k][j] = v
        el_rec[j] = elapsed
        wk_rec[j] = work
        xa = X[active]
        msum[j] = xa.sum(axis=0)
        msq[j] = (xa * xa).sum(axis=0)
        cnt[j] = xa.shape[0]
        if keep_states:
            states[j] = X

    j = 0
    n_iter = int(config.M)
    for step in range(n_iter + 1):
        while j < s_count and snaps[j] == step:
            record(j)
            j += 1
        if step == n_iter:
            break
        if rc:
            u = _rng.uniforms(keys, counter, RC_DRAWS)
            idx = dist.index_for(u[:, 0])
            xi = _rng.box_muller_cos(u[:, 1], u[:, 2])
            hs, ok = _rc_update(X, idx, xi, target, dist, active)
            elapsed[ok] += hs[ok]
            work[ok] += units[idx[ok]]
        else:
            z, _ = _rng.normals(keys, counter, d)
            ok = _lmc_update(X, z, target, h, active)
            elapsed[ok] += h
            work[ok] += grad_units
        active = ok
        counter += per_step
    return scalars, el_rec, wk_rec, msum, msq, cnt, ~active, X, states


def run_ensemble(config, target, threads=1, keep_states=False, chunk_size=CHUNK_SIZE):
    """Run ``config.N`` independent chains for ``config.M`` iterations.

    Output depends only on the configuration (and ``chunk_size``), never on
    ``threads``.
    """
    from .schedule import parse_phi_spec

    if config.method not in ("rclmc", "lmc"):
        raise ValueError(f"unknown method {config.method!r}")
    d = target.dim
    dist = parse_phi_spec(config.phi, target, config.h) if config.method == "rclmc" else None
    unit = 1 if config.method == "rclmc" else d
    snaps = snapshot_iterations(config.snapshots, config.M, unit)
    chunks = [np.arange(s, min(s + chunk_size, config.N)) for s in range(0, config.N, chunk_size)]

    def work(ch):
        return _run_chunk(config, target, dist, snaps, ch, keep_states)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(ch) for ch in chunks]

    keys = parts[0][0].keys()
    scalars = {k: np.concatenate([p[0][k] for p in parts], axis=1) for k in keys}
    msum = parts[0][3].copy()
    msq = parts[0][4].copy()
    cnt = parts[0][5].copy()
    for p in parts[1:]:
        msum += p[3]
        msq += p[4]
        cnt += p[5]
    return EnsembleRecord(
        method=config.method,
        dim=d,
        iterations=snaps,
        nominal_cost=snaps * unit,
        elapsed=np.concatenate([p[1] for p in parts], axis=1),
        work_cost=np.concatenate([p[2] for p in parts], axis=1),
        scalars=scalars,
        mean_sum=msum,
        mean_sumsq=msq,
        valid_count=cnt,
        diverged=np.concatenate([p[6] for p in parts]),
        final_states=np.concatenate([p[7] for p in parts]),
        states=np.concatenate([p[8] for p in parts], axis=1) if keep_states else None,
        meta={"chunk_size": chunk_size},
    )
