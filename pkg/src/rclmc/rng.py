"""Counter-based random streams, one per chain.

Each chain owns a 64-bit key.  Draw number ``n`` of that chain is
``mix64(key + (n + 1) * GOLDEN)``, i.e. the SplitMix64 sequence seeded with
the key, which can be evaluated for any ``n`` without touching earlier draws.
This is what makes ensemble output independent of how chains are batched or
scheduled over threads.

Chain keys are derived from ``(master_seed, chain)`` by

    key = mix64(mix64(master_seed ^ SEED_SALT) + (chain + 1) * GOLDEN)

Uniforms use the top 53 bits and are offset by half an ulp so they lie in the
open interval (0, 1).  Gaussians come from the Box-Muller transform, two
uniforms per pair of normals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
SEED_SALT = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


def mix64(z):
    """SplitMix64 finalizer applied elementwise to a ``uint64`` array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def chain_keys(master_seed, chains):
    """Keys for the given chain indices under ``master_seed``."""
    seed = np.uint64(int(master_seed) & 0xFFFFFFFFFFFFFFFF)
    base = mix64(np.array([seed ^ SEED_SALT], dtype=np.uint64))[0]
    idx = np.asarray(chains, dtype=np.uint64) + np.uint64(1)
    with np.errstate(over="ignore"):
        return mix64(base + idx * GOLDEN)


def _uniforms_numpy(keys, counter, k):
    offs = np.arange(int(counter) + 1, int(counter) + k + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = mix64(keys[:, None] + offs[None, :] * GOLDEN)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53


try:  # integer-only kernel, so the compiled path is bit-identical to numpy
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

if _numba is not None:
    @_numba.njit(cache=True, nogil=True)
    def _uniforms_kernel(keys, counter, k, out):
        g = np.uint64(0x9E3779B97F4A7C15)
        m1 = np.uint64(0xBF58476D1CE4E5B9)
        m2 = np.uint64(0x94D049BB133111EB)
        for i in range(keys.size):
            for j in range(k):
                z = keys[i] + np.uint64(counter + j + 1) * g
                z = (z ^ (z >> np.uint64(30))) * m1
                z = (z ^ (z >> np.uint64(27))) * m2
                z = z ^ (z >> np.uint64(31))
                out[i, j] = (np.float64(z >> np.uint64(11)) + 0.5) * 1.1102230246251565e-16
else:
    _uniforms_kernel = None


def uniforms(keys, counter, k, backend=None):
    """Draws ``counter .. counter + k - 1`` of each stream as open-(0,1) floats.

    Returns an array of shape ``(len(keys), k)``.  ``backend`` forces
    ``"numpy"`` or ``"numba"``; both give identical bits.
    """
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    if backend == "numpy" or (backend is None and _uniforms_kernel is None):
        return _uniforms_numpy(keys, counter, k)
    out = np.empty((keys.size, k))
    _uniforms_kernel(keys, int(counter), int(k), out)
    return out


def box_muller(u1, u2):
    """Pair of independent standard normals from two uniform arrays."""
    r = np.sqrt(-2.0 * np.log(u1))
    theta = _TWO_PI * u2
    return r * np.cos(theta), r * np.sin(theta)


def box_muller_cos(u1, u2):
    """First normal of the Box-Muller pair only."""
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def normals(keys, counter, k):
    """``k`` standard normals per stream; consumes ``2 * ceil(k / 2)`` draws.

    Returns ``(values, n_consumed)`` with values of shape ``(len(keys), k)``.
    """
    pairs = (k + 1) // 2
    u = uniforms(keys, counter, 2 * pairs)
    c, s = box_muller(u[:, 0::2], u[:, 1::2])
    out = np.empty((u.shape[0], 2 * pairs))
    out[:, 0::2] = c
    out[:, 1::2] = s
    return out[:, :k], 2 * pairs


@dataclass(frozen=True)
class RngState:
    """Position in a single chain's stream."""

    key: int
    counter: int = 0

    @classmethod
    def for_chain(cls, master_seed, chain=0):
        return cls(int(chain_keys(master_seed, [chain])[0]), 0)

    def _keys(self):
        return np.array([self.key], dtype=np.uint64)

    def uniform(self, k=1):
        """Return ``(values, next_state)`` for ``k`` uniforms."""
        u = uniforms(self._keys(), self.counter, k)[0]
        return u, RngState(self.key, self.counter + k)

    def normal(self, k=1):
        """Return ``(values, next_state)`` for ``k`` standard normals."""
        z, used = normals(self._keys(), self.counter, k)
        return z[0], RngState(self.key, self.counter + used)
