"""Counter-based random source.

Every random number is a pure function of ``(seed, stream, iteration, b, n, k, d)``.
The tuple is absorbed field by field through a SplitMix64 finalizer, so draws
do not depend on the order in which they are requested or on which worker
asks for them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numba
import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / float(1 << 53)


class Stream(enum.IntEnum):
    """Role of a random draw; part of every key."""

    INIT = 1
    EXPLODE = 2
    MAPPING = 3
    GUIDE = 4
    REINIT = 5
    WEIGHTS = 6


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def _absorb(h: np.ndarray, values) -> np.ndarray:
    v = np.asarray(values, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(h ^ _mix(v + _GOLDEN))


def _to_unit(h: np.ndarray) -> np.ndarray:
    return (h >> np.uint64(11)).astype(np.float64) * _INV_2_53


def _prefix(seed: int, stream: Stream, iteration: int) -> np.ndarray:
    h = _mix(np.array([seed & _MASK], dtype=np.uint64))
    h = _absorb(h, [int(stream)])
    return _absorb(h, [iteration & _MASK])


@dataclass(frozen=True)
class RngKey:
    """Full coordinate of one scalar draw."""

    seed: int
    stream: Stream
    iteration: int
    b: int = 0
    n: int = 0
    k: int = 0
    d: int = 0

    def unit(self) -> float:
        """Value in [0, 1) for this key."""
        return float(uniform_grid(self.seed, self.stream, self.iteration,
                                  [self.b], [self.n], [self.k], [self.d])[0, 0, 0, 0])


@numba.njit(cache=True, nogil=True)
def _mix_scalar(z):
    z = (z ^ (z >> numba.uint64(30))) * numba.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> numba.uint64(27))) * numba.uint64(0x94D049BB133111EB)
    return z ^ (z >> numba.uint64(31))


@numba.njit(cache=True, nogil=True)
def _absorb_scalar(h, v):
    return _mix_scalar(h ^ _mix_scalar(v + numba.uint64(0x9E3779B97F4A7C15)))


@numba.njit(cache=True, nogil=True)
def _grid_kernel(prefix, bs, ns, ks, ds):
    out = np.empty((bs.size, ns.size, ks.size, ds.size))
    md = np.empty(ds.size, dtype=np.uint64)
    for m in range(ds.size):
        md[m] = _mix_scalar(ds[m] + numba.uint64(0x9E3779B97F4A7C15))
    scale = 1.0 / 9007199254740992.0
    for i in range(bs.size):
        hb = _absorb_scalar(prefix, bs[i])
        for j in range(ns.size):
            hn = _absorb_scalar(hb, ns[j])
            for l in range(ks.size):
                hk = _absorb_scalar(hn, ks[l])
                for m in range(ds.size):
                    h = _mix_scalar(hk ^ md[m])
                    out[i, j, l, m] = float(h >> numba.uint64(11)) * scale
    return out


def _index_array(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.int64).reshape(-1).astype(np.uint64))


def uniform_grid(seed: int, stream: Stream, iteration: int, b, n, k, d) -> np.ndarray:
    """Uniform [0, 1) draws for the outer product of coordinate index lists.

    Returns an array of shape ``(len(b), len(n), len(k), len(d))`` whose entry
    ``[i, j, l, m]`` is the draw for key ``(seed, stream, iteration, b[i], n[j],
    k[l], d[m])``. The value of an entry does not depend on which other indices
    are requested alongside it.
    """
    prefix = _prefix(seed, stream, iteration)[0]
    return _grid_kernel(prefix, _index_array(b), _index_array(n), _index_array(k), _index_array(d))


def _uniform_grid_numpy(seed: int, stream: Stream, iteration: int, b, n, k, d) -> np.ndarray:
    # Vectorized reference for the compiled kernel; kept for cross-checking.
    h = _prefix(seed, stream, iteration).reshape(1, 1, 1, 1)
    h = _absorb(h, np.asarray(b).reshape(-1, 1, 1, 1))
    h = _absorb(h, np.asarray(n).reshape(1, -1, 1, 1))
    h = _absorb(h, np.asarray(k).reshape(1, 1, -1, 1))
    h = _absorb(h, np.asarray(d).reshape(1, 1, 1, -1))
    return _to_unit(h)


def uniform_block(seed: int, stream: Stream, iteration: int, shape: tuple[int, int, int, int],
                  k_offset: int = 0) -> np.ndarray:
    """Draws for the dense block ``b < B, n < N, k_offset <= k < k_offset + K, d < D``."""
    nb, nn, nk, nd = shape
    return uniform_grid(seed, stream, iteration, np.arange(nb), np.arange(nn),
                        np.arange(k_offset, k_offset + nk), np.arange(nd))


def uniform_sample(key: RngKey, lo: float, hi: float) -> float:
    """``lo + u * (hi - lo)`` with ``u`` in [0, 1) determined by ``key``."""
    if not lo <= hi:
        raise ValueError(f"uniform_sample requires lo <= hi, got lo={lo}, hi={hi}")
    if lo == hi:
        return float(lo)
    return float(min(lo + key.unit() * (hi - lo), hi))
