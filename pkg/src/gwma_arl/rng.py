"""Counter-based normal variates for per-replicate simulation streams.

Replicate ``r`` under master seed ``s`` owns the key ``mix64(s ^ mix64(r + 1))``;
its ``n``-th uniform is ``mix64(key + n * GAMMA)`` (the SplitMix64 output
function evaluated at an explicit counter), so any replicate can be generated
in isolation and in any order.  Normals come from the inverse normal CDF.
"""

from __future__ import annotations

import ctypes

import numba as nb
import numpy as np
from numba.extending import get_cython_function_address

RNG_ID = "splitmix64-counter/inverse-cdf(scipy ndtri)"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO_M53 = 1.0 / 9007199254740992.0

_ndtri = ctypes.CFUNCTYPE(ctypes.c_double, ctypes.c_double)(
    get_cython_function_address("scipy.special.cython_special", "ndtri"))


@nb.njit(inline="always", cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(inline="always", cache=True)
def stream_key(seed, replicate):
    return mix64(np.uint64(seed) ^ mix64(np.uint64(replicate) + _ONE))


@nb.njit(inline="always", cache=True)
def uniform_at(key, counter):
    """Uniform on the open interval (0, 1) for draw number ``counter`` (1-based)."""
    x = mix64(key + np.uint64(counter) * _GAMMA)
    return (np.float64(x >> _S11) + 0.5) * _TWO_M53


@nb.njit(inline="always")
def normal_at(key, counter):
    return _ndtri(uniform_at(key, counter))


@nb.njit
def _normals(seed, replicate, n, out):
    key = stream_key(np.uint64(seed), np.uint64(replicate))
    for k in range(n):
        out[k] = normal_at(key, k + 1)


def replicate_normals(seed: int, replicate: int, n: int) -> np.ndarray:
    """The first ``n`` standard normals of one replicate's stream."""
    out = np.empty(n)
    _normals(np.uint64(seed), np.uint64(replicate), n, out)
    return out


class ReplicateStream:
    """Handle on replicate ``replicate``'s stream under master seed ``seed``."""

    __slots__ = ("seed", "replicate")

    def __init__(self, seed: int, replicate: int = 0):
        if not (0 <= seed < 2**64) or not (0 <= replicate < 2**64):
            raise ValueError("seed and replicate must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.replicate = int(replicate)

    def normals(self, n: int) -> np.ndarray:
        return replicate_normals(self.seed, self.replicate, n)

    def __repr__(self):
        return f"ReplicateStream(seed={self.seed}, replicate={self.replicate})"
