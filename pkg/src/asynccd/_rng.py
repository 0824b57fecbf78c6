"""Counter-keyed random streams.

Every random decision in the solvers is a pure function of ``(seed, stream,
counter)``.  The sequential solver, the simulator and the threaded runtime
therefore draw the same coordinate for the same update index, regardless of
how the surrounding loop is organised.
"""
from __future__ import annotations

import numpy as np
from numba import njit, uint64

STREAM_COORD = 0
STREAM_STALE = 1
STREAM_SPAN = 2

_GOLDEN = uint64(0x9E3779B97F4A7C15)
_M1 = uint64(0xBF58476D1CE4E5B9)
_M2 = uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True)
def mix64(z):
    # splitmix64 finalizer
    z = uint64(z)
    z = (z ^ (z >> uint64(30))) * _M1
    z = (z ^ (z >> uint64(27))) * _M2
    return z ^ (z >> uint64(31))


@njit(cache=True, nogil=True)
def key(seed, stream, counter):
    h = mix64(uint64(seed) + _GOLDEN * uint64(stream + 1))
    return mix64(h ^ (uint64(counter) * _GOLDEN + uint64(0x632BE59BD9B4E019)))


@njit(cache=True, nogil=True)
def subkey(k, a):
    return mix64(uint64(k) ^ (uint64(a) * _M1 + _GOLDEN))


@njit(cache=True, nogil=True)
def unit(k):
    """Map a 64-bit key to a float in [0, 1)."""
    return float(uint64(k) >> uint64(11)) * _INV53


@njit(cache=True, nogil=True)
def below(k, n):
    """Map a 64-bit key to an integer in [0, n)."""
    i = int(unit(k) * n)
    return i if i < n else n - 1


@njit(cache=True, nogil=True)
def coord_for(seed, t, n):
    return below(key(seed, STREAM_COORD, t), n)


def coordinate_stream(seed: int, T: int, n: int) -> np.ndarray:
    """Coordinates chosen by updates 0..T-1 for the given seed."""
    return _coords(np.uint64(seed), T, n)


@njit(cache=True)
def _coords(seed, T, n):
    out = np.empty(T, np.int64)
    for t in range(T):
        out[t] = coord_for(seed, t, n)
    return out
