"""Counter-keyed random streams for replica simulations.

Each replica gets its own xoshiro256++ stream whose state is derived from
(master seed, replica index) through splitmix64 mixing.  Streams are
therefore reproducible, independent of execution order, and usable inside
numba kernels where numpy Generator objects are not available.
"""

import numpy as np
from numba import njit

_U64 = np.uint64
_SM_GAMMA = _U64(0x9E3779B97F4A7C15)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _sm_mix(z):
    # splitmix64 finalizer
    z ^= z >> _U64(30)
    z *= _U64(0xBF58476D1CE4E5B9)
    z ^= z >> _U64(27)
    z *= _U64(0x94D049BB133111EB)
    z ^= z >> _U64(31)
    return z


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << _U64(k)) | (x >> (_U64(64) - _U64(k)))


@njit(cache=True)
def stream_init(seed, replica):
    """State vector (4 uint64) for the stream keyed by (seed, replica)."""
    st = np.empty(4, np.uint64)
    x = _sm_mix(_U64(seed)) ^ _sm_mix(~_U64(replica))
    for i in range(4):
        x = x + _SM_GAMMA
        st[i] = _sm_mix(x)
    if st[0] == 0 and st[1] == 0 and st[2] == 0 and st[3] == 0:
        st[0] = _U64(1)
    return st


@njit(cache=True, inline="always")
def next_u64(st):
    # xoshiro256++ step, mutates st in place
    s0, s1, s2, s3 = st[0], st[1], st[2], st[3]
    res = _rotl(s0 + s3, 23) + s0
    t = s1 << _U64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    st[0] = s0
    st[1] = s1
    st[2] = s2
    st[3] = s3
    return res


@njit(cache=True, inline="always")
def next_unit(st):
    """Uniform double in [0, 1) with 53 random bits."""
    return (next_u64(st) >> _U64(11)) * _INV_2_53


@njit(cache=True)
def _fill_units(st, out):
    for i in range(out.shape[0]):
        out[i] = next_unit(st)


class RandomStream:
    """Thin Python handle on a (seed, replica)-keyed stream.

    The same state layout is consumed by the simulation kernels, so a
    trajectory driven step-by-step through this object reproduces the
    bulk kernels draw for draw.
    """

    def __init__(self, seed, replica=0):
        self.seed = int(seed)
        self.replica = int(replica)
        self.state = stream_init(self.seed, self.replica)

    def uniform(self, size=None):
        if size is None:
            return next_unit(self.state)
        out = np.empty(int(size), dtype=np.float64)
        _fill_units(self.state, out)
        return out

    def exponential(self, rate=1.0):
        if rate <= 0.0:
            raise ValueError("rate must be positive")
        return -np.log1p(-next_unit(self.state)) / rate
