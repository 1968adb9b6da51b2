"""Counter-based random streams.

Every random quantity in the package is a pure function of
``(seed, stream index, counter)``: a stream key is derived from the seed and
a stream index by hashing, and the i-th draw of a stream is the SplitMix64
finalizer applied to ``key + (i + 1) * golden``.  Trials therefore never share
state, and running them in any order (or on any number of workers) yields
the same samples.

The kernels below are numba-compiled so the Monte Carlo loops can call them
directly; they are also callable from plain Python.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_STREAM_MUL = np.uint64(0xD1B54A32D192ED03)
_SEED_SALT = np.uint64(0x243F6A8885A308D3)
_MASK64 = (1 << 64) - 1
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def stream_key(parent, index):
    """Key of child stream ``index`` under ``parent`` (a seed or another key)."""
    a = mix64(np.uint64(parent) ^ _SEED_SALT)
    return mix64(a + (np.uint64(index) + np.uint64(1)) * _STREAM_MUL)


@njit(cache=True)
def draw_u64(key, ctr):
    # ctr is a non-negative int64; keep it signed so callers can do ctr += 1
    return mix64(np.uint64(key) + (np.uint64(ctr) + np.uint64(1)) * _GOLDEN)


@njit(cache=True)
def draw_uniform(key, ctr):
    """Uniform double in [0, 1) with 53 random bits."""
    return float(draw_u64(key, ctr) >> np.uint64(11)) * _INV53


@njit(cache=True)
def draw_below(key, ctr, bound):
    """Unbiased integer in [0, bound) by rejection; returns (value, next counter)."""
    b = np.uint64(bound)
    # 2**64 mod b, computed without overflowing
    rem = (np.uint64(0) - b) % b
    limit = np.uint64(0) - rem  # accept x < limit; limit == 0 means accept all
    while True:
        x = draw_u64(key, ctr)
        ctr += 1
        if rem == np.uint64(0) or x < limit:
            return np.int64(x % b), ctr


@njit(cache=True)
def draw_exponential(key, ctr, rate):
    u = draw_uniform(key, ctr)
    return -math.log1p(-u) / rate


def _as_u64(x: int) -> np.uint64:
    return np.uint64(int(x) & _MASK64)


class Stream:
    """A seeded, counter-based random stream.

    ``Stream(seed)`` is the root; ``stream.spawn(i)`` derives an independent
    child (used per trial).  The ``key``/``counter`` pair is what numba
    kernels consume; after a kernel runs, advance ``counter`` by what it used.
    """

    __slots__ = ("seed", "path", "key", "counter")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed) & _MASK64
        self.path = tuple(int(i) for i in path)
        key = _as_u64(self.seed)
        for i in self.path:
            key = np.uint64(stream_key(key, _as_u64(i)))
        self.key = np.uint64(key)
        self.counter = 0

    def spawn(self, index: int) -> "Stream":
        return Stream(self.seed, self.path + (index,))

    def next_u64(self) -> int:
        x = draw_u64(self.key, np.int64(self.counter))
        self.counter += 1
        return int(x)

    def uniform(self) -> float:
        u = draw_uniform(self.key, np.int64(self.counter))
        self.counter += 1
        return float(u)

    def below(self, bound: int) -> int:
        v, ctr = draw_below(self.key, np.int64(self.counter), np.int64(bound))
        self.counter = int(ctr)
        return int(v)

    def exponential(self, rate: float) -> float:
        return -math.log1p(-self.uniform()) / rate

    def numpy(self) -> np.random.Generator:
        """A numpy Generator seeded from this stream (for bootstrap resampling)."""
        return np.random.Generator(np.random.Philox(key=int(self.key)))

    def __repr__(self) -> str:
        return f"Stream(seed={self.seed}, path={self.path}, counter={self.counter})"


def as_stream(rng) -> Stream:
    """Accept a Stream or an integer seed."""
    if isinstance(rng, Stream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return Stream(int(rng))
    raise TypeError(f"expected Stream or int seed, got {type(rng).__name__}")
