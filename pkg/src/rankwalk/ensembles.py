"""Samplers for the block bidiagonal ensembles.

Variants (n x n blocks, k >= 1):

* ``OddC``      C_{2k-1}: k x k blocks, A_{i,i} and A_{i+1,i} uniform.
* ``EvenC``     C_{2k}: (k+1) x k blocks.
* ``TruncatedC`` Ĉ_{2k}: C_{2(k+1)} with its first n/2 and last n/2 rows
  deleted, a (k+1)n x (k+1)n matrix (n even).
* ``ProductC``  C'_{2k-1}: like OddC but every subdiagonal block is I.

Random blocks come from a counter-based stream, in feed order (A11, A21, A22,
A32, ...; ProductC draws only the diagonal blocks), each block row by row.
For q = 2 every row consumes ceil(n/64) 64-bit draws and column j is bit
j mod 64 of draw j // 64; for other q every entry is one rejection-sampled
draw.  Trial ``t`` of seed ``s`` uses ``Stream(s).spawn(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from .fmat import FqMatrix, _matmul, _rref_gen, _rref_gf2, _stream_gen, _stream_gf2
from .gf import as_field
from .rng import Stream, as_stream, draw_below, draw_u64, stream_key


class InvalidSpec(ValueError):
    pass


class Variant(str, Enum):
    ODD = "OddC"
    EVEN = "EvenC"
    TRUNCATED = "TruncatedC"
    PRODUCT = "ProductC"


_VARIANT_CODE = {Variant.ODD: 0, Variant.EVEN: 1, Variant.TRUNCATED: 2, Variant.PRODUCT: 3}


@dataclass(frozen=True)
class EnsembleSpec:
    variant: Variant
    n: int
    k: int
    q: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        self.validate()

    def validate(self):
        if self.n < 1:
            raise InvalidSpec(f"block size must be >= 1, got n={self.n}")
        if self.k < 1:
            raise InvalidSpec(f"block count must be >= 1, got k={self.k}")
        if self.variant is Variant.TRUNCATED and self.n % 2:
            raise InvalidSpec(f"TruncatedC needs an even block size, got n={self.n}")
        as_field(self.q)

    @property
    def shape(self) -> tuple[int, int]:
        n, k = self.n, self.k
        return {
            Variant.ODD: (k * n, k * n),
            Variant.EVEN: ((k + 1) * n, k * n),
            Variant.TRUNCATED: ((k + 1) * n, (k + 1) * n),
            Variant.PRODUCT: (k * n, k * n),
        }[self.variant]

    @property
    def drawn_blocks(self) -> int:
        k = self.k
        return {Variant.ODD: 2 * k - 1, Variant.EVEN: 2 * k,
                Variant.TRUNCATED: 2 * k + 2, Variant.PRODUCT: k}[self.variant]


# ---------------------------------------------------------------------------
# block generation

@njit(cache=True)
def _gen_blocks_gf2(key, ctr, nb, n):
    words = (n + 63) // 64
    out = np.zeros((nb, n, words), dtype=np.uint64)
    for b in range(nb):
        for i in range(n):
            for w in range(words):
                x = draw_u64(key, ctr)
                ctr += 1
                nbits = min(64, n - 64 * w)
                if nbits < 64:
                    x &= (np.uint64(1) << np.uint64(nbits)) - np.uint64(1)
                out[b, i, w] = x
    return out, ctr


@njit(cache=True)
def _unpack_blocks(bits, n):
    nb = bits.shape[0]
    out = np.zeros((nb, n, n), dtype=np.int64)
    one = np.uint64(1)
    for b in range(nb):
        for i in range(n):
            for j in range(n):
                out[b, i, j] = np.int64((bits[b, i, j >> 6] >> np.uint64(j & 63)) & one)
    return out


@njit(cache=True)
def _gen_blocks_gen(key, ctr, nb, n, q):
    out = np.zeros((nb, n, n), dtype=np.int64)
    for b in range(nb):
        for i in range(n):
            for j in range(n):
                v, ctr = draw_below(key, ctr, q)
                out[b, i, j] = v
    return out, ctr


def sample_blocks(n: int, count: int, q, rng) -> np.ndarray:
    """``count`` uniform n x n blocks as a (count, n, n) int64 array."""
    s = as_stream(rng)
    F = as_field(q)
    if F.q == 2:
        bits, ctr = _gen_blocks_gf2(s.key, np.int64(s.counter), count, n)
        blocks = _unpack_blocks(bits, n)
    else:
        blocks, ctr = _gen_blocks_gen(s.key, np.int64(s.counter), count, n, F.q)
    s.counter = int(ctr)
    return blocks


@njit(cache=True)
def _identity_feed(diag, n):
    k = diag.shape[0]
    out = np.zeros((max(2 * k - 1, 0), n, n), dtype=diag.dtype)
    for i in range(k):
        out[2 * i] = diag[i]
        if i + 1 < k:
            for j in range(n):
                out[2 * i + 1, j, j] = 1
    return out


@njit(cache=True)
def _assemble(blocks, n, j):
    """Dense C_j from the first j blocks of a feed."""
    cols = (j + 1) // 2
    rows = j // 2 + 1
    M = np.zeros((rows * n, cols * n), dtype=np.int64)
    for b in range(j):
        if b % 2 == 0:
            i = b // 2
            M[i * n:(i + 1) * n, i * n:(i + 1) * n] = blocks[b]
        else:
            i = (b + 1) // 2
            M[i * n:(i + 1) * n, (i - 1) * n:i * n] = blocks[b]
    return M


def materialize_prefix(blocks: np.ndarray, n: int, j: int, q) -> FqMatrix:
    """C_j assembled from a block feed (A11, A21, A22, ...)."""
    if j < 1 or j > len(blocks):
        raise InvalidSpec(f"prefix length {j} outside [1, {len(blocks)}]")
    return FqMatrix(as_field(q), _assemble(np.asarray(blocks, dtype=np.int64), n, j))


def feed_for(spec: EnsembleSpec, blocks: np.ndarray) -> np.ndarray:
    """Block feed of the full (untruncated) matrix behind ``spec``."""
    if spec.variant is Variant.PRODUCT:
        return _identity_feed(np.asarray(blocks, dtype=np.int64), spec.n)
    return np.asarray(blocks, dtype=np.int64)


def _build(spec: EnsembleSpec, blocks: np.ndarray) -> np.ndarray:
    n, k = spec.n, spec.k
    feed = feed_for(spec, blocks)
    if spec.variant is Variant.TRUNCATED:
        m = n // 2
        full = _assemble(feed, n, 2 * k + 2)
        return full[m:full.shape[0] - m]
    j = 2 * k if spec.variant is Variant.EVEN else 2 * k - 1
    return _assemble(feed, n, j)


def sample_ensemble(spec: EnsembleSpec, rng=None) -> FqMatrix:
    """One matrix of the ensemble; ``rng`` defaults to ``Stream(spec.seed)``."""
    spec.validate()
    s = Stream(spec.seed) if rng is None else as_stream(rng)
    blocks = sample_blocks(spec.n, spec.drawn_blocks, spec.q, s)
    return FqMatrix(as_field(spec.q), _build(spec, blocks))


def sample_trial(spec: EnsembleSpec, trial: int) -> FqMatrix:
    return sample_ensemble(spec, Stream(spec.seed).spawn(trial))


def product_corank_identity_check(n: int, k: int, q, rng=None, blocks=None) -> bool:
    """Draw A'_{11}, ..., A'_{kk} once and compare dim ker C'_{2k-1} with
    dim ker of the product A'_{11} A'_{22} ... A'_{kk}."""
    F = as_field(q)
    if blocks is None:
        blocks = sample_blocks(n, k, F, as_stream(0 if rng is None else rng))
    blocks = np.asarray(blocks, dtype=np.int64).reshape(k, n, n)
    C = FqMatrix(F, _assemble(_identity_feed(blocks, n), n, 2 * k - 1))
    prod = blocks[0]
    for b in blocks[1:]:
        prod = _matmul(prod, b, F.kind, F.p, F.q, F.tables)
    return C.corank() == FqMatrix(F, prod).corank()


# ---------------------------------------------------------------------------
# batched Monte Carlo

@njit(cache=True)
def _corank_from_incs(incs, n, k, code):
    if code == 1:  # C_{2k}
        tot = 0
        for x in incs[:2 * k]:
            tot += x
        return k * n - tot
    # C_{2k-1} and C'_{2k-1}
    tot = 0
    for x in incs[:2 * k - 1]:
        tot += x
    return k * n - tot


@njit(cache=True)
def _pack_rows(E):
    rows, cols = E.shape
    words = max(1, (cols + 63) // 64)
    out = np.zeros((rows, words), dtype=np.uint64)
    one = np.uint64(1)
    for i in range(rows):
        for j in range(cols):
            if E[i, j]:
                out[i, j >> 6] |= one << np.uint64(j & 63)
    return out


@njit(cache=True)
def _dense_rank(E, q, kind, p, T):
    if q == 2:
        r, _ = _rref_gf2(_pack_rows(E), E.shape[1], False)
    else:
        r, _ = _rref_gen(E.copy(), kind, p, q, T, False)
    return r


@njit(cache=True)
def _mc_coranks(code, root, trial0, trials, n, k, q, kind, p, T):
    out = np.empty(trials, dtype=np.int64)
    if code == 0:
        nb = 2 * k - 1
    elif code == 1:
        nb = 2 * k
    elif code == 2:
        nb = 2 * k + 2
    else:
        nb = k
    m = n // 2
    for t in range(trials):
        key = stream_key(root, trial0 + t)
        if q == 2:
            bits, _ = _gen_blocks_gf2(key, 0, nb, n)
            if code == 2 or n > 64 or code == 3:
                blocks = _unpack_blocks(bits, n)
            else:
                blocks = np.zeros((1, 1, 1), dtype=np.int64)
        else:
            blocks, _ = _gen_blocks_gen(key, 0, nb, n, q)
            bits = np.zeros((1, 1, 1), dtype=np.uint64)
        if code == 2:
            full = _assemble(blocks, n, 2 * k + 2)
            E = full[m:full.shape[0] - m]
            out[t] = E.shape[1] - _dense_rank(E, q, kind, p, T)
            continue
        if code == 3:
            feed = _identity_feed(blocks, n)
            if q == 2 and n <= 64:
                bits = np.zeros((feed.shape[0], n, 1), dtype=np.uint64)
                for b in range(feed.shape[0]):
                    bits[b] = _pack_rows(feed[b])
                incs = _stream_gf2(bits[:, :, 0].copy(), n)
            else:
                incs = _stream_gen(feed, n, kind, p, q, T)
        elif q == 2 and n <= 64:
            incs = _stream_gf2(bits[:, :, 0].copy(), n)
        else:
            incs = _stream_gen(blocks, n, kind, p, q, T)
        out[t] = _corank_from_incs(incs, n, k, code)
    return out


def mc_coranks(spec: EnsembleSpec, trials: int, first_trial: int = 0) -> np.ndarray:
    """Coranks of trials ``first_trial .. first_trial + trials - 1``.

    Full ensembles go through the streaming engine, the truncated one through
    dense elimination; the matrices are exactly those of :func:`sample_trial`.
    """
    spec.validate()
    F = as_field(spec.q)
    root = Stream(spec.seed).key
    return _mc_coranks(_VARIANT_CODE[spec.variant], root, np.int64(first_trial), int(trials),
                       spec.n, spec.k, F.q, F.kind, F.p, F.tables)
