"""Dense matrices over F_q: rank, kernel basis and the streaming rank engine.

q = 2 goes through bit-packed rows (uint64 words, bit j of word w is column
64*w + j) with XOR elimination; every other field uses one int64 per entry
and the table kernels of :mod:`rankwalk.gf`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .gf import FieldSpec, _fadd, _fmul, as_field


class ShapeMismatch(ValueError):
    pass


@dataclass(eq=False)
class FqMatrix:
    field: FieldSpec
    entries: np.ndarray

    def __post_init__(self):
        self.field = as_field(self.field)
        e = np.asarray(self.entries)
        if e.ndim != 2:
            raise ShapeMismatch(f"entries must be 2-d, got shape {e.shape}")
        if e.size and (e.min() < 0 or e.max() >= self.field.q):
            raise ValueError(f"entries outside [0, {self.field.q})")
        self.entries = e.astype(np.int64, copy=False)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @classmethod
    def zeros(cls, q, rows: int, cols: int) -> "FqMatrix":
        return cls(as_field(q), np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def identity(cls, q, n: int) -> "FqMatrix":
        return cls(as_field(q), np.eye(n, dtype=np.int64))

    def rank(self) -> int:
        return rank(self)

    def corank(self) -> int:
        return self.cols - rank(self)

    def kernel_basis(self) -> list[np.ndarray]:
        return kernel_basis(self)

    def __matmul__(self, other):
        F = self.field
        if isinstance(other, FqMatrix):
            return FqMatrix(F, _matmul(self.entries, other.entries, F.kind, F.p, F.q, F.tables))
        v = np.asarray(other, dtype=np.int64)
        out = _matmul(self.entries, v.reshape(-1, 1), F.kind, F.p, F.q, F.tables)
        return out.reshape(-1)

    def __eq__(self, other) -> bool:
        return (isinstance(other, FqMatrix) and self.field.q == other.field.q
                and self.shape == other.shape and bool((self.entries == other.entries).all()))

    def columns(self, start: int, stop: int) -> "FqMatrix":
        return FqMatrix(self.field, self.entries[:, start:stop])

    def to_text(self) -> str:
        return dumps(self)


# ---------------------------------------------------------------------------
# text format: "q rows cols" header, then one line per row of space-separated
# entries.

def dumps(M: FqMatrix) -> str:
    lines = [f"{M.field.q} {M.rows} {M.cols}"]
    lines.extend(" ".join(str(int(x)) for x in row) for row in M.entries)
    return "\n".join(lines) + "\n"


def loads(text: str) -> FqMatrix:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    q, r, c = (int(x) for x in lines[0].split())
    body = [[int(x) for x in ln.split()] for ln in lines[1:]]
    if len(body) != r or any(len(row) != c for row in body):
        raise ShapeMismatch(f"expected {r}x{c} entries")
    ent = np.array(body, dtype=np.int64).reshape(r, c)
    return FqMatrix(as_field(q), ent)


# ---------------------------------------------------------------------------
# packing

def pack_gf2(entries: np.ndarray) -> np.ndarray:
    """(rows, cols) 0/1 array -> (rows, ceil(cols/64)) uint64 words."""
    rows, cols = entries.shape
    words = max(1, (cols + 63) // 64)
    padded = np.zeros((rows, words * 64), dtype=np.uint8)
    padded[:, :cols] = entries
    b = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(b).view("<u8").astype(np.uint64).reshape(rows, words)


def unpack_gf2(words: np.ndarray, cols: int) -> np.ndarray:
    b = np.ascontiguousarray(words.astype("<u8")).view(np.uint8)
    bits = np.unpackbits(b.reshape(words.shape[0], -1), axis=1, bitorder="little")
    return bits[:, :cols].astype(np.int64)


# ---------------------------------------------------------------------------
# elimination kernels

@njit(cache=True)
def _rref_gf2(R, ncols, full):
    """Row reduce packed rows in place. Returns (rank, pivot columns)."""
    rows = R.shape[0]
    words = R.shape[1]
    piv = np.empty(min(rows, ncols), dtype=np.int64)
    r = 0
    one = np.uint64(1)
    for c in range(ncols):
        if r == rows:
            break
        w = c >> 6
        bit = one << np.uint64(c & 63)
        pr = -1
        for i in range(r, rows):
            if R[i, w] & bit:
                pr = i
                break
        if pr < 0:
            continue
        if pr != r:
            for j in range(words):
                t = R[pr, j]
                R[pr, j] = R[r, j]
                R[r, j] = t
        start = 0 if full else r + 1
        for i in range(start, rows):
            if i != r and (R[i, w] & bit):
                for j in range(w, words):
                    R[i, j] ^= R[r, j]
        piv[r] = c
        r += 1
    return r, piv[:r]


@njit(cache=True)
def _rref_gen(W, kind, p, q, T, full):
    """Row reduce an int64 element matrix in place (pivots normalized to 1)."""
    rows, cols = W.shape
    piv = np.empty(min(rows, cols), dtype=np.int64)
    r = 0
    for c in range(cols):
        if r == rows:
            break
        pr = -1
        for i in range(r, rows):
            if W[i, c] != 0:
                pr = i
                break
        if pr < 0:
            continue
        if pr != r:
            for j in range(cols):
                t = W[pr, j]
                W[pr, j] = W[r, j]
                W[r, j] = t
        iv = T[3][W[r, c]]
        if iv != 1:
            for j in range(c, cols):
                W[r, j] = _fmul(W[r, j], iv, kind, p, q, T)
        start = 0 if full else r + 1
        for i in range(start, rows):
            f = W[i, c]
            if i != r and f != 0:
                nf = T[4][f]
                for j in range(c, cols):
                    if W[r, j] != 0:
                        W[i, j] = _fadd(W[i, j], _fmul(nf, W[r, j], kind, p, q, T), kind, p, q, T)
        piv[r] = c
        r += 1
    return r, piv[:r]


@njit(cache=True)
def _matmul(A, B, kind, p, q, T):
    n, k = A.shape
    m = B.shape[1]
    out = np.zeros((n, m), dtype=np.int64)
    for i in range(n):
        for l in range(k):
            a = A[i, l]
            if a == 0:
                continue
            for j in range(m):
                b = B[l, j]
                if b != 0:
                    out[i, j] = _fadd(out[i, j], _fmul(a, b, kind, p, q, T), kind, p, q, T)
    return out


@njit(cache=True)
def _null_from_rref(W, r, piv, kind, p, q, T):
    """Canonical null-space basis (rows) from a fully reduced matrix."""
    cols = W.shape[1]
    is_piv = np.zeros(cols, dtype=np.bool_)
    for i in range(r):
        is_piv[piv[i]] = True
    out = np.zeros((cols - r, cols), dtype=np.int64)
    t = 0
    for f in range(cols):
        if is_piv[f]:
            continue
        out[t, f] = 1
        for i in range(r):
            out[t, piv[i]] = T[4][W[i, f]]
        t += 1
    return out


def rank(M: FqMatrix) -> int:
    F = M.field
    if M.rows == 0 or M.cols == 0:
        return 0
    if F.q == 2:
        r, _ = _rref_gf2(pack_gf2(M.entries), M.cols, False)
    else:
        r, _ = _rref_gen(M.entries.copy(), F.kind, F.p, F.q, F.tables, False)
    return int(r)


def kernel_basis(M: FqMatrix) -> list[np.ndarray]:
    """Basis of {v : M v = 0}: one vector per free column of the RREF, with a 1
    in that column and 0 in the other free columns."""
    F = M.field
    if M.cols == 0:
        return []
    if M.rows == 0:
        return [row for row in np.eye(M.cols, dtype=np.int64)]
    W = M.entries.copy()
    if F.q == 2:
        R = pack_gf2(W)
        r, piv = _rref_gf2(R, M.cols, True)
        W = unpack_gf2(R, M.cols)
    else:
        r, piv = _rref_gen(W, F.kind, F.p, F.q, F.tables, True)
    basis = _null_from_rref(W, r, piv, F.kind, F.p, F.q, F.tables)
    return [row for row in basis]


# ---------------------------------------------------------------------------
# streaming rank increments
#
# Feed order is the order blocks enter C_1, C_2, ...: A11, A21, A22, A32, A33, ...
# Block b (0-based) is diagonal when b is even and subdiagonal when b is odd.
# The state is a basis R of an s-dimensional subspace S of F_q^n:
#   * before a diagonal block D, S is the annihilator of W (the last-block
#     components of column-space vectors that vanish on all earlier rows);
#     the increment is rank(R D), and ker(R D) is the new state;
#   * before a subdiagonal block B the state spans the last-block
#     components of the kernel; the increment is rank(R B^T), and the left
#     kernel of B R^T (= ker(R B^T)) is the new state.
# Each step costs O(n^3) field operations regardless of how many blocks came
# before.

@njit(cache=True)
def _transpose_bits(rows, n):
    out = np.zeros(n, dtype=np.uint64)
    one = np.uint64(1)
    for l in range(n):
        x = rows[l]
        for j in range(n):
            if (x >> np.uint64(j)) & one:
                out[j] |= one << np.uint64(l)
    return out


@njit(cache=True)
def _stream_step_gf2(R, s, block_rows, n, M):
    """One step on packed single-word rows. R[:s] is the state; M scratch.
    Returns (increment, new s); R is overwritten with the new state."""
    one = np.uint64(1)
    for i in range(s):
        x = R[i]
        acc = np.uint64(0)
        for l in range(n):
            if (x >> np.uint64(l)) & one:
                acc ^= block_rows[l]
        M[i] = acc
    # reduce M[:s] fully
    r = 0
    piv = np.empty(n, dtype=np.int64)
    for c in range(n):
        if r == s:
            break
        bit = one << np.uint64(c)
        pr = -1
        for i in range(r, s):
            if M[i] & bit:
                pr = i
                break
        if pr < 0:
            continue
        t = M[pr]
        M[pr] = M[r]
        M[r] = t
        for i in range(s):
            if i != r and (M[i] & bit):
                M[i] ^= M[r]
        piv[r] = c
        r += 1
    # null space of M[:r]
    is_piv = np.zeros(n, dtype=np.bool_)
    for i in range(r):
        is_piv[piv[i]] = True
    t = 0
    for f in range(n):
        if is_piv[f]:
            continue
        v = one << np.uint64(f)
        bit = one << np.uint64(f)
        for i in range(r):
            if M[i] & bit:
                v |= one << np.uint64(piv[i])
        R[t] = v
        t += 1
    return r, t


@njit(cache=True)
def _stream_gf2(blocks, n):
    """blocks: (nb, n) uint64 row masks in feed order. Returns increments."""
    nb = blocks.shape[0]
    out = np.empty(nb, dtype=np.int64)
    R = np.zeros(n, dtype=np.uint64)
    M = np.zeros(n, dtype=np.uint64)
    one = np.uint64(1)
    for i in range(n):
        R[i] = one << np.uint64(i)
    s = n
    for b in range(nb):
        if b % 2 == 0:
            x, s = _stream_step_gf2(R, s, blocks[b], n, M)
        else:
            x, s = _stream_step_gf2(R, s, _transpose_bits(blocks[b], n), n, M)
        out[b] = x
    return out


@njit(cache=True)
def _stream_gen(blocks, n, kind, p, q, T):
    """blocks: (nb, n, n) int64 in feed order. Returns increments."""
    nb = blocks.shape[0]
    out = np.empty(nb, dtype=np.int64)
    R = np.eye(n, dtype=np.int64)
    for b in range(nb):
        blk = blocks[b] if b % 2 == 0 else blocks[b].T.copy()
        M = _matmul(R, blk, kind, p, q, T)
        r, piv = _rref_gen(M, kind, p, q, T, True)
        out[b] = r
        R = _null_from_rref(M, r, piv, kind, p, q, T)
    return out


@dataclass
class RankIncrementTrace:
    n: int
    q: int
    increments: list[int]
    partial_defects: list[int] = field(default_factory=list)

    def ranks(self) -> list[int]:
        """rank(C_j) for j = 1 .. len(increments)."""
        return list(np.cumsum(self.increments, dtype=np.int64).tolist())

    def corank_even(self, k: int) -> int:
        """dim ker C_{2k}."""
        return self.partial_defects[k]

    def corank_odd(self, k: int) -> int:
        """dim ker C_{2k-1} = dim ker C_{2k-2} + n - X_{2k-1}."""
        return self.partial_defects[k - 1] + self.n - self.increments[2 * k - 2]


def _defects(incs: Sequence[int], n: int) -> list[int]:
    out = [0]
    for i in range(len(incs) // 2):
        out.append(out[-1] + n - incs[2 * i] - incs[2 * i + 1])
    return out


def stream_rank_increments(n: int, block_feed: Iterable, q=None) -> RankIncrementTrace:
    """Rank increments X_1, X_2, ... of the block lower bidiagonal matrices
    C_1, C_2, ... built from ``block_feed`` (A11, A21, A22, A32, ...).

    Blocks may be FqMatrix instances or integer arrays (then ``q`` is required).
    """
    blocks = []
    F = None
    for blk in block_feed:
        if isinstance(blk, FqMatrix):
            F = blk.field
            arr = blk.entries
        else:
            arr = np.asarray(blk, dtype=np.int64)
        if arr.shape != (n, n):
            raise ShapeMismatch(f"block of shape {arr.shape}, expected {(n, n)}")
        blocks.append(arr)
    F = as_field(q) if q is not None else F
    if F is None:
        if not blocks:
            return RankIncrementTrace(n, int(q or 0), [], [0])
        raise ValueError("q is required when blocks are plain arrays")
    if not blocks:
        return RankIncrementTrace(n, F.q, [], [0])
    stack = np.stack(blocks).astype(np.int64)
    if F.q == 2 and n <= 64:
        packed = np.stack([pack_gf2(b)[:, 0] for b in stack])
        incs = _stream_gf2(packed, n)
    else:
        incs = _stream_gen(stack, n, F.kind, F.p, F.q, F.tables)
    incs = [int(x) for x in incs]
    return RankIncrementTrace(n, F.q, incs, _defects(incs, n))


@njit(cache=True)
def _rank_batch(mats, kind, p, q, T):
    out = np.empty(mats.shape[0], dtype=np.int64)
    for i in range(mats.shape[0]):
        r, _ = _rref_gen(mats[i].copy(), kind, p, q, T, False)
        out[i] = r
    return out


def rank_batch(mats: np.ndarray, q) -> np.ndarray:
    """Ranks of a stack of equally shaped matrices, shape (count, rows, cols)."""
    F = as_field(q)
    mats = np.ascontiguousarray(mats, dtype=np.int64)
    if mats.shape[1] == 0 or mats.shape[2] == 0:
        return np.zeros(mats.shape[0], dtype=np.int64)
    return _rank_batch(mats, F.kind, F.p, F.q, F.tables)
