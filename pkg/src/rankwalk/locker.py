"""Kernel support analysis for the truncated ensemble.

A kernel vector v of a (k+1)n-column matrix splits into k+1 blocks of
length n; supp(v) is the set of (1-based) block indices where v is nonzero.

If every row of M meets at most two consecutive column blocks (the banded
shape of the truncated ensemble), then a kernel vector vanishing on an
interior block i splits into two kernel vectors, one on the blocks before i
and one on the blocks after i.  Hence some nonzero kernel vector lacks full
support iff the columns of blocks 1..k, or of blocks 2..k+1, already have a
nontrivial kernel.  Matrices without the banded shape fall back to
enumerating the whole kernel.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from numba import njit

from .ensembles import EnsembleSpec, Variant, sample_trial
from .fmat import FqMatrix, kernel_basis, rank
from .gf import _fadd, _fmul

ENUM_LIMIT = 1 << 20


class BadLength(ValueError):
    pass


class BadWindow(ValueError):
    pass


class KernelTooLarge(RuntimeError):
    pass


def support_blocks(v, n: int) -> set[int]:
    v = np.asarray(v)
    if n < 1 or len(v) % n:
        raise BadLength(f"vector length {len(v)} is not a multiple of block size {n}")
    nz = v.reshape(-1, n).any(axis=1)
    return {int(i) + 1 for i in np.nonzero(nz)[0]}


@dataclass
class SupportProfile:
    n: int
    blocks: int
    supports: list

    @classmethod
    def of(cls, M: FqMatrix, n: int) -> "SupportProfile":
        return cls(n, M.cols // n, [support_blocks(v, n) for v in kernel_basis(M)])


def _blocks(M: FqMatrix, n: int) -> int:
    if n < 1 or M.cols % n:
        raise BadLength(f"{M.cols} columns is not a multiple of block size {n}")
    return M.cols // n


def is_banded(M: FqMatrix, n: int) -> bool:
    """Every row meets at most two consecutive column blocks."""
    nb = _blocks(M, n)
    hit = M.entries.reshape(M.rows, nb, n).any(axis=2)
    for row in hit:
        idx = np.nonzero(row)[0]
        if len(idx) and idx[-1] - idx[0] > 1:
            return False
    return True


def _window_corank(M: FqMatrix, n: int, first: int, last: int) -> int:
    """dim ker of the columns of blocks first..last (1-based, inclusive)."""
    sub = M.columns((first - 1) * n, last * n)
    return sub.cols - rank(sub)


@njit(cache=True)
def _has_partial_support(B, n, kind, p, q, T):
    """True if some nonzero combination of the rows of B misses a block."""
    c, N = B.shape
    nb = N // n
    coef = np.zeros(c, dtype=np.int64)
    v = np.zeros(N, dtype=np.int64)
    while True:
        # next coefficient vector (base-q counter)
        i = 0
        while i < c and coef[i] == q - 1:
            coef[i] = 0
            i += 1
        if i == c:
            return False
        coef[i] += 1
        for j in range(N):
            v[j] = 0
        for r in range(c):
            if coef[r]:
                for j in range(N):
                    v[j] = _fadd(v[j], _fmul(coef[r], B[r, j], kind, p, q, T), kind, p, q, T)
        for b in range(nb):
            nz = False
            for j in range(b * n, (b + 1) * n):
                if v[j]:
                    nz = True
                    break
            if not nz:
                return True


def is_delocalized(M: FqMatrix, n: int, strategy: str = "auto") -> bool:
    """Whether every nonzero kernel vector has full block support."""
    nb = _blocks(M, n)
    if M.cols - rank(M) == 0:
        return True
    if strategy not in ("auto", "window", "enumerate"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy != "enumerate" and is_banded(M, n):
        if nb == 1:
            return True
        return (_window_corank(M, n, 1, nb - 1) == 0 and _window_corank(M, n, 2, nb) == 0)
    if strategy == "window":
        raise KernelTooLarge("matrix is not banded; the window reduction does not apply")
    basis = kernel_basis(M)
    F = M.field
    if F.q ** len(basis) > ENUM_LIMIT:
        raise KernelTooLarge(f"q^corank = {F.q}^{len(basis)} exceeds {ENUM_LIMIT}")
    B = np.array(basis, dtype=np.int64)
    return not _has_partial_support(B, n, F.kind, F.p, F.q, F.tables)


def windows(blocks: int, L: int) -> list[tuple[int, int]]:
    """L windows of floor(blocks / L) consecutive blocks, 1-based inclusive."""
    if L < 1 or L > blocks:
        raise BadWindow(f"L={L} must lie in [1, {blocks}]")
    w = blocks // L
    return [(i * w + 1, (i + 1) * w) for i in range(L)]


def window_indicators(M: FqMatrix, n: int, L: int) -> list[bool]:
    """For each window, whether some nonzero kernel vector is supported inside it."""
    return [_window_corank(M, n, a, b) > 0 for a, b in windows(_blocks(M, n), L)]


def is_L_localized(M: FqMatrix, n: int, L: int) -> bool:
    return all(window_indicators(M, n, L))


@dataclass
class LocalizationTrial:
    seed: int
    trial: int
    n: int
    k: int
    L: int
    delocalized: bool
    localized: bool
    corank: int
    windows: tuple


def localization_trials(n: int, k: int, q: int, L: int, trials: int, seed: int,
                        first_trial: int = 0) -> list[LocalizationTrial]:
    spec = EnsembleSpec(Variant.TRUNCATED, n, k, q, seed)
    out = []
    for t in range(first_trial, first_trial + trials):
        M = sample_trial(spec, t)
        ind = tuple(window_indicators(M, n, L))
        out.append(LocalizationTrial(seed, t, n, k, L, is_delocalized(M, n), all(ind),
                                     M.corank(), ind))
    return out


def trials_csv(rows: list[LocalizationTrial]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "trial", "n", "k", "L", "delocalized", "localized", "corank"])
    for r in rows:
        w.writerow([r.seed, r.trial, r.n, r.k, r.L, int(r.delocalized), int(r.localized),
                    r.corank])
    return buf.getvalue()
