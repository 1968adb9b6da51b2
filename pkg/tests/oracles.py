"""Brute-force oracles, written independently of the package internals.

Matrices are described by a template: fixed row bitmasks plus a list of free
cells.  Every 0/1 assignment to the free cells is enumerated and ranked by
XOR-basis insertion over GF(2).  For other primes a plain Python Gaussian
elimination mod p is used.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from numba import njit


@njit(cache=True)
def _xor_rank(rows):
    basis = np.zeros(64, dtype=np.int64)  # basis[b] has leading bit b
    r = 0
    for x in rows:
        for b in range(63, -1, -1):
            if not (x >> b) & 1:
                continue
            if basis[b] == 0:
                basis[b] = x
                r += 1
                break
            x ^= basis[b]
    return r


@njit(cache=True)
def _census(base, cell_row, cell_col, ncols):
    counts = np.zeros(ncols + 1, dtype=np.int64)
    m = cell_row.shape[0]
    rows = base.copy()
    for mask in range(1 << m):
        for i in range(rows.shape[0]):
            rows[i] = base[i]
        for c in range(m):
            if (mask >> c) & 1:
                rows[cell_row[c]] |= np.int64(1) << np.int64(cell_col[c])
        counts[ncols - _xor_rank(rows)] += 1
    return counts


def corank_census(nrows: int, ncols: int, free_cells, fixed_ones=()) -> dict:
    """Exact corank law of a GF(2) matrix with uniform free cells."""
    base = np.zeros(nrows, dtype=np.int64)
    for r, c in fixed_ones:
        base[r] |= 1 << c
    cells = list(free_cells)
    counts = _census(base, np.array([r for r, _ in cells], dtype=np.int64),
                     np.array([c for _, c in cells], dtype=np.int64), ncols)
    total = 1 << len(cells)
    return {j: Fraction(int(v), total) for j, v in enumerate(counts) if v}


def _block_cells(bi, bj, n, row_lo=0, row_hi=None):
    row_hi = n if row_hi is None else row_hi
    return [(bi * n + i, bj * n + j) for i in range(row_lo, row_hi) for j in range(n)]


def even_template(n, k):
    cells = []
    for i in range(k):
        cells += _block_cells(i, i, n) + _block_cells(i + 1, i, n)
    return (k + 1) * n, k * n, cells, []


def odd_template(n, k):
    cells = []
    for i in range(k):
        cells += _block_cells(i, i, n)
        if i + 1 < k:
            cells += _block_cells(i + 1, i, n)
    return k * n, k * n, cells, []


def truncated_template(n, k):
    """C_{2(k+1)} with the first and last n/2 rows removed, rows renumbered."""
    m = n // 2
    full = []
    for i in range(k + 1):
        full += _block_cells(i, i, n) + _block_cells(i + 1, i, n)
    rows = (k + 2) * n
    cells = [(r - m, c) for r, c in full if m <= r < rows - m]
    return rows - 2 * m, (k + 1) * n, cells, []


def product_template(n, k):
    cells, ones = [], []
    for i in range(k):
        cells += _block_cells(i, i, n)
        if i + 1 < k:
            ones += [((i + 1) * n + j, i * n + j) for j in range(n)]
    return k * n, k * n, cells, ones


def census(template) -> dict:
    return corank_census(*template)


def rank_mod_p(M, p: int) -> int:
    """Gaussian elimination over a prime field, pure Python."""
    A = [[int(x) % p for x in row] for row in M]
    r = 0
    cols = len(A[0]) if A else 0
    for c in range(cols):
        piv = next((i for i in range(r, len(A)) if A[i][c]), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = pow(A[r][c], p - 2, p)
        A[r] = [x * inv % p for x in A[r]]
        for i in range(len(A)):
            if i != r and A[i][c]:
                f = A[i][c]
                A[i] = [(x - f * y) % p for x, y in zip(A[i], A[r])]
        r += 1
    return r


def product_census(n: int, k: int) -> dict:
    """Corank law of an explicit product of k uniform n x n GF(2) matrices."""
    from itertools import product
    mats = [np.array(bits, dtype=np.int64).reshape(n, n)
            for bits in product((0, 1), repeat=n * n)]
    counts: dict = {}
    for combo in product(range(len(mats)), repeat=k):
        P = np.eye(n, dtype=np.int64)
        for i in combo:
            P = P @ mats[i] % 2
        c = n - rank_mod_p(P, 2)
        counts[c] = counts.get(c, 0) + 1
    total = len(mats) ** k
    return {j: Fraction(v, total) for j, v in counts.items()}
