"""Arithmetic in F_q for prime powers q <= 2**16.

Elements are the integers ``0 .. q-1``.  For a prime field they are residues
mod p.  For an extension field, ``a = sum_i c_i p**i`` is the polynomial
``sum_i c_i x**i`` reduced modulo a fixed primitive polynomial: the
lexicographically smallest monic primitive polynomial of degree e over F_p,
comparing coefficient vectors ``(c_0, ..., c_{e-1})`` as base-p integers.  The
class of x is the primitive element alpha, and multiplication goes through
log/antilog tables.  Addition is XOR in characteristic 2, digit-wise mod p
otherwise (Zech logarithms, ``log(1 + alpha**i)``, serve the numba kernels).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

Q_CAP = 1 << 16

PRIME = 0
BINARY_EXT = 1
ODD_EXT = 2


class NotPrimePower(ValueError):
    pass


class CapExceeded(ValueError):
    pass


class DivisionByZero(ZeroDivisionError):
    pass


def _factor_prime_power(q: int) -> tuple[int, int]:
    p = None
    m = q
    d = 2
    while d * d <= m:
        if m % d == 0:
            p = d
            break
        d += 1
    if p is None:
        return q, 1
    e = 0
    while m % p == 0:
        m //= p
        e += 1
    if m != 1:
        raise NotPrimePower(f"q={q} has at least two distinct prime factors")
    return p, e


def _digits(a: int, p: int, e: int) -> list[int]:
    out = []
    for _ in range(e):
        out.append(a % p)
        a //= p
    return out


def _undigits(ds, p: int) -> int:
    a = 0
    for c in reversed(ds):
        a = a * p + c
    return a


def _try_primitive(poly: list[int], p: int, e: int, q: int):
    """exp table of x modulo the monic poly x^e + sum poly[i] x^i, or None."""
    exp = np.zeros(q - 1, dtype=np.int64)
    cur = [1] + [0] * (e - 1)
    for i in range(q - 1):
        a = _undigits(cur, p)
        if i > 0 and a == 1:
            return None
        exp[i] = a
        # multiply by x, then reduce x^e = -sum poly[i] x^i
        top = cur[-1]
        cur = [0] + cur[:-1]
        if top:
            cur = [(c - top * pc) % p for c, pc in zip(cur, poly)]
    if _undigits(cur, p) != 1:
        return None
    return exp


def _find_primitive(p: int, e: int, q: int):
    for code in range(1, q):
        poly = _digits(code, p, e)
        if poly[0] == 0:
            continue
        exp = _try_primitive(poly, p, e, q)
        if exp is not None:
            return tuple(poly), exp
    raise AssertionError(f"no primitive polynomial of degree {e} over F_{p}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FieldSpec:
    q: int
    p: int
    e: int
    kind: int
    modulus: tuple = ()  # low coefficients of the monic modulus, extension fields only
    exp: np.ndarray = field(repr=False, default=None)   # alpha**i, i in [0, 2(q-1))
    log: np.ndarray = field(repr=False, default=None)   # log[0] = -1
    zech: np.ndarray = field(repr=False, default=None)  # log(1 + alpha**i), -1 if zero
    inv_t: np.ndarray = field(repr=False, default=None)
    neg_t: np.ndarray = field(repr=False, default=None)

    @property
    def tables(self):
        """Tuple handed to numba kernels: (exp, log, zech, inv, neg)."""
        return (self.exp, self.log, self.zech, self.inv_t, self.neg_t)

    def add(self, a: int, b: int) -> int:
        return int(_fadd(a, b, self.kind, self.p, self.q, self.tables))

    def sub(self, a: int, b: int) -> int:
        return int(_fadd(a, int(self.neg_t[b]), self.kind, self.p, self.q, self.tables))

    def neg(self, a: int) -> int:
        return int(self.neg_t[a])

    def mul(self, a: int, b: int) -> int:
        return int(_fmul(a, b, self.kind, self.p, self.q, self.tables))

    def inv(self, a: int) -> int:
        if a == 0:
            raise DivisionByZero("inverse of 0 in F_%d" % self.q)
        return int(self.inv_t[a])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, k: int) -> int:
        out = 1
        for _ in range(k):
            out = self.mul(out, a)
        return out

    def add_table(self) -> np.ndarray:
        return _op_table(self.q, self.kind, self.p, self.tables, 0)

    def mul_table(self) -> np.ndarray:
        return _op_table(self.q, self.kind, self.p, self.tables, 1)

    def __repr__(self) -> str:
        return f"FieldSpec(q={self.q})"


@lru_cache(maxsize=None)
def field_new(q: int) -> FieldSpec:
    q = int(q)
    if q > Q_CAP:
        raise CapExceeded(f"q={q} exceeds the cap 2**16")
    if q < 2:
        raise NotPrimePower(f"q={q} is not a prime power")
    p, e = _factor_prime_power(q)
    if e == 1:
        inv = np.zeros(q, dtype=np.int64)
        for a in range(1, q):
            inv[a] = pow(a, p - 2, p)
        neg = np.array([(-a) % p for a in range(q)], dtype=np.int64)
        empty = np.zeros(1, dtype=np.int64)
        return FieldSpec(q, p, 1, PRIME, (), _frozen(empty), _frozen(empty.copy()),
                         _frozen(empty.copy()), _frozen(inv), _frozen(neg))

    modulus, exp1 = _find_primitive(p, e, q)
    n1 = q - 1
    exp = np.concatenate([exp1, exp1])
    log = np.full(q, -1, dtype=np.int64)
    log[exp1] = np.arange(n1)
    # digit-wise arithmetic on whole tables
    pw = p ** np.arange(e)
    digs = (np.arange(q)[:, None] // pw) % p
    neg = ((-digs) % p) @ pw
    one_plus = ((digs[exp1] + digs[1]) % p) @ pw
    zech = log[one_plus]
    inv = np.zeros(q, dtype=np.int64)
    inv[exp1] = exp1[(-np.arange(n1)) % n1]
    kind = BINARY_EXT if p == 2 else ODD_EXT
    return FieldSpec(q, p, e, kind, modulus, _frozen(exp), _frozen(log), _frozen(zech),
                     _frozen(inv), _frozen(neg.astype(np.int64)))


def as_field(q_or_field) -> FieldSpec:
    if isinstance(q_or_field, FieldSpec):
        return q_or_field
    return field_new(int(q_or_field))


# ---------------------------------------------------------------------------
# numba element kernels; T = (exp, log, zech, inv, neg)

@njit(cache=True, inline="always")
def _fadd(a, b, kind, p, q, T):
    if kind == PRIME:
        s = a + b
        return s - p if s >= p else s
    if kind == BINARY_EXT:
        return a ^ b
    if a == 0:
        return b
    if b == 0:
        return a
    la = T[1][a]
    d = T[1][b] - la
    if d < 0:
        d += q - 1
    z = T[2][d]
    if z < 0:
        return 0
    return T[0][la + z]


@njit(cache=True, inline="always")
def _fmul(a, b, kind, p, q, T):
    if kind == PRIME:
        return (a * b) % p
    if a == 0 or b == 0:
        return 0
    return T[0][T[1][a] + T[1][b]]


@njit(cache=True)
def _op_table(q, kind, p, T, which):
    out = np.zeros((q, q), dtype=np.int64)
    for a in range(q):
        for b in range(q):
            if which == 0:
                out[a, b] = _fadd(a, b, kind, p, q, T)
            else:
                out[a, b] = _fmul(a, b, kind, p, q, T)
    return out
