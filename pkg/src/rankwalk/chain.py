"""The rank-increment Markov chain and exact corank laws.

The kernel

    P_n(d, r) = 1(d + r <= n) q^{-(n-d-r)(n-r)} (q^{-(n-d)}; q)_r (q^{-n}; q)_r / (q^{-r}; q)_r

is the rank law of a uniform (n - d) x n matrix.  Every corank law below is a
dynamic program over (current increment, accumulated defect).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from numba import njit

from .rng import Stream, as_stream, draw_uniform, stream_key

EXACT = "exact"
FLOAT = "float"
AUTO_TAIL = 1e-12


class CapTooSmall(ValueError):
    pass


class OddN(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


class NotPrime(ValueError):
    pass


# ---------------------------------------------------------------------------
# Pmf

@dataclass
class Pmf:
    """Law on ``offset, offset + 1, ...``; mass beyond the last weight is ``tail_mass``."""

    offset: int
    weights: Sequence
    tail_mass: float | Fraction = 0.0
    mode: str = FLOAT
    provenance: str = ""

    def __post_init__(self):
        if self.mode == FLOAT:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            self.tail_mass = float(self.tail_mass)
        else:
            self.weights = [Fraction(w) for w in self.weights]
            self.tail_mass = Fraction(self.tail_mass)

    def __len__(self):
        return len(self.weights)

    @property
    def support(self) -> range:
        return range(self.offset, self.offset + len(self.weights))

    def __getitem__(self, x: int):
        i = x - self.offset
        if 0 <= i < len(self.weights):
            return self.weights[i]
        return Fraction(0) if self.mode == EXACT else 0.0

    def as_dict(self) -> dict:
        return {x: w for x, w in zip(self.support, self.weights) if w != 0}

    def total(self):
        return sum(self.weights) + self.tail_mass

    def to_float(self) -> "Pmf":
        return Pmf(self.offset, [float(w) for w in self.weights], float(self.tail_mass), FLOAT,
                   self.provenance)

    def probs(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    def mean(self) -> float:
        p = self.probs()
        return float(np.dot(np.arange(self.offset, self.offset + len(p)), p) / p.sum())

    def var(self) -> float:
        p = self.probs()
        x = np.arange(self.offset, self.offset + len(p))
        m = np.dot(x, p) / p.sum()
        return float(np.dot((x - m) ** 2, p) / p.sum())

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs())

    def trimmed(self) -> "Pmf":
        """Drop zero weights at both ends."""
        nz = [i for i, w in enumerate(self.weights) if w != 0]
        if not nz:
            return Pmf(0, [], self.tail_mass, self.mode, self.provenance)
        lo, hi = nz[0], nz[-1] + 1
        return Pmf(self.offset + lo, list(self.weights[lo:hi]), self.tail_mass, self.mode,
                   self.provenance)

    def to_json(self) -> str:
        w = [str(x) if self.mode == EXACT else float(x) for x in self.weights]
        t = str(self.tail_mass) if self.mode == EXACT else float(self.tail_mass)
        return json.dumps({"offset": self.offset, "weights": w, "tail_mass": t, "mode": self.mode})

    @classmethod
    def from_json(cls, text: str) -> "Pmf":
        d = json.loads(text)
        if d["mode"] == EXACT:
            return cls(d["offset"], [Fraction(x) for x in d["weights"]], Fraction(d["tail_mass"]),
                       EXACT)
        return cls(d["offset"], d["weights"], d["tail_mass"], FLOAT)

    @classmethod
    def point(cls, x: int, mode: str = EXACT) -> "Pmf":
        return cls(x, [1], 0, mode)


# ---------------------------------------------------------------------------
# kernel and stationary law

def _qpoch(a: Fraction, q: Fraction, r: int) -> Fraction:
    out = Fraction(1)
    for i in range(r):
        out *= 1 - a * q ** i
    return out


@lru_cache(maxsize=None)
def _exact_transition(n: int, q: int, d: int, r: int) -> Fraction:
    if d + r > n or d < 0 or r < 0:
        return Fraction(0)
    Q = Fraction(q)
    num = _qpoch(Q ** -(n - d), Q, r) * _qpoch(Q ** -n, Q, r)
    return Q ** (-(n - d - r) * (n - r)) * num / _qpoch(Q ** -r, Q, r)


def transition_prob(n: int, q: int, d: int, r: int, mode: str = EXACT):
    """P_n(d, r); an exact Fraction in exact mode."""
    p = _exact_transition(int(n), int(q), int(d), int(r))
    return p if mode == EXACT else float(p)


def rect_rank_dist(rows: int, cols: int, q: int, mode: str = EXACT) -> Pmf:
    """Rank law of a uniform rows x cols matrix over F_q."""
    lo, hi = sorted((int(rows), int(cols)))
    w = [transition_prob(hi, q, hi - lo, r, mode) for r in range(lo + 1)]
    return Pmf(0, w, 0, mode, "exact-DP" if mode == EXACT else "exact-DP(float)")


@lru_cache(maxsize=None)
def _exact_stationary(n: int, q: int) -> tuple:
    Q = Fraction(q)
    w = [Q ** (h * (n - h)) * _qpoch(Q ** -n, Q, h) ** 2 / _qpoch(Q ** -h, Q, h)
         for h in range(n + 1)]
    z = sum(w)
    return tuple(x / z for x in w)


def stationary(n: int, q: int, mode: str = EXACT) -> Pmf:
    w = _exact_stationary(int(n), int(q))
    return Pmf(0, w if mode == EXACT else [float(x) for x in w], 0, mode, "exact-DP")


@lru_cache(maxsize=None)
def _float_matrix(n: int, q: int) -> np.ndarray:
    P = np.array([[float(_exact_transition(n, q, d, r)) for r in range(n + 1)]
                  for d in range(n + 1)])
    P.setflags(write=False)
    return P


@dataclass(frozen=True)
class ChainSpec:
    n: int
    q: int
    mode: str = EXACT
    rows: tuple = field(init=False, repr=False, default=())

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"n must be >= 0, got {self.n}")
        if self.mode == EXACT:
            rows = tuple(tuple(_exact_transition(self.n, self.q, d, r) for r in range(self.n + 1))
                         for d in range(self.n + 1))
        else:
            rows = tuple(tuple(row) for row in _float_matrix(self.n, self.q))
        object.__setattr__(self, "rows", rows)

    def matrix(self) -> np.ndarray:
        return _float_matrix(self.n, self.q)

    def cumulative(self) -> np.ndarray:
        c = np.cumsum(self.matrix(), axis=1)
        c[:, -1] = 1.0
        return c

    def stationary(self) -> Pmf:
        return stationary(self.n, self.q, self.mode)

    def prob(self, d: int, r: int):
        return self.rows[d][r]


# ---------------------------------------------------------------------------
# drift constant

def _qpow_half(q: int, n: int) -> float:
    return float(q ** (n // 2)) * (math.sqrt(q) if n % 2 else 1.0)


def mu_n(n: int, q: int) -> float:
    """(q - 1) q^{n/2} (n - 2 sum_h pi_n(h) h); the bracket is evaluated exactly."""
    pi = _exact_stationary(int(n), int(q))
    bracket = n - 2 * sum(h * w for h, w in enumerate(pi))
    return (q - 1) * _qpow_half(q, n) * float(bracket)


def _theta_sums(q: int) -> tuple[float, float]:
    """(sum_{i>=1} q^{-i^2}, sum_{i>=1} q^{-i(i-1)}), terms below 1e-15 dropped."""
    a = b = 0.0
    i = 1
    while True:
        ta, tb = float(q) ** -(i * i), float(q) ** -(i * (i - 1))
        if tb < 1e-15:
            break
        a += ta
        b += tb
        i += 1
    return a, b


def mu_limit(q: int, parity: str = "even") -> float:
    a, b = _theta_sums(q)
    if parity == "even":
        return 2 * b / (1 + 2 * a)
    if parity == "odd":
        return math.sqrt(q) * (1 + 2 * a) / (2 * b)
    raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


# ---------------------------------------------------------------------------
# sampling

@njit(cache=True)
def _step(cum_row, u):
    r = 0
    while cum_row[r] <= u and r < cum_row.shape[0] - 1:
        r += 1
    return r


@njit(cache=True)
def _chain_path(cum, x0, steps, key, ctr):
    out = np.empty(steps + 1, dtype=np.int64)
    out[0] = x0
    x = x0
    for i in range(steps):
        u = draw_uniform(key, ctr)
        ctr += 1
        x = _step(cum[x], u)
        out[i + 1] = x
    return out, ctr


@njit(cache=True)
def _chain_batch(cum, x0, idx, root, trial0, trials):
    """States at the sorted indices ``idx`` for each trial."""
    out = np.empty((trials, idx.shape[0]), dtype=np.int64)
    for t in range(trials):
        key = stream_key(root, trial0 + t)
        ctr = 0
        x = x0
        step = 0
        for j in range(idx.shape[0]):
            while step < idx[j]:
                u = draw_uniform(key, ctr)
                ctr += 1
                x = _step(cum[x], u)
                step += 1
            out[t, j] = x
    return out


def sample_chain(chain: ChainSpec, x0: int, steps: int, rng=None) -> np.ndarray:
    """X_0 = x0, X_1, ..., X_steps by inverse CDF, one uniform per step."""
    if not 0 <= x0 <= chain.n:
        raise ValueError(f"x0={x0} outside [0, {chain.n}]")
    s = as_stream(0 if rng is None else rng)
    path, ctr = _chain_path(chain.cumulative(), int(x0), int(steps), s.key, np.int64(s.counter))
    s.counter = int(ctr)
    return path


def chain_states_at(chain: ChainSpec, x0: int, indices, trials: int, seed: int,
                    first_trial: int = 0) -> np.ndarray:
    """(trials, len(indices)) array; trial t equals ``sample_chain`` on ``Stream(seed).spawn(t)``."""
    idx = np.asarray(sorted(indices), dtype=np.int64)
    return _chain_batch(chain.cumulative(), int(x0), idx, Stream(seed).key,
                        np.int64(first_trial), int(trials))


def rescale_index(n: int, q: int, t: float) -> int:
    return 2 * int(math.floor((q - 1) * _qpow_half(q, n) * t + 1e-12))


def rescale_chain_path(path: Sequence[int], n: int, q: int, t: float):
    """Y_t = X(2 floor(q^{n/2} (q - 1) t)) - n/2."""
    i = rescale_index(n, q, t)
    if i >= len(path):
        raise IndexOutOfRange(f"path of length {len(path)} has no index {i}")
    y = int(path[i])
    return y - n // 2 if n % 2 == 0 else y - n / 2


def time_scale(n: int, q: int, k: int) -> float:
    """t_n = q^{-n/2} k / (q - 1)."""
    return k / ((q - 1) * _qpow_half(q, n))


def k_for_time(n: int, q: int, t: float) -> int:
    return int(math.floor((q - 1) * _qpow_half(q, n) * t + 1e-12))


# ---------------------------------------------------------------------------
# dynamic programs over (increment, defect)
#
# Exact mode keeps dicts {(x, defect): Fraction}; float mode keeps an array
# A[defect, x] and applies per-shift matrices M_s[r, x] = P[r, x] 1(n - r - x = s).

class _ExactDP:
    def __init__(self, n, q, cap):
        self.n, self.q, self.cap = n, q, cap
        self.P = [[_exact_transition(n, q, d, r) for r in range(n + 1)] for d in range(n + 1)]
        self.state: dict = {}
        self.tail = Fraction(0)

    def init(self, law: dict):
        self.state = {}
        for (x, dd), w in law.items():
            if dd > self.cap:
                self.tail += w
            else:
                self.state[(x, dd)] = self.state.get((x, dd), 0) + w

    def step(self, shift):
        """One kernel step; ``shift(prev, new)`` is the defect added."""
        new: dict = {}
        for (x, dd), w in self.state.items():
            for r, p in enumerate(self.P[x]):
                if p:
                    d2 = dd + shift(x, r)
                    if d2 > self.cap:
                        self.tail += w * p
                    else:
                        new[(r, d2)] = new.get((r, d2), 0) + w * p
        self.state = new

    def terminal(self, kern):
        """Fold in an extra defect whose law given x is ``kern(x)`` -> {delta: prob}."""
        out: dict = {}
        for (x, dd), w in self.state.items():
            for delta, p in kern(x).items():
                d2 = dd + delta
                if d2 > self.cap:
                    self.tail += w * p
                else:
                    out[d2] = out.get(d2, 0) + w * p
        return out

    def defect_law(self):
        out: dict = {}
        for (x, dd), w in self.state.items():
            out[dd] = out.get(dd, 0) + w
        return out


class _FloatDP:
    def __init__(self, n, q, cap):
        self.n, self.q, self.cap = n, q, cap
        self.P = _float_matrix(n, q)
        self.A = np.zeros((cap + 1, n + 1))
        self.tail = 0.0
        self._shift_mats = {}

    def init(self, law: dict):
        for (x, dd), w in law.items():
            if dd > self.cap:
                self.tail += float(w)
            else:
                self.A[dd, x] += float(w)

    def _mats(self, key, shift):
        if key not in self._shift_mats:
            n = self.n
            S = np.array([[shift(r, x) for x in range(n + 1)] for r in range(n + 1)])
            mats = {}
            for s in np.unique(S):
                mats[int(s)] = np.where(S == s, self.P, 0.0)
            self._shift_mats[key] = mats
        return self._shift_mats[key]

    def _apply(self, mats):
        new = np.zeros_like(self.A)
        c = self.cap
        for s, M in mats.items():
            B = self.A @ M
            if s >= 0:
                if s <= c:
                    new[s:] += B[:c + 1 - s]
                self.tail += B[max(c + 1 - s, 0):].sum()
            else:
                new[:c + 1 + s] += B[-s:]
                # shifting down never leaves the window from above
        self.A = new

    def step(self, shift, key):
        self._apply(self._mats(key, shift))

    def terminal(self, kern):
        n, c = self.n, self.cap
        out = np.zeros(c + 1)
        for x in range(n + 1):
            col = self.A[:, x]
            if not col.any():
                continue
            for delta, p in kern(x).items():
                p = float(p)
                if delta <= c:
                    out[delta:] += p * col[:c + 1 - delta]
                self.tail += p * col[max(c + 1 - delta, 0):].sum()
        return out

    def defect_law(self):
        return self.A.sum(axis=1)


def _finish(law, tail, mode, bound, cap, prov) -> Pmf:
    if mode == EXACT:
        top = max(law) if law else 0
        w = [law.get(i, Fraction(0)) for i in range(top + 1)]
        pmf = Pmf(0, w, tail, EXACT, prov)
    else:
        law = np.asarray(law, dtype=np.float64)
        nz = np.nonzero(law)[0]
        top = int(nz[-1]) + 1 if len(nz) else 1
        pmf = Pmf(0, law[:top], max(tail, 0.0), FLOAT, prov)
    if bound is not None and float(pmf.tail_mass) > bound:
        raise CapTooSmall(f"tail mass {float(pmf.tail_mass):.3e} above bound {bound:.1e} "
                          f"at cap {cap}; raise the cap")
    return pmf


def _run(program, n, q, max_defect, cap, mode, bound, prov):
    """Run ``program(dp)`` (returns a defect law) at a fixed cap, or choose one by doubling."""
    if mode not in (EXACT, FLOAT):
        raise ValueError(f"mode must be {EXACT!r} or {FLOAT!r}")
    Engine = _ExactDP if mode == EXACT else _FloatDP
    if cap is not None:
        if cap < 0:
            raise ValueError("cap must be >= 0")
        dp = Engine(n, q, cap)
        return _finish(program(dp), dp.tail, mode, bound, cap, prov)
    c = min(max_defect, 32)
    while True:
        dp = Engine(n, q, c)
        law = program(dp)
        if c >= max_defect or float(dp.tail) <= AUTO_TAIL:
            return _finish(law, dp.tail, mode, bound, c, prov)
        c = min(2 * c, max_defect)


def _even_program(n, k):
    def shift_none(x, r):
        return 0

    def shift_pair(x, r):
        return n - x - r

    def program(dp):
        dp.init({(0, 0): 1})
        for _ in range(k):
            _kstep(dp, shift_none, "none")
            _kstep(dp, shift_pair, "pair")
        return dp.defect_law()
    return program


def _kstep(dp, shift, key):
    if isinstance(dp, _FloatDP):
        dp.step(shift, key)
    else:
        dp.step(shift)


def corank_dist_even(n: int, k: int, q: int, cap: int | None = None, mode: str = EXACT,
                     bound: float | None = None) -> Pmf:
    """Law of dim ker C_{2k} = sum_{i<=k} (n - X_{2i-1} - X_{2i}) with X_0 = 0."""
    if k == 0:
        return Pmf.point(0, mode)
    return _run(_even_program(n, k), n, q, n * k, cap, mode, bound, "exact-DP")


def corank_dist_odd(n: int, k: int, q: int, cap: int | None = None, mode: str = EXACT,
                    bound: float | None = None) -> Pmf:
    """Law of dim ker C_{2k-1} = dim ker C_{2k-2} + n - X_{2k-1}."""
    if k < 1:
        raise ValueError("odd prefixes need k >= 1")
    even = _even_program(n, k - 1)

    def program(dp):
        even(dp)
        _kstep(dp, lambda x, r: n - r, "odd-end")
        return dp.defect_law()
    return _run(program, n, q, n * k, cap, mode, bound, "exact-DP")


def corank_dist_truncated(n: int, k: int, q: int, cap: int | None = None, mode: str = EXACT,
                          bound: float | None = None) -> Pmf:
    """Law of dim ker of C_{2(k+1)} with its first and last n/2 rows removed.

    Rank increments of the truncated matrix: X*_0 is the rank of the m x n
    lower half of A_{11} (m = n/2), X*_1..X*_{2k} follow P_n, and the top m
    rows of A_{k+2,k+1} add the rank of a uniform m x (n - X*_{2k}) matrix.
    Hence the corank is m - X*_0 + sum_i (n - X*_{2i+1} - X*_{2i+2}) + (m - R).
    """
    if n % 2:
        raise OddN(f"the truncated ensemble needs even n, got {n}")
    m = n // 2
    init_law = rect_rank_dist(m, n, q, mode)
    end_laws = {}

    def terminal(d):
        if d not in end_laws:
            rl = rect_rank_dist(m, n - d, q, mode)
            end_laws[d] = {m - r: w for r, w in zip(rl.support, rl.weights) if w}
        return end_laws[d]

    def program(dp):
        dp.init({(x, m - x): w for x, w in zip(init_law.support, init_law.weights) if w})
        for _ in range(k):
            _kstep(dp, lambda x, r: 0, "none")
            _kstep(dp, lambda x, r: n - x - r, "pair")
        return dp.terminal(terminal)
    return _run(program, n, q, (k + 1) * n, cap, mode, bound, "exact-DP")


def corank_dist_product_finite(n: int, k: int, q: int, mode: str = EXACT) -> Pmf:
    """Law of dim ker C'_{2k-1} = n - X'_{2k-1}, where X'_{2i} = n - X'_{2i-1}."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if mode == EXACT:
        P = [[_exact_transition(n, q, d, r) for r in range(n + 1)] for d in range(n + 1)]
        law = [Fraction(0)] * (n + 1)
        law[0] = Fraction(1)
        for i in range(k):
            if i:
                law = law[::-1]  # deterministic reflection x -> n - x
            law = [sum(law[d] * P[d][r] for d in range(n + 1)) for r in range(n + 1)]
        return Pmf(0, law[::-1], 0, EXACT, "exact-DP")
    P = _float_matrix(n, q)
    v = np.zeros(n + 1)
    v[0] = 1.0
    for i in range(k):
        if i:
            v = v[::-1]
        v = v @ P
    return Pmf(0, v[::-1].copy(), 0, FLOAT, "exact-DP(float)")


# ---------------------------------------------------------------------------
# large-n limit of the product corank

def _is_prime(q: int) -> bool:
    return q >= 2 and all(q % d for d in range(2, math.isqrt(q) + 1))


def _poch_inf(x: float) -> float:
    """(x; x)_inf truncated once the factor differs from 1 by less than 1e-15."""
    out, t = 1.0, x
    while t >= 1e-15:
        out *= 1 - t
        t *= x
    return out


def product_corank_limit(q: int, k: int, cap: int = 40) -> Pmf:
    """Limit law of dim ker of a product of k uniform n x n matrices as n -> infinity.

    Sum over r_1 + ... + r_k = j of
    (q^{-1}; q^{-1})_inf^k prod_i q^{-r_i s_i} / ((q^{-1}; q^{-1})_{r_i} (q^{-1}; q^{-1})_{s_i})
    with s_i = r_1 + ... + r_i: each factor is the limit law of the extra
    corank r_i added by one more block when the corank is already s_{i-1}.
    """
    if not _is_prime(q):
        raise NotPrime(f"the limit law is stated for prime q, got {q}")
    if k < 1:
        raise ValueError("k must be >= 1")
    x = 1.0 / q
    fin = [1.0]
    for r in range(1, cap + 1):
        fin.append(fin[-1] * (1 - x ** r))
    f = np.zeros(cap + 1)
    f[0] = 1.0
    for _ in range(k):
        g = np.zeros(cap + 1)
        for s in range(cap + 1):
            for r in range(s + 1):
                g[s] += f[s - r] * x ** (r * s) / (fin[r] * fin[s])
        f = g
    f *= _poch_inf(x) ** k
    return Pmf(0, f, max(0.0, 1.0 - f.sum()), FLOAT, "series")


def product_corank_pmf(q: int, k: int, j: int) -> float:
    if j < 0:
        return 0.0
    return float(product_corank_limit(q, k, cap=max(40, j))[j])
