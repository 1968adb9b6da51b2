"""The continuous-time limit walk Z_t and the laws built from it.

At position a the walk jumps to a + 1 at rate q^{-a} and to a - 1 at rate
q^{a}.  Even parity lives on Z, odd parity on Z + 1/2; positions are stored
as doubled integers so both lattices are exact.

Random draws per trial, in order: for each jump one exponential holding time
and then one uniform for the direction.  |a| is capped at 64.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .chain import FLOAT, Pmf, _poch_inf
from .rng import Stream, as_stream, draw_exponential, draw_uniform, stream_key

A_CAP = 64
_OFF = 2 * A_CAP  # doubled-position offset into the rate tables
STABILITY_TV = 1e-2


class NotStabilized(RuntimeError):
    pass


class WalkCapReached(RuntimeError):
    pass


def _parity_bit(parity: str) -> int:
    if parity == "even":
        return 0
    if parity == "odd":
        return 1
    raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


@dataclass(frozen=True)
class WalkSpec:
    q: int
    parity: str = "even"
    start: float = 0

    def __post_init__(self):
        b = _parity_bit(self.parity)
        s2 = 2 * self.start
        if s2 != int(s2) or int(s2) % 2 != b:
            raise ValueError(f"start {self.start} is not on the {self.parity} lattice")
        if abs(self.start) > A_CAP:
            raise ValueError(f"|start| must be <= {A_CAP}")

    @property
    def start2(self) -> int:
        return int(2 * self.start)


@dataclass
class WalkPath:
    """Jump times T_0 = 0 < T_1 < ... <= t and the embedded states (doubled)."""

    times: np.ndarray
    states2: np.ndarray
    t: float
    downs: int

    @property
    def positions(self) -> np.ndarray:
        return self.states2 / 2

    @property
    def jumps(self) -> int:
        return len(self.times) - 1

    @property
    def ups(self) -> int:
        return self.jumps - self.downs

    @property
    def D(self) -> int:
        return self.downs

    @property
    def Z_t(self) -> float:
        return float(self.states2[-1]) / 2


@lru_cache(maxsize=None)
def _rate_tables(q: int):
    """(total rate, up probability) indexed by doubled position + 128."""
    a = np.arange(-_OFF, _OFF + 1) / 2.0
    with np.errstate(over="ignore"):
        up = np.power(float(q), -a)
        down = np.power(float(q), a)
        total = up + down
        p_up = 1.0 / (1.0 + np.power(float(q), 2 * a))
    total.setflags(write=False)
    p_up.setflags(write=False)
    return total, p_up


# ---------------------------------------------------------------------------
# kernels

@njit(cache=True)
def _run(total, p_up, z2, t, key, ctr, log_path, times, states):
    """Walk from doubled position z2 for time t.

    Returns (downs, z2, jumps, ctr, status); status -1 means the cap was hit.
    Path is written into ``times``/``states`` when ``log_path`` (grown by the caller on overflow:
    status -2).
    """
    clock = 0.0
    downs = 0
    jumps = 0
    while True:
        h = draw_exponential(key, ctr, total[z2 + 128])
        ctr += 1
        clock += h
        if clock > t:
            return downs, z2, jumps, ctr, 0
        u = draw_uniform(key, ctr)
        ctr += 1
        if u < p_up[z2 + 128]:
            z2 += 2
        else:
            z2 -= 2
            downs += 1
        jumps += 1
        if z2 > 128 or z2 < -128:
            return downs, z2, jumps, ctr, -1
        if log_path:
            if jumps >= times.shape[0]:
                return downs, z2, jumps, ctr, -2
            times[jumps] = clock
            states[jumps] = z2


@njit(cache=True)
def _walk_batch(total, p_up, z2, t, root, trial0, trials):
    D = np.empty(trials, dtype=np.int64)
    Z = np.empty(trials, dtype=np.int64)
    J = np.empty(trials, dtype=np.int64)
    dummy_t = np.zeros(1)
    dummy_s = np.zeros(1, dtype=np.int64)
    for i in range(trials):
        key = stream_key(root, trial0 + i)
        d, z, j, _, st = _run(total, p_up, z2, t, key, 0, False, dummy_t, dummy_s)
        if st < 0:
            return D, Z, J, i
        D[i] = d
        Z[i] = z
        J[i] = j
    return D, Z, J, -1


@njit(cache=True)
def _run_until(total, p_up, z2, target2, t, key, ctr):
    """Walk until reaching ``target2`` or time t; returns (downs, z2, elapsed, ctr, status)."""
    clock = 0.0
    downs = 0
    while z2 != target2:
        h = draw_exponential(key, ctr, total[z2 + 128])
        ctr += 1
        clock += h
        if clock > t:
            return downs, z2, t, ctr, 0
        u = draw_uniform(key, ctr)
        ctr += 1
        if u < p_up[z2 + 128]:
            z2 += 2
        else:
            z2 -= 2
            downs += 1
        if z2 > 128 or z2 < -128:
            return downs, z2, clock, ctr, -1
    return downs, z2, clock, ctr, 1


@njit(cache=True)
def _floor_batch(total, p_up, floor2, deeper2, t, root, trial0, trials):
    """Paired runs from floor2 and from deeper2.

    Run A starts at floor2 on substream 0.  Run B starts at deeper2 on
    substream 1 until it first reaches floor2, then reuses substream 0 for the
    remaining time, so the two runs coincide whenever B climbs quickly.
    """
    DA = np.empty(trials, dtype=np.int64)
    ZA = np.empty(trials, dtype=np.int64)
    DB = np.empty(trials, dtype=np.int64)
    ZB = np.empty(trials, dtype=np.int64)
    dummy_t = np.zeros(1)
    dummy_s = np.zeros(1, dtype=np.int64)
    for i in range(trials):
        key = stream_key(root, trial0 + i)
        k0 = stream_key(key, 0)
        k1 = stream_key(key, 1)
        d, z, _, _, st = _run(total, p_up, floor2, t, k0, 0, False, dummy_t, dummy_s)
        if st < 0:
            return DA, ZA, DB, ZB, i
        DA[i] = d
        ZA[i] = z
        d1, z1, el, _, st = _run_until(total, p_up, deeper2, floor2, t, k1, 0)
        if st < 0:
            return DA, ZA, DB, ZB, i
        if st == 1:
            d2, z1, _, _, st = _run(total, p_up, floor2, t - el, k0, 0, False, dummy_t, dummy_s)
            if st < 0:
                return DA, ZA, DB, ZB, i
            d1 += d2
        DB[i] = d1
        ZB[i] = z1
    return DA, ZA, DB, ZB, -1


@njit(cache=True)
def _excursions(total, p_up, key, count):
    """``count`` excursions from 0 (leave 0, return to 0): lengths and down-jump counts."""
    U = np.empty(count, dtype=np.float64)
    dD = np.empty(count, dtype=np.int64)
    ctr = 0
    for i in range(count):
        z2 = 0
        clock = 0.0
        downs = 0
        first = True
        while first or z2 != 0:
            first = False
            clock += draw_exponential(key, ctr, total[z2 + 128])
            ctr += 1
            u = draw_uniform(key, ctr)
            ctr += 1
            if u < p_up[z2 + 128]:
                z2 += 2
            else:
                z2 -= 2
                downs += 1
            if z2 > 128 or z2 < -128:
                return U, dD, i
        U[i] = clock
        dD[i] = downs
    return U, dD, -1


@njit(cache=True)
def _inverse_cdf(cum, u):
    lo, hi = 0, cum.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def _lt_batch(total, p_up, ju_cum, t, root, trial0, trials):
    L = np.empty(trials, dtype=np.int64)
    D = np.empty(trials, dtype=np.int64)
    Z = np.empty(trials, dtype=np.int64)
    dummy_t = np.zeros(1)
    dummy_s = np.zeros(1, dtype=np.int64)
    for i in range(trials):
        key = stream_key(root, trial0 + i)
        d, z2, _, ctr, st = _run(total, p_up, 0, t, key, 0, False, dummy_t, dummy_s)
        if st < 0:
            return L, D, Z, i
        z = z2 // 2
        u = draw_uniform(key, ctr)
        j = _inverse_cdf(ju_cum[abs(z)], u)
        D[i] = d
        Z[i] = z
        L[i] = d + max(z, 0) + j
    return L, D, Z, -1


def _check(status: int, what: str):
    if status >= 0:
        raise WalkCapReached(f"{what}: trial {status} left |a| <= {A_CAP}")


# ---------------------------------------------------------------------------
# public API

def sample_walk(spec: WalkSpec, t: float, rng=None) -> WalkPath:
    if t < 0:
        raise ValueError("t must be >= 0")
    s = as_stream(0 if rng is None else rng)
    total, p_up = _rate_tables(spec.q)
    size = 64
    while True:
        times = np.zeros(size)
        states = np.zeros(size, dtype=np.int64)
        states[0] = spec.start2
        d, z2, j, ctr, st = _run(total, p_up, spec.start2, float(t), s.key, np.int64(s.counter),
                                 True, times, states)
        if st == -2:
            size *= 4
            continue
        if st == -1:
            raise WalkCapReached(f"walk left |a| <= {A_CAP}")
        s.counter = int(ctr)
        return WalkPath(times[:j + 1].copy(), states[:j + 1].copy(), float(t), int(d))


def sample_D(spec: WalkSpec, t: float, rng=None) -> tuple[int, float]:
    """(D, Z_t): downward jumps in [0, t] and terminal position."""
    p = sample_walk(spec, t, rng)
    return p.D, p.Z_t


def walk_batch(spec: WalkSpec, t: float, trials: int, seed: int, first_trial: int = 0):
    """(D, Z_t, jumps) arrays; trial i equals ``sample_D`` on ``Stream(seed).spawn(i)``."""
    total, p_up = _rate_tables(spec.q)
    D, Z2, J, st = _walk_batch(total, p_up, spec.start2, float(t), Stream(seed).key,
                               np.int64(first_trial), int(trials))
    _check(st, "walk batch")
    return D, Z2 / 2 if spec.parity == "odd" else Z2 // 2, J


def default_floor(q: int, t: float) -> int:
    """-max(20, ceil(log_q(1/t)) + 10)."""
    return -max(20, math.ceil(math.log(1.0 / t, q)) + 10)


def _floor2(a_floor: int, parity: str) -> int:
    return 2 * a_floor - _parity_bit(parity)


def _empirical_tv(a: np.ndarray, b: np.ndarray) -> float:
    keys = np.concatenate([a, b])
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    ca = np.bincount(inv[:len(a)], minlength=inv.max() + 1) / len(a)
    cb = np.bincount(inv[len(a):], minlength=inv.max() + 1) / len(b)
    return 0.5 * float(np.abs(ca - cb).sum())


@dataclass
class FloorCheck:
    a_floor: int
    deeper: int
    tv: float
    trials: int

    @property
    def stable(self) -> bool:
        return self.tv < STABILITY_TV


def check_floor(q: int, t: float, parity: str = "even", a_floor: int | None = None,
                trials: int = 10_000, seed: int = 0, depth: int = 5) -> FloorCheck:
    """Empirical TV between the (D, Z) laws from ``a_floor`` and ``a_floor - depth``."""
    a_floor = default_floor(q, t) if a_floor is None else int(a_floor)
    total, p_up = _rate_tables(q)
    f2 = _floor2(a_floor, parity)
    DA, ZA, DB, ZB, st = _floor_batch(total, p_up, f2, f2 - 2 * depth, float(t),
                                      Stream(seed).key, np.int64(0), int(trials))
    _check(st, "floor check")
    tv = _empirical_tv(np.stack([DA, ZA], 1), np.stack([DB, ZB], 1))
    return FloorCheck(a_floor, a_floor - depth, tv, trials)


@lru_cache(maxsize=64)
def _validated_floor(q, t, parity, a_floor):
    chk = check_floor(q, t, parity, a_floor)
    if not chk.stable:
        raise NotStabilized(f"TV {chk.tv:.4f} between floors {chk.a_floor} and {chk.deeper} "
                            f"is not below {STABILITY_TV}")
    return chk


def d_minus_infinity_batch(q: int, t: float, trials: int, seed: int, parity: str = "even",
                           a_floor: int | None = None, first_trial: int = 0):
    """(D, Z) arrays approximating (D_{-inf,t}, Z_{-inf,t}); the floor is validated first."""
    if t <= 0:
        raise ValueError("t must be > 0")
    a_floor = default_floor(q, t) if a_floor is None else int(a_floor)
    chk = _validated_floor(int(q), float(t), parity, a_floor)
    start = (2 * a_floor - _parity_bit(parity)) / 2
    D, Z, _ = walk_batch(WalkSpec(q, parity, start), t, trials, seed, first_trial)
    return D, Z, chk


def sample_D_minus_infinity(q: int, t: float, parity: str = "even", rng=None,
                            a_floor: int | None = None) -> tuple[int, float]:
    if t <= 0:
        raise ValueError("t must be > 0")
    a_floor = default_floor(q, t) if a_floor is None else int(a_floor)
    _validated_floor(int(q), float(t), parity, a_floor)
    start = (2 * a_floor - _parity_bit(parity)) / 2
    return sample_D(WalkSpec(q, parity, start), t, rng)


# ---------------------------------------------------------------------------
# J_u and L_t

def ju_pmf(q: int, u: int, cap: int = 40) -> Pmf:
    """P(J_u = k) = q^{-k(k+u)} (q^{-1}; q^{-1})_inf / ((q^{-1}; q^{-1})_k (q^{-1}; q^{-1})_{k+u})."""
    if u < 0:
        raise ValueError("u must be >= 0")
    x = 1.0 / q
    fin = [1.0]
    for r in range(1, cap + u + 1):
        fin.append(fin[-1] * (1 - x ** r))
    inf = _poch_inf(x)
    w = np.array([x ** (k * (k + u)) * inf / (fin[k] * fin[k + u]) for k in range(cap + 1)])
    return Pmf(0, w, max(0.0, 1.0 - w.sum()), FLOAT, "series")


@lru_cache(maxsize=None)
def _ju_cumulative(q: int, umax: int = A_CAP, cap: int = 40) -> np.ndarray:
    out = np.empty((umax + 1, cap + 1))
    for u in range(umax + 1):
        c = np.cumsum(ju_pmf(q, u, cap).weights)
        c[-1] = max(c[-1], 1.0)
        out[u] = c
    out.setflags(write=False)
    return out


def sample_Ju(q: int, u: int, rng=None) -> int:
    s = as_stream(0 if rng is None else rng)
    return int(_inverse_cdf(_ju_cumulative(q)[u], s.uniform()))


def lt_batch(q: int, t: float, trials: int, seed: int, first_trial: int = 0):
    """(L_t, D_{0,t}, Z_t) arrays, with J drawn after the walk on the same trial stream."""
    total, p_up = _rate_tables(q)
    L, D, Z, st = _lt_batch(total, p_up, _ju_cumulative(q), float(t), Stream(seed).key,
                            np.int64(first_trial), int(trials))
    _check(st, "L_t batch")
    return L, D, Z


def sample_Lt(q: int, t: float, rng=None) -> int:
    if t < 0:
        raise ValueError("t must be >= 0")
    s = as_stream(0 if rng is None else rng)
    d, z = sample_D(WalkSpec(q, "even", 0), t, s)
    z = int(z)
    return d + max(z, 0) + sample_Ju(q, abs(z), s)


# ---------------------------------------------------------------------------
# excursions

@dataclass
class ExcursionEstimates:
    E_U: float
    E_dD: float
    Var_V: float
    sigma2: float
    mu_hat: float
    se: dict
    trials: int
    seed: int

    def records(self) -> list[dict]:
        return [{"name": k, "estimate": getattr(self, k), "bootstrap_se": self.se[k],
                 "trials": self.trials, "seed": self.seed}
                for k in ("E_U", "E_dD", "Var_V", "sigma2", "mu_hat")]

    def to_json(self) -> str:
        return json.dumps(self.records())


def _plugin(U, dD):
    mu = dD.mean() / U.mean()
    V = dD - mu * U
    var_v = V.var(ddof=1) if len(V) > 1 else 0.0
    return U.mean(), dD.mean(), var_v, var_v / U.mean(), mu


def excursion_samples(q: int, trials: int, seed: int):
    total, p_up = _rate_tables(q)
    U, dD, st = _excursions(total, p_up, Stream(seed).key, int(trials))
    _check(st, "excursions")
    return U, dD


def excursion_estimates(q: int, trials: int, rng=0, boot: int = 100) -> ExcursionEstimates:
    """Plug-in estimates from i.i.d. excursions of Z from 0, with bootstrap SEs.

    mu_hat = mean(dD) / mean(U), V = dD - mu_hat U, sigma2 = Var(V) / E U.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    s = as_stream(rng)
    U, dD = excursion_samples(q, trials, s.key)
    est = _plugin(U, dD.astype(np.float64))
    gen = s.spawn(1).numpy()
    reps = np.empty((boot, 5))
    for b in range(boot):
        idx = gen.integers(0, trials, trials)
        reps[b] = _plugin(U[idx], dD[idx].astype(np.float64))
    se = reps.std(axis=0, ddof=1) if boot > 1 else np.full(5, np.nan)
    names = ("E_U", "E_dD", "Var_V", "sigma2", "mu_hat")
    return ExcursionEstimates(*map(float, est), se=dict(zip(names, map(float, se))),
                              trials=trials, seed=s.seed)
