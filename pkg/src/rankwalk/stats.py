"""Empirical laws, total-variation distance and closeness diagnostics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .chain import FLOAT, Pmf


@dataclass
class EmpiricalPmf:
    """Counts per integer outcome."""

    counts: dict = field(default_factory=dict)
    trials: int = 0
    seed: int | None = None
    provenance: str = "Monte Carlo"

    @classmethod
    def from_samples(cls, samples, seed: int | None = None) -> "EmpiricalPmf":
        vals, cnt = np.unique(np.asarray(samples, dtype=np.int64), return_counts=True)
        return cls({int(v): int(c) for v, c in zip(vals, cnt)}, int(cnt.sum()), seed)

    def merge(self, other: "EmpiricalPmf") -> "EmpiricalPmf":
        c = dict(self.counts)
        for k, v in other.counts.items():
            c[k] = c.get(k, 0) + v
        seed = self.seed if self.seed == other.seed else None
        return EmpiricalPmf(c, self.trials + other.trials, seed, self.provenance)

    def frequency(self, x: int) -> float:
        return self.counts.get(x, 0) / self.trials if self.trials else 0.0

    def to_pmf(self) -> Pmf:
        if not self.counts:
            return Pmf(0, [], 0.0, FLOAT, self.provenance)
        lo, hi = min(self.counts), max(self.counts)
        w = [self.counts.get(x, 0) / self.trials for x in range(lo, hi + 1)]
        return Pmf(lo, w, 0.0, FLOAT, self.provenance)

    def mean(self) -> float:
        return sum(k * v for k, v in self.counts.items()) / self.trials

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["outcome", "count", "frequency"])
        for x in sorted(self.counts):
            w.writerow([x, self.counts[x], repr(self.counts[x] / self.trials)])
        return buf.getvalue()


def _as_pmf(p) -> Pmf:
    if isinstance(p, EmpiricalPmf):
        return p.to_pmf()
    if isinstance(p, Pmf):
        return p
    if isinstance(p, dict):
        lo, hi = min(p), max(p)
        return Pmf(lo, [p.get(x, 0) for x in range(lo, hi + 1)], 0.0, FLOAT)
    raise TypeError(f"cannot read a law from {type(p).__name__}")


@dataclass(frozen=True)
class TVBounds:
    truncated: float  # half l1 distance over the listed weights
    tails: float      # (tail_p + tail_r) / 2

    @property
    def upper(self) -> float:
        return min(1.0, self.truncated + self.tails)


def tv_bounds(p, r) -> TVBounds:
    p, r = _as_pmf(p), _as_pmf(r)
    lo = min(p.offset, r.offset)
    hi = max(p.offset + len(p), r.offset + len(r))
    a = np.zeros(hi - lo)
    b = np.zeros(hi - lo)
    a[p.offset - lo:p.offset - lo + len(p)] = p.probs()
    b[r.offset - lo:r.offset - lo + len(r)] = r.probs()
    return TVBounds(0.5 * float(np.abs(a - b).sum()),
                    0.5 * (float(p.tail_mass) + float(r.tail_mass)))


def tv_distance(p, r) -> float:
    """1/2 sum |p - r|, with tail masses counted as disjoint (a conservative upper bound)."""
    return tv_bounds(p, r).upper


def _phi(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def gaussian_fit_check(p, mean: float, sd: float) -> float:
    """sup over integer x of |F(x) - Phi((x + 1/2 - mean) / sd)|.

    Checked at every support point and one point below it, so a point mass
    gives about 1/2.
    """
    if sd <= 0:
        raise ValueError("sd must be > 0")
    p = _as_pmf(p)
    F = p.cdf()
    x = np.arange(p.offset, p.offset + len(p))
    z = (x + 0.5 - mean) / sd
    phi = np.array([_phi(v) for v in z])
    d = float(np.max(np.abs(F - phi))) if len(F) else 0.0
    below = _phi((p.offset - 0.5 - mean) / sd)
    return max(d, below)


def dkw_trials(tv_target: float, confidence: float, support: int = 32) -> int:
    """Trials so that the empirical law on ``support`` points is within TV
    ``tv_target`` of the truth with probability ``confidence``.

    L1 concentration for the empirical law on K points:
    P(||p_hat - p||_1 >= eps) <= (2^K - 2) exp(-N eps^2 / 2), with eps = 2 tv_target.
    """
    if not 0 < tv_target < 1:
        raise ValueError("tv_target must lie in (0, 1)")
    if confidence <= 0 or support <= 1:
        return 1
    if confidence >= 1:
        raise ValueError("confidence must be < 1")
    eps = 2 * tv_target
    log_states = support * math.log(2) + math.log1p(-2.0 ** (1 - support))
    n = 2 * (log_states + math.log(1 / (1 - confidence))) / eps ** 2
    return max(1, math.ceil(n))
