"""Seeded batch experiments with CSV/JSON reports.

Trial ``i`` of an experiment with seed ``s`` always draws from
``Stream(s).spawn(i)`` (Monte Carlo of the walk uses the seed ``s + 1``), so
serial and parallel runs give identical samples.  Chunks of trials are
farmed out to worker processes and concatenated in trial order.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .chain import (corank_dist_even, corank_dist_product_finite, corank_dist_truncated,
                    k_for_time, mu_limit, mu_n, product_corank_limit, time_scale)
from .ensembles import EnsembleSpec, mc_coranks
from .locker import localization_trials
from .stats import EmpiricalPmf, gaussian_fit_check, tv_bounds
from .walk import d_minus_infinity_batch, excursion_estimates, lt_batch

CSV_VERSION = 1
CSV_COLUMNS = ["kind", "q", "n", "k", "t_n", "quantity", "x", "value", "se", "provenance"]
KINDS = ("phase-scan", "critical-compare", "gaussian-check", "truncated", "product-limit",
         "localization", "constants")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    q: int = 2
    n: list = field(default_factory=lambda: [8])
    k: int | None = None
    t: list = field(default_factory=lambda: [1.0])
    trials: int = 10_000
    seed: int = 0
    workers: int = 1
    L: int = 2
    threshold: float | None = None
    excursions: int = 0
    out: str = "results"

    def __post_init__(self):
        if isinstance(self.n, int):
            self.n = [self.n]
        if isinstance(self.t, (int, float)):
            self.t = [float(self.t)]
        self.n = [int(x) for x in self.n]
        self.t = [float(x) for x in self.t]

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; choose one of {', '.join(KINDS)}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.n or min(self.n) < 1:
            raise ConfigError("n must be a non-empty list of positive block sizes")
        if self.k is not None and self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.k is None and (not self.t or min(self.t) <= 0):
            raise ConfigError("give k, or times t > 0 to derive k = floor((q-1) q^{n/2} t)")
        for n in self.n:
            for k in self.ks(n):
                if k < 1:
                    raise ConfigError(f"t={self.t} gives k=0 at n={n}; raise t or set k")
        if self.kind == "truncated" and any(n % 2 for n in self.n):
            raise ConfigError("truncated experiments need even n")
        if self.kind == "localization" and any(n % 2 for n in self.n):
            raise ConfigError("localization runs on the truncated ensemble; n must be even")

    def ks(self, n: int) -> list[int]:
        if self.k is not None:
            return [self.k]
        return [k_for_time(n, self.q, t) for t in self.t]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        return cls(**d)


# ---------------------------------------------------------------------------
# parallel chunks

def _chunk(task: tuple):
    what, args, first, count = task
    if what == "coranks":
        return mc_coranks(EnsembleSpec(*args), count, first)
    if what == "dinf":
        q, t, seed = args
        return d_minus_infinity_batch(q, t, count, seed, first_trial=first)[0]
    if what == "lt":
        q, t, seed = args
        return lt_batch(q, t, count, seed, first)[0]
    if what == "loc":
        n, k, q, L, seed = args
        return localization_trials(n, k, q, L, count, seed, first)
    raise ValueError(what)


def run_chunks(what: str, args: tuple, trials: int, workers: int):
    """Split trials 0..trials-1 into chunks; results concatenated in trial order."""
    if workers <= 1:
        return _chunk((what, args, 0, trials))
    size = math.ceil(trials / (4 * workers))
    tasks = [(what, args, s, min(size, trials - s)) for s in range(0, trials, size)]
    with ProcessPoolExecutor(workers) as ex:
        parts = list(ex.map(_chunk, tasks))
    if isinstance(parts[0], list):
        return [x for p in parts for x in p]
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# report

class Report:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.rows: list[list] = []
        self.metrics: list[dict] = []
        self.checks: list[dict] = []

    def row(self, n, k, quantity, x, value, se, provenance):
        q = self.cfg.q
        t_n = time_scale(n, q, k) if (n is not None and k is not None) else ""
        self.rows.append([self.cfg.kind, q, "" if n is None else n, "" if k is None else k,
                          _fmt(t_n), quantity, "" if x is None else x, _fmt(value), _fmt(se),
                          provenance])

    def pmf_rows(self, n, k, quantity, pmf, provenance):
        for x, w in zip(pmf.support, pmf.probs()):
            self.row(n, k, quantity, x, float(w), None, provenance)

    def metric(self, name, value, provenance, **where):
        self.metrics.append({"name": name, "value": value, "provenance": provenance, **where})

    def check(self, name, value, op, threshold, **where):
        ok = value <= threshold if op == "<=" else value < threshold if op == "<" else \
            value >= threshold if op == ">=" else value > threshold
        self.checks.append({"name": name, "value": value, "op": op, "threshold": threshold,
                            "passed": bool(ok), **where})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def write(self, out: Path):
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "results.csv", "w", newline="") as fh:
            fh.write(f"# rankwalk results schema v{CSV_VERSION}; columns fixed across kinds\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            w.writerows(self.rows)
        cfg = asdict(self.cfg)
        summary = {
            "schema": CSV_VERSION,
            "package_version": __version__,
            "config": cfg,
            "t_n": {str(n): [time_scale(n, self.cfg.q, k) for k in self.cfg.ks(n)]
                    for n in self.cfg.n},
            "trial_seeds": {"rule": "trial i draws from Stream(seed).spawn(i)",
                            "seed": self.cfg.seed, "trials": self.cfg.trials},
            "metrics": self.metrics,
            "checks": self.checks,
            "passed": self.passed,
        }
        with open(out / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _fmt(v):
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o).__name__)


# ---------------------------------------------------------------------------
# experiment kinds

def _phase_scan(cfg: ExperimentConfig, rep: Report):
    for n in cfg.n:
        for k in cfg.ks(n):
            p = corank_dist_even(n, k, cfg.q, mode="float")
            rep.row(n, k, "P(corank=0)", None, float(p[0]), None, "exact-DP")
            rep.row(n, k, "mean corank", None, p.mean(), None, "exact-DP")
            rep.row(n, k, "sd corank", None, math.sqrt(p.var()), None, "exact-DP")
            rep.row(n, k, "tail_mass", None, p.tail_mass, None, "exact-DP")


def _critical_compare(cfg: ExperimentConfig, rep: Report):
    thr = 0.05 if cfg.threshold is None else cfg.threshold
    for n in cfg.n:
        for k, t in zip(cfg.ks(n), cfg.t if cfg.k is None else [None]):
            t = time_scale(n, cfg.q, k) if t is None else t
            C = run_chunks("coranks", ("EvenC", n, k, cfg.q, cfg.seed), cfg.trials, cfg.workers)
            D = run_chunks("dinf", (cfg.q, t, cfg.seed + 1), cfg.trials, cfg.workers)
            ec, ed = EmpiricalPmf.from_samples(C, cfg.seed), EmpiricalPmf.from_samples(D)
            tv = tv_bounds(ec, ed).upper
            rep.pmf_rows(n, k, "corank C_2k", ec.to_pmf(), "Monte Carlo")
            rep.pmf_rows(n, k, "D_-inf,t", ed.to_pmf(), "Monte Carlo")
            rep.row(n, k, "TV", None, tv, None, "Monte Carlo")
            rep.metric("TV(corank, D_-inf)", tv, "Monte Carlo", n=n, k=k, t=t)
            rep.check("TV(corank, D_-inf)", tv, "<=", thr, n=n, k=k)


def _gaussian_check(cfg: ExperimentConfig, rep: Report):
    thr = 0.05 if cfg.threshold is None else cfg.threshold
    for n in cfg.n:
        for k in cfg.ks(n):
            p = corank_dist_even(n, k, cfg.q, mode="float")
            m, sd = p.mean(), math.sqrt(p.var())
            d = gaussian_fit_check(p, m, sd)
            rep.row(n, k, "mean", None, m, None, "exact-DP")
            rep.row(n, k, "sd", None, sd, None, "exact-DP")
            rep.row(n, k, "sup-CDF distance", None, d, None, "exact-DP")
            rep.metric("sup-CDF distance", d, "exact-DP", n=n, k=k)
            rep.check("sup-CDF distance", d, "<=", thr, n=n, k=k)


def _truncated(cfg: ExperimentConfig, rep: Report):
    from .walk import ju_pmf
    thr = 0.05 if cfg.threshold is None else cfg.threshold
    for n in cfg.n:
        for k in cfg.ks(n):
            p = corank_dist_truncated(n, k, cfg.q, mode="float")
            t = time_scale(n, cfg.q, k)
            L = EmpiricalPmf.from_samples(run_chunks("lt", (cfg.q, t, cfg.seed), cfg.trials,
                                                     cfg.workers))
            tv_l = tv_bounds(p, L).upper
            tv_j = tv_bounds(p, ju_pmf(cfg.q, 0)).upper
            rep.pmf_rows(n, k, "corank truncated", p, "exact-DP")
            rep.pmf_rows(n, k, "L_t", L.to_pmf(), "Monte Carlo")
            rep.row(n, k, "TV(exact, L_t)", None, tv_l, None, "Monte Carlo")
            rep.row(n, k, "TV(exact, J_0)", None, tv_j, None, "series")
            rep.metric("TV(exact, L_t)", tv_l, "Monte Carlo", n=n, k=k, t=t)
            rep.metric("TV(exact, J_0)", tv_j, "series", n=n, k=k)
            rep.check("TV(exact, L_t)", tv_l, "<=", thr, n=n, k=k)


def _product_limit(cfg: ExperimentConfig, rep: Report):
    thr = 0.02 if cfg.threshold is None else cfg.threshold
    k = cfg.k if cfg.k is not None else 3
    lim = product_corank_limit(cfg.q, k)
    rep.pmf_rows(None, k, "limit pmf", lim, "series")
    tvs = []
    for n in cfg.n:
        p = corank_dist_product_finite(n, k, cfg.q, mode="float")
        tv = tv_bounds(p, lim).upper
        tvs.append(tv)
        rep.pmf_rows(n, k, "finite pmf", p, "exact-DP")
        rep.row(n, k, "TV(finite, limit)", None, tv, None, "exact-DP")
        rep.metric("TV(finite, limit)", tv, "exact-DP", n=n, k=k)
    rep.check("TV(finite, limit) at largest n", tvs[int(np.argmax(cfg.n))], "<=", thr,
              n=max(cfg.n), k=k)


def _localization(cfg: ExperimentConfig, rep: Report):
    for n in cfg.n:
        for k in cfg.ks(n):
            rows = run_chunks("loc", (n, k, cfg.q, cfg.L, cfg.seed), cfg.trials, cfg.workers)
            deloc = float(np.mean([r.delocalized for r in rows]))
            loc = [r for r in rows if r.localized]
            min_c = min((r.corank for r in loc), default=None)
            rep.row(n, k, "P(delocalized)", None, deloc, math.sqrt(deloc * (1 - deloc) / len(rows)),
                    "Monte Carlo")
            rep.row(n, k, f"P({cfg.L}-localized)", None, len(loc) / len(rows), None, "Monte Carlo")
            rep.row(n, k, "localized count", None, len(loc), None, "Monte Carlo")
            rep.metric("P(delocalized)", deloc, "Monte Carlo", n=n, k=k)
            rep.metric("localized count", len(loc), "Monte Carlo", n=n, k=k, L=cfg.L)
            if min_c is not None:
                rep.check("min corank of localized instances", min_c, ">=", cfg.L, n=n, k=k)


def _constants(cfg: ExperimentConfig, rep: Report):
    ns = cfg.n if len(cfg.n) > 1 else list(range(2, 31))
    lim = mu_limit(cfg.q, "even")
    rep.row(None, None, "mu_limit(even)", None, lim, None, "series")
    rep.row(None, None, "mu_limit(odd)", None, mu_limit(cfg.q, "odd"), None, "series")
    rep.metric("mu_limit(even)", lim, "series")
    for n in ns:
        m = mu_n(n, cfg.q)
        rep.row(n, None, "mu_n", None, m, None, "exact-DP")
        if n % 2 == 0 and n >= 10:
            scaled = abs(m - lim) * cfg.q ** (n / 2)
            rep.check("|mu_n - mu_limit| q^{n/2}", scaled, "<=", 5.0, n=n)
    if cfg.excursions:
        est = excursion_estimates(cfg.q, cfg.excursions, cfg.seed)
        for r in est.records():
            rep.row(None, None, r["name"], None, r["estimate"], r["bootstrap_se"],
                    "Monte Carlo")
        z = abs(est.mu_hat - lim) / est.se["mu_hat"]
        rep.metric("excursion mu_hat", est.mu_hat, "Monte Carlo", se=est.se["mu_hat"])
        rep.check("|mu_hat - mu_limit| / SE", z, "<=", 3.0)


_RUNNERS = {
    "phase-scan": _phase_scan,
    "critical-compare": _critical_compare,
    "gaussian-check": _gaussian_check,
    "truncated": _truncated,
    "product-limit": _product_limit,
    "localization": _localization,
    "constants": _constants,
}


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> Report:
    cfg.validate()
    rep = Report(cfg)
    _RUNNERS[cfg.kind](cfg, rep)
    if write:
        rep.write(Path(cfg.out))
    return rep
