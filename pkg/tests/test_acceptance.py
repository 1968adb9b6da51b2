"""The twelve acceptance criteria, each at its stated tolerance and runtime budget."""

from __future__ import annotations

import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from rankwalk.chain import (ChainSpec, chain_states_at, corank_dist_even, corank_dist_odd,
                            corank_dist_product_finite, corank_dist_truncated, k_for_time,
                            mu_limit, mu_n, product_corank_limit, rescale_index, stationary,
                            time_scale, transition_prob)
from rankwalk.ensembles import (EnsembleSpec, materialize_prefix, mc_coranks,
                                product_corank_identity_check, sample_blocks)
from rankwalk.fmat import rank, rank_batch, stream_rank_increments
from rankwalk.locker import localization_trials
from rankwalk.rng import Stream
from rankwalk.stats import EmpiricalPmf, gaussian_fit_check, tv_distance
from rankwalk.walk import (WalkSpec, d_minus_infinity_batch, excursion_estimates, ju_pmf,
                           lt_batch, walk_batch)

from . import oracles

MU_LIMIT_Q2 = 1.18920


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def _exact(pmf) -> dict:
    return {x: w for x, w in pmf.as_dict().items()}


# 1 ---------------------------------------------------------------------------

def test_c01_exact_oracle_equivalence(criterion):
    tag = criterion(1, "exact DP equals exhaustive enumeration (q=2, n<=2, k<=2)")
    with Timer() as tm:
        cases = 0
        for n in (1, 2):
            for k in (1, 2):
                assert _exact(corank_dist_even(n, k, 2)) == oracles.census(oracles.even_template(n, k))
                assert _exact(corank_dist_odd(n, k, 2)) == oracles.census(oracles.odd_template(n, k))
                want = oracles.census(oracles.product_template(n, k))
                assert _exact(corank_dist_product_finite(n, k, 2)) == want
                assert want == oracles.product_census(n, k)
                cases += 4
        for k in (1, 2):
            assert _exact(corank_dist_truncated(2, k, 2)) == oracles.census(
                oracles.truncated_template(2, k))
            cases += 1
        assert corank_dist_even(1, 1, 2).as_dict() == {0: Fraction(3, 4), 1: Fraction(1, 4)}
    tag.detail(f"{cases} laws identical, {tm.elapsed:.1f}s")
    assert tm.elapsed < 10


# 2 ---------------------------------------------------------------------------

def test_c02_kernel_matches_empirical_rank(criterion):
    tag = criterion(2, "P_n(d,.) vs empirical rank of uniform (n-d) x n, TV <= 0.02")
    trials = 100_000
    worst = 0.0
    with Timer() as tm:
        for q in (2, 3):
            for n in range(1, 6):
                blocks = sample_blocks(n, trials, q, Stream(2024).spawn(q * 10 + n))
                for d in range(n + 1):
                    ranks = rank_batch(blocks[:, :n - d, :], q)
                    emp = EmpiricalPmf.from_samples(ranks)
                    exact = {r: transition_prob(n, q, d, r, "float") for r in range(n + 1)}
                    tv = tv_distance(emp, exact)
                    worst = max(worst, tv)
                    assert tv <= 0.02, (q, n, d, tv)
    tag.detail(f"max TV {worst:.4f}, {tm.elapsed:.0f}s")
    assert tm.elapsed < 60


# 3 ---------------------------------------------------------------------------

def test_c03_per_instance_identities(criterion):
    tag = criterion(3, "streaming = dense ranks, defect identity, product identity (1000 instances)")
    rnd = random.Random(3)
    failures = 0
    with Timer() as tm:
        for i in range(1000):
            q, n, k = rnd.choice((2, 3, 4)), rnd.randint(1, 6), rnd.randint(1, 8)
            s = Stream(33).spawn(i)
            blocks = sample_blocks(n, 2 * k, q, s)
            tr = stream_rank_increments(n, blocks, q)
            dense = [rank(materialize_prefix(blocks, n, j, q)) for j in range(1, 2 * k + 1)]
            failures += tr.ranks() != dense
            C2k = materialize_prefix(blocks, n, 2 * k, q)
            defect = sum(n - tr.increments[2 * i] - tr.increments[2 * i + 1] for i in range(k))
            failures += C2k.corank() != defect
            failures += not product_corank_identity_check(n, k, q, s.spawn(1))
    tag.detail(f"{failures} failures, {tm.elapsed:.0f}s")
    assert failures == 0
    assert tm.elapsed < 120


# 4 ---------------------------------------------------------------------------

def test_c04_detailed_balance_and_cycles(criterion):
    tag = criterion(4, "detailed balance and Kolmogorov cycles exact (n<=12, q in 2..5)")
    rnd = random.Random(4)
    with Timer() as tm:
        for q in (2, 3, 4, 5):
            for n in range(1, 13):
                pi = stationary(n, q).weights
                P = [[transition_prob(n, q, d, r) for r in range(n + 1)] for d in range(n + 1)]
                for d in range(n + 1):
                    assert sum(P[d]) == 1
                    for r in range(n + 1):
                        assert pi[d] * P[d][r] == pi[r] * P[r][d]
                for _ in range(100 // 12 + 1):
                    cyc = [rnd.randint(0, n) for _ in range(rnd.randint(2, 6))]
                    cyc.append(cyc[0])
                    fwd = math.prod(P[a][b] for a, b in zip(cyc, cyc[1:]))
                    bwd = math.prod(P[b][a] for a, b in zip(cyc, cyc[1:]))
                    assert fwd == bwd
    tag.detail(f"{tm.elapsed:.1f}s")
    assert tm.elapsed < 10


# 5 ---------------------------------------------------------------------------

def test_c05_subcritical(criterion):
    tag = criterion(5, "subcritical: P(corank C_2k = 0) >= 0.95 at q=2, n=12, k=3")
    assert time_scale(12, 2, 3) <= 0.05
    p0 = float(corank_dist_even(12, 3, 2)[0])
    tag.detail(f"P = {p0:.5f}")
    assert p0 >= 0.95


# 6 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def d_minus_infinity_q2_t1():
    D, _, chk = d_minus_infinity_batch(2, 1.0, 100_000, seed=61)
    return EmpiricalPmf.from_samples(D), chk


def test_c06_critical_regime(criterion, d_minus_infinity_q2_t1):
    tag = criterion(6, "critical: TV(MC corank C_2k, D_-inf,1) <= 0.05 at n=16, decreasing from n=8")
    law_d, chk = d_minus_infinity_q2_t1
    tvs = {}
    with Timer() as tm:
        for n in (8, 16):
            k = k_for_time(n, 2, 1.0)
            C = mc_coranks(EnsembleSpec("EvenC", n, k, 2, seed=60), 100_000)
            tvs[n] = tv_distance(EmpiricalPmf.from_samples(C), law_d)
    tag.detail(f"TV n=8 {tvs[8]:.4f}, n=16 {tvs[16]:.4f}, floor TV {chk.tv:.4f}, {tm.elapsed:.0f}s")
    assert k_for_time(16, 2, 1.0) == 256
    assert tvs[16] <= 0.05
    assert tvs[16] < tvs[8]
    assert tm.elapsed < 600


# 7 ---------------------------------------------------------------------------

def test_c07_gaussian_regime(criterion):
    tag = criterion(7, "Gaussian: sup-CDF distance <= 0.05 at q=2, n=8, t_n=200")
    with Timer() as tm:
        k = k_for_time(8, 2, 200.0)
        p = corank_dist_even(8, k, 2, mode="float")
        d = gaussian_fit_check(p, p.mean(), math.sqrt(p.var()))
    tag.detail(f"k={k}, distance {d:.4f}, tail {p.tail_mass:.1e}, {tm.elapsed:.1f}s")
    assert k == 3200
    assert d <= 0.05
    assert tm.elapsed < 60


# 8 ---------------------------------------------------------------------------

def test_c08_drift_constant(criterion):
    tag = criterion(8, "drift: |mu_n - 1.18920| <= 5 2^{-n/2}; excursion mu_hat within 3 SE")
    with Timer() as tm:
        for n in range(10, 31, 2):
            assert abs(mu_n(n, 2) - MU_LIMIT_Q2) <= 5 * 2 ** (-n / 2), n
        est = excursion_estimates(2, 1_000_000, 8)
        z = abs(est.mu_hat - mu_limit(2)) / est.se["mu_hat"]
    tag.detail(f"mu_hat {est.mu_hat:.5f} +- {est.se['mu_hat']:.5f} (z={z:.2f}), {tm.elapsed:.0f}s")
    assert z <= 3
    assert tm.elapsed < 300


# 9 ---------------------------------------------------------------------------

def test_c09_truncated_ensemble(criterion):
    tag = criterion(9, "truncated: TV to J_0 at n=12,k=4 and to L_1 at n=16,k=256, both <= 0.05")
    with Timer() as tm:
        tv1 = tv_distance(corank_dist_truncated(12, 4, 2, mode="float"), ju_pmf(2, 0))
        exact = corank_dist_truncated(16, 256, 2, mode="float")
        L, _, _ = lt_batch(2, time_scale(16, 2, 256), 100_000, seed=9)
        tv2 = tv_distance(exact, EmpiricalPmf.from_samples(L))
    tag.detail(f"TV(J_0) {tv1:.4f}, TV(L_1) {tv2:.4f}, {tm.elapsed:.0f}s")
    assert tv1 <= 0.05
    assert tv2 <= 0.05
    assert tm.elapsed < 600


# 10 --------------------------------------------------------------------------

def test_c10_product_limit(criterion):
    tag = criterion(10, "product limit: TV <= 0.02 at n=16, below the n=8 TV (q=2, k=3)")
    with Timer() as tm:
        lim = product_corank_limit(2, 3)
        tv8 = tv_distance(corank_dist_product_finite(8, 3, 2, mode="float"), lim)
        tv16 = tv_distance(corank_dist_product_finite(16, 3, 2, mode="float"), lim)
    tag.detail(f"TV n=8 {tv8:.2e}, n=16 {tv16:.2e}")
    assert tv16 <= 0.02
    assert tv16 < tv8
    assert tm.elapsed < 60


# 11 --------------------------------------------------------------------------

def test_c11_localization(criterion):
    tag = criterion(11, "localization: P(delocalized) >= 0.9 at n=16,k=8; 2-localized seen at t_n ~ 1")
    with Timer() as tm:
        rows = localization_trials(16, 8, 2, 1, 1000, seed=110)
        deloc = np.mean([r.delocalized for r in rows])
        k = k_for_time(8, 2, 1.0)
        rows = localization_trials(8, k, 2, 2, 10_000, seed=111)
        loc = [r for r in rows if r.localized]
    tag.detail(f"P(deloc) {deloc:.3f}; {len(loc)} localized of 10^4 at k={k}, {tm.elapsed:.0f}s")
    assert deloc >= 0.9
    assert len(loc) >= 5
    assert all(r.corank >= 2 for r in loc)
    assert tm.elapsed < 600


# 12 --------------------------------------------------------------------------

def test_c12_marginal_convergence(criterion):
    tag = criterion(12, "marginals: TV(Y_t, Z_t) at n=16 below n=8 and <= 0.1, t in {0.5, 1}")
    trials = 100_000
    out = []
    with Timer() as tm:
        for t in (0.5, 1.0):
            _, Z, _ = walk_batch(WalkSpec(2, "even", 0), t, trials, seed=120)
            law_z = EmpiricalPmf.from_samples(Z)
            tvs = {}
            for n in (8, 16):
                idx = rescale_index(n, 2, t)
                X = chain_states_at(ChainSpec(n, 2, "float"), n // 2, [idx], trials, seed=121)
                tvs[n] = tv_distance(EmpiricalPmf.from_samples(X[:, 0] - n // 2), law_z)
            out.append((t, tvs))
            assert tvs[16] < tvs[8], (t, tvs)
            assert tvs[16] <= 0.1, (t, tvs)
    tag.detail(", ".join(f"t={t}: {v[8]:.4f} -> {v[16]:.4f}" for t, v in out)
               + f", {tm.elapsed:.0f}s")
    assert tm.elapsed < 600
