import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rankwalk.chain import mu_limit
from rankwalk.rng import Stream
from rankwalk.stats import EmpiricalPmf, tv_distance
from rankwalk.walk import (NotStabilized, WalkSpec, _rate_tables, check_floor,
                           d_minus_infinity_batch, default_floor, excursion_estimates,
                           excursion_samples, ju_pmf, lt_batch, sample_D, sample_D_minus_infinity,
                           sample_Ju, sample_Lt, sample_walk, walk_batch)


def test_zero_time():
    p = sample_walk(WalkSpec(2, "even", 3), 0.0, Stream(1))
    assert p.jumps == 0 and p.D == 0 and p.Z_t == 3
    assert sample_D(WalkSpec(3, "odd", -0.5), 0.0, 4) == (0, -0.5)


def test_rates():
    total, p_up = _rate_tables(2)
    assert total[128] == 2.0                      # a = 0: Exp(2) holding time
    assert p_up[128 + 2] == pytest.approx(0.2)    # a = 1: (1/2) / (2 + 1/2)
    a2 = np.arange(-128, 129)
    assert (p_up[a2 > 0] < 0.5).all() and (p_up[a2 < 0] > 0.5).all()


def test_first_holding_time_at_zero():
    times = [sample_walk(WalkSpec(2), 50.0, Stream(7).spawn(i)).times[1] for i in range(20_000)]
    assert np.mean(times) == pytest.approx(0.5, abs=0.02)


@settings(max_examples=30)
@given(st.sampled_from([2, 3, 5]), st.sampled_from(["even", "odd"]), st.integers(-6, 6),
       st.floats(0.0, 3.0), st.integers(0, 2 ** 40))
def test_path_invariants(q, parity, start, t, seed):
    start = start + (0.5 if parity == "odd" else 0)
    p = sample_walk(WalkSpec(q, parity, start), t, Stream(seed))
    steps = np.diff(p.states2)
    assert (np.abs(steps) == 2).all()
    assert p.D == int((steps < 0).sum())
    assert p.D + p.ups == p.jumps
    assert p.Z_t - start == p.ups - p.D
    assert (np.diff(p.times) > 0).all() and (p.times <= t).all()
    on_half = (p.states2 % 2 == 1)
    assert on_half.all() if parity == "odd" else not on_half.any()


def test_batch_matches_single_draws():
    spec = WalkSpec(3, "even", -2)
    D, Z, _ = walk_batch(spec, 1.3, 20, seed=5)
    for i in range(20):
        assert sample_D(spec, 1.3, Stream(5).spawn(i)) == (D[i], Z[i])


def test_down_jumps_bounded_by_poisson_mean():
    for start in (0, -2, -5):
        D, _, _ = walk_batch(WalkSpec(2, "even", start), 1.0, 100_000, seed=14)
        assert D.mean() <= 2.0 + 3 * D.std() / math.sqrt(len(D))


def test_no_jump_probability():
    for t in (0.1, 0.5, 1.0):
        _, _, J = walk_batch(WalkSpec(2), t, 100_000, seed=15)
        p = math.exp(-2 * t)
        assert np.mean(J == 0) == pytest.approx(p, abs=4 * math.sqrt(p * (1 - p) / 1e5))


@pytest.mark.parametrize("start", [0, 3, -4])
def test_jump_count_domination(start):
    t, trials = 1.0, 100_000
    _, _, J = walk_batch(WalkSpec(2, "even", start), t, trials, seed=16)
    tol = 4 / math.sqrt(trials)
    lam = 2 * t
    pois_cdf = np.cumsum([math.exp(-lam) * lam ** j / math.factorial(j) for j in range(60)])
    for x in range(abs(start), abs(start) + 30):
        bound_cdf = pois_cdf[(x - abs(start)) // 2]
        assert np.mean(J <= x) >= bound_cdf - tol


def test_d_minus_infinity_basics():
    D, Z, chk = d_minus_infinity_batch(2, 1.0, 20_000, seed=17)
    assert (D >= 0).all() and Z.dtype.kind == "i"
    assert chk.stable
    Do, Zo, _ = d_minus_infinity_batch(2, 1.0, 2000, seed=17, parity="odd")
    assert ((2 * Zo) % 2 == 1).all()
    d, z = sample_D_minus_infinity(2, 1.0, "even", Stream(17).spawn(3))
    assert (d, z) == (D[3], Z[3])
    assert default_floor(2, 1.0) == -20
    assert default_floor(2, 1e-9) == -40


def test_floor_stabilization_between_floors():
    D1, Z1, _ = d_minus_infinity_batch(2, 1.0, 100_000, seed=18, a_floor=-20)
    D2, Z2, _ = d_minus_infinity_batch(2, 1.0, 100_000, seed=19, a_floor=-30)
    assert tv_distance(EmpiricalPmf.from_samples(D1), EmpiricalPmf.from_samples(D2)) < 0.02
    assert tv_distance(EmpiricalPmf.from_samples(Z1), EmpiricalPmf.from_samples(Z2)) < 0.02


def test_shallow_floor_is_rejected():
    assert not check_floor(2, 1.0, a_floor=-1).stable
    with pytest.raises(NotStabilized):
        sample_D_minus_infinity(2, 1.0, a_floor=-1)


def test_small_time_means_no_down_jumps():
    D, _, _ = d_minus_infinity_batch(2, 1e-3, 20_000, seed=20)
    assert np.mean(D == 0) > 0.99


def test_ju_examples():
    assert ju_pmf(2, 0)[0] == pytest.approx(0.2887880951, abs=1e-10)
    assert ju_pmf(2, 1)[0] == pytest.approx(0.5775761902, abs=1e-10)
    for q, u in [(2, 0), (2, 3), (3, 1), (5, 0)]:
        assert ju_pmf(q, u, cap=20).weights.sum() == pytest.approx(1, abs=1e-10)


def test_ju_sampler_matches_pmf():
    draws = [sample_Ju(2, 1, Stream(21).spawn(i)) for i in range(100_000)]
    assert tv_distance(EmpiricalPmf.from_samples(draws), ju_pmf(2, 1)) < 0.01


def test_lt():
    L0 = [sample_Lt(2, 0.0, Stream(22).spawn(i)) for i in range(50_000)]
    assert tv_distance(EmpiricalPmf.from_samples(L0), ju_pmf(2, 0)) < 0.015
    L, D, Z = lt_batch(2, 1.0, 50_000, seed=23)
    assert (L >= D).all()
    assert (L >= D + np.maximum(Z, 0)).all()
    assert sample_Lt(2, 1.0, Stream(23).spawn(5)) == L[5]


def test_excursions():
    for q in (2, 3, 5):
        est = excursion_estimates(q, 20_000, 24, boot=20)
        assert est.E_U > 0.5
    U, dD = excursion_samples(2, 50_000, 25)
    mu = dD.mean() / U.mean()
    assert (dD - mu * U).mean() == pytest.approx(0, abs=1e-12)
    est = excursion_estimates(2, 200_000, 26, boot=50)
    assert abs(est.mu_hat - mu_limit(2)) <= 3 * est.se["mu_hat"] + 1e-12
    assert est.sigma2 > 0
    rec = est.records()
    assert {r["name"] for r in rec} >= {"sigma2", "mu_hat"}
    assert all(set(r) >= {"estimate", "bootstrap_se", "trials", "seed"} for r in rec)
