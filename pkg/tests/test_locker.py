import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rankwalk.ensembles import EnsembleSpec, sample_trial
from rankwalk.fmat import FqMatrix
from rankwalk.locker import (BadLength, BadWindow, KernelTooLarge, SupportProfile,
                             is_delocalized, is_L_localized, localization_trials,
                             support_blocks, trials_csv, windows)


def test_support_blocks():
    assert support_blocks(np.zeros(6), 2) == set()
    assert support_blocks([0, 0, 1, 0, 0, 0], 2) == {2}
    assert support_blocks([1, 0, 0, 3], 2) == {1, 2}
    with pytest.raises(BadLength):
        support_blocks([1, 0, 0], 2)


def test_delocalized_examples():
    assert is_delocalized(FqMatrix.identity(2, 6), 2)
    assert not is_delocalized(FqMatrix.zeros(2, 6, 6), 2)
    # n=2, q=2: columns of block 2 vanish, so e_3 is a kernel vector supported on block 2
    M = np.array([[1, 0, 0, 0, 0, 0],
                  [1, 1, 0, 0, 0, 0],
                  [0, 1, 0, 0, 0, 0],
                  [0, 0, 0, 0, 1, 0],
                  [0, 0, 0, 0, 1, 1],
                  [0, 0, 0, 0, 0, 1]])
    C = FqMatrix(2, M)
    assert not is_delocalized(C, 2)
    assert not is_delocalized(C, 2, strategy="enumerate")
    assert {2} in SupportProfile.of(C, 2).supports


def test_window_reduction_needs_banded_input():
    M = np.zeros((2, 6), dtype=np.int64)
    M[0, 0] = M[0, 5] = 1  # one row meeting blocks 1 and 3
    C = FqMatrix(2, M)
    assert is_delocalized(C, 2) == is_delocalized(C, 2, strategy="enumerate")
    with pytest.raises(KernelTooLarge):
        is_delocalized(C, 2, strategy="window")
    wide = np.zeros((1, 30), dtype=np.int64)
    wide[0, 0] = wide[0, 29] = 1  # corank 29, far past the enumeration limit
    with pytest.raises(KernelTooLarge):
        is_delocalized(FqMatrix(2, wide), 2)


@settings(max_examples=150)
@given(st.integers(1, 4), st.integers(0, 2 ** 40), st.sampled_from([(2, 2), (2, 4), (4, 2)]))
def test_window_reduction_agrees_with_enumeration(k, seed, nq):
    n, q = nq
    M = sample_trial(EnsembleSpec("TruncatedC", n, k, q, seed), 0)
    if M.cols > 24 or M.corank() > 4:
        return
    assert is_delocalized(M, n) == is_delocalized(M, n, strategy="enumerate")


def test_windows():
    assert windows(9, 2) == [(1, 4), (5, 8)]
    assert windows(3, 3) == [(1, 1), (2, 2), (3, 3)]
    with pytest.raises(BadWindow):
        windows(3, 4)
    with pytest.raises(BadWindow):
        is_L_localized(FqMatrix.zeros(2, 4, 4), 2, 3)


def test_localized_examples():
    assert not any(is_L_localized(FqMatrix.identity(3, 8), 2, L) for L in (1, 2, 3, 4))
    M = FqMatrix.identity(2, 6)
    M.entries[:, 0] = 0  # kernel vector e_1 inside the first window
    assert is_L_localized(M, 2, 1)


@settings(max_examples=80)
@given(st.integers(0, 2 ** 40), st.integers(1, 3), st.integers(2, 12))
def test_localized_implies_rank_deficiency(seed, L, k):
    M = sample_trial(EnsembleSpec("TruncatedC", 4, k, 2, seed), 0)
    if L <= k + 1 and is_L_localized(M, 4, L):
        assert M.corank() >= L


def test_disjoint_windows_are_nearly_independent():
    rows = localization_trials(8, 16, 2, 2, 5000, seed=31)
    a = np.array([r.windows[0] for r in rows])
    b = np.array([r.windows[1] for r in rows])
    joint = np.mean(a & b)
    assert abs(joint - a.mean() * b.mean()) < 0.01
    for r in rows:
        if r.localized:
            assert r.corank >= 2


def test_trials_csv():
    rows = localization_trials(4, 3, 2, 2, 4, seed=1)
    lines = trials_csv(rows).splitlines()
    assert lines[0] == "seed,trial,n,k,L,delocalized,localized,corank"
    assert len(lines) == 5 and lines[1].startswith("1,0,4,3,2,")
