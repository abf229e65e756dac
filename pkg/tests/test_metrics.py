import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pauc_dro.metrics import ScoreSet, opauc_exact, roc_auc, tpauc_exact
from pauc_dro.oracle import auc_bruteforce, pauc_bruteforce

scores = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=30)
coarse = st.lists(st.integers(0, 6).map(lambda k: k / 2), min_size=1, max_size=30)


def test_roc_auc_examples():
    assert roc_auc(ScoreSet([1.0], [0.0])) == 1.0
    assert roc_auc(ScoreSet([0.5], [0.5])) == 0.5
    assert roc_auc(ScoreSet([0.9, 0.4], [0.8, 0.3, 0.1])) == pytest.approx(5 / 6, abs=1e-15)


def test_degenerate_class():
    with pytest.raises(ValueError, match="degenerate class"):
        ScoreSet([], [0.1])
    with pytest.raises(ValueError, match="degenerate class"):
        ScoreSet([0.3], [])


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        ScoreSet([np.nan], [0.0])


def test_opauc_examples():
    ss = ScoreSet([0.9, 0.4], [0.8, 0.3, 0.1])
    assert opauc_exact(ss, 0, 1 / 3, normalized=False) == pytest.approx(1 / 6, abs=1e-15)
    assert opauc_exact(ss, 0, 1 / 3, normalized=True) == 0.5
    assert opauc_exact(ss, 0, 1, normalized=False) == roc_auc(ss)


def test_opauc_empty_window():
    ss = ScoreSet([0.9, 0.4], [0.8, 0.3, 0.1])
    with pytest.raises(ValueError, match="empty FPR window"):
        opauc_exact(ss, 0, 0.2)
    with pytest.raises(ValueError):
        opauc_exact(ss, 0.5, 0.5)


def test_tpauc_examples():
    ss = ScoreSet([0.9, 0.6, 0.4], [0.5, 0.3, 0.2, 0.1])
    assert tpauc_exact(ss, 2 / 3, 0.5, normalized=False) == 0.25
    assert tpauc_exact(ss, 2 / 3, 0.5, normalized=True) == 0.75
    sep = ScoreSet([2.0, 3.0, 4.0], [0.0, 1.0])
    for a, b in [(1 / 3, 0.5), (1.0, 1.0), (2 / 3, 1.0)]:
        assert tpauc_exact(sep, a, b) == 1.0


def test_tpauc_empty_window():
    ss = ScoreSet([0.9, 0.6], [0.5, 0.3])
    with pytest.raises(ValueError, match="empty selection window"):
        tpauc_exact(ss, 0.4, 0.5)
    with pytest.raises(ValueError, match="empty selection window"):
        tpauc_exact(ss, 1.0, 0.4)


def test_window_float_slack():
    # 10 * 0.3 is 2.9999999999999996 in floating point
    ss = ScoreSet([1.0], np.arange(10) / 10)
    assert opauc_exact(ss, 0, 0.3, normalized=False) == pytest.approx(3 / 10)


def test_tied_negatives_at_window_edge():
    ss = ScoreSet([0.5], [0.7, 0.2, 0.7])
    assert opauc_exact(ss, 0, 1 / 3) == 0.0
    assert opauc_exact(ss, 2 / 3, 1) == 1.0


@given(coarse, coarse, st.floats(0.01, 1.0), st.floats(0.0, 1.0))
def test_opauc_matches_bruteforce(pos, neg, a1, frac):
    a0 = a1 * frac
    n = len(neg)
    if math.ceil(n * a0 - 1e-9) >= math.floor(n * a1 + 1e-9):
        return
    ss = ScoreSet(pos, neg)
    for norm in (True, False):
        assert opauc_exact(ss, a0, a1, norm) == pauc_bruteforce(pos, neg, "opauc", a0, a1, norm)


@given(coarse, coarse, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_tpauc_matches_bruteforce(pos, neg, a, b):
    if math.floor(len(pos) * a + 1e-9) < 1 or math.floor(len(neg) * b + 1e-9) < 1:
        return
    ss = ScoreSet(pos, neg)
    for norm in (True, False):
        assert tpauc_exact(ss, a, b, norm) == pauc_bruteforce(pos, neg, "tpauc", a, b, norm)


@given(coarse, coarse)
def test_roc_auc_matches_bruteforce(pos, neg):
    assert roc_auc(ScoreSet(pos, neg)) == pytest.approx(auc_bruteforce(pos, neg), abs=1e-15)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20, unique=True).flatmap(
    lambda v: st.integers(1, len(v) - 1).map(lambda k: (v[:k], v[k:])) if len(v) > 1 else st.nothing()))
def test_full_window_equals_auc_without_ties(split):
    pos, neg = split
    ss = ScoreSet(pos, neg)
    assert opauc_exact(ss, 0, 1, normalized=False) == roc_auc(ss)


@given(coarse, coarse, st.floats(0.05, 1.0))
def test_rank_invariance(pos, neg, b):
    # grid values stay distinct under the warp in floating point
    if math.floor(len(neg) * b + 1e-9) < 1:
        return
    ss = ScoreSet(pos, neg)
    warp = ScoreSet(np.exp(np.asarray(pos)) * 3 + 1, np.exp(np.asarray(neg)) * 3 + 1)
    assert opauc_exact(ss, 0, b) == opauc_exact(warp, 0, b)
    if len(pos) >= 2:
        assert tpauc_exact(ss, 0.5, b) == tpauc_exact(warp, 0.5, b)


@given(scores, st.lists(st.floats(-5, 5), min_size=4, max_size=30))
def test_unnormalized_opauc_monotone_in_alpha1(pos, neg):
    ss = ScoreSet(pos, neg)
    n = len(neg)
    vals = [opauc_exact(ss, 0, k / n, normalized=False) for k in range(1, n + 1)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


@given(scores, scores, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_tpauc_ranges(pos, neg, a, b):
    k1 = math.floor(len(pos) * a + 1e-9)
    k2 = math.floor(len(neg) * b + 1e-9)
    if k1 < 1 or k2 < 1:
        return
    ss = ScoreSet(pos, neg)
    assert 0.0 <= tpauc_exact(ss, a, b) <= 1.0
    assert 0.0 <= tpauc_exact(ss, a, b, False) <= k1 * k2 / (len(pos) * len(neg)) + 1e-15


def test_reversed_separation_is_zero():
    ss = ScoreSet([0.0, 0.1], [0.5, 0.9, 0.7])
    assert opauc_exact(ss, 0, 1) == 0.0
    assert pauc_bruteforce([0.0, 0.1], [0.5, 0.9, 0.7], "opauc", 0, 1) == 0.0
