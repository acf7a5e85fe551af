import math

import pytest
from hypothesis import assume, given, strategies as st
from scipy import stats as sp

from bsnassure.stats import (DegenerateInputError, betainc, paired_t_ci, t_cdf, t_interval,
                             t_ppf)


def test_reference_interval():
    ci = t_interval(-0.02902, 0.01939, 4, 0.95)
    assert ci.low == pytest.approx(-0.08284, abs=1e-4)
    assert ci.high == pytest.approx(0.02484, abs=1e-4)
    assert ci.includes_zero
    assert ci.t_critical == pytest.approx(2.776, abs=1e-3)


def test_hand_computed_interval():
    ci = paired_t_ci([-1.0, -2.0, 0.0])
    assert ci.low == pytest.approx(-1 - 4.303 / math.sqrt(3), abs=1e-3)
    assert ci.high == pytest.approx(-1 + 4.303 / math.sqrt(3), abs=1e-3)
    assert (round(ci.low, 3), round(ci.high, 3)) == (-3.484, 1.484)
    assert ci.includes_zero


def test_degenerate_inputs():
    with pytest.raises(DegenerateInputError):
        paired_t_ci([0.0] * 5)
    with pytest.raises(DegenerateInputError):
        paired_t_ci([1.0])
    with pytest.raises(ValueError):
        t_interval(0, 1, 3, confidence=1.0)


@given(st.floats(1e-6, 1 - 1e-6), st.integers(1, 100))
def test_t_ppf_against_scipy(p, df):
    assert t_ppf(p, df) == pytest.approx(sp.t.ppf(p, df), rel=1e-8, abs=1e-4)


@given(st.floats(-50, 50), st.floats(0.5, 200))
def test_t_cdf_against_scipy(t, df):
    assert t_cdf(t, df) == pytest.approx(sp.t.cdf(t, df), abs=1e-10)


@given(st.floats(0.1, 30), st.floats(0.1, 30), st.floats(0, 1))
def test_betainc_against_scipy(a, b, x):
    from scipy.special import betainc as ref
    assert betainc(a, b, x) == pytest.approx(ref(a, b, x), abs=1e-10)


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=30),
       st.floats(0.5, 0.98), st.floats(0.001, 0.019))
def test_interval_widens_with_confidence(diffs, conf, step):
    assume(max(diffs) - min(diffs) > 1e-6)
    narrow = paired_t_ci(diffs, conf)
    wide = paired_t_ci(diffs, conf + step)
    assert wide.half_width > narrow.half_width
    assert wide.low < narrow.low and wide.high > narrow.high


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=20))
def test_paired_matches_scipy(diffs):
    assume(max(diffs) - min(diffs) > 1e-3)
    ci = paired_t_ci(diffs)
    lo, hi = sp.t.interval(0.95, len(diffs) - 1, loc=sum(diffs) / len(diffs),
                           scale=sp.sem(diffs))
    assert ci.low == pytest.approx(lo, abs=1e-8) and ci.high == pytest.approx(hi, abs=1e-8)
