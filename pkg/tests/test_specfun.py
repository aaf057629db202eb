import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats
from scipy.optimize import brentq

from oracles import betainc_series, monte_carlo_f_sf
from wikiprofile.specfun import betainc, f_sf, ptukey, tukey_sf


@pytest.mark.parametrize("a,b,x", [
    (0.5, 0.5, 0.3), (1, 1, 0.42), (2, 3, 0.1), (2, 3, 0.9), (0.5, 2, 0.8), (5, 0.5, 0.999),
    (50, 40, 0.55), (3.5, 120, 0.02), (2, 0.5, 1e-6), (200, 2.5, 0.97),
])
def test_betainc_against_series(a, b, x):
    ref = betainc_series(a, b, x)
    assert abs(betainc(a, b, x) - ref) <= 1e-10 * abs(ref)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 80), st.floats(0.05, 80), st.floats(1e-4, 1 - 1e-4))
def test_betainc_against_scipy(a, b, x):
    ref = special.betainc(a, b, x)
    got = betainc(a, b, x)
    assert 0.0 <= got <= 1.0
    assert got == pytest.approx(ref, rel=1e-10, abs=1e-300) or abs(got - ref) < 1e-14


def test_betainc_edges():
    assert betainc(2, 3, 0.0) == 0.0 and betainc(2, 3, 1.0) == 1.0
    assert betainc(1, 1, 0.25) == pytest.approx(0.25, rel=1e-14)
    with pytest.raises(ValueError):
        betainc(0, 1, 0.5)
    with pytest.raises(ValueError):
        betainc(1, 1, 1.5)


def test_f_sf_against_monte_carlo():
    assert f_sf(13.5, 1, 4) == pytest.approx(monte_carlo_f_sf(13.5, 1, 4), abs=0.003)
    assert f_sf(13.5, 1, 4) == pytest.approx(stats.f.sf(13.5, 1, 4), rel=1e-10)
    assert f_sf(0.0, 2, 5) == 1.0 and f_sf(math.inf, 2, 5) == 0.0


def test_ptukey_two_groups_large_df():
    # two groups: q = sqrt(2) |z|, so the 95% point is sqrt(2) * 1.959964
    crit = brentq(lambda q: ptukey(q, 2, 1e6) - 0.95, 2.0, 3.5, xtol=1e-10)
    assert crit == pytest.approx(math.sqrt(2) * 1.959963985, abs=1e-3)
    assert abs(crit - 2.7718) <= 1e-3


@pytest.mark.parametrize("q,k,df", [(3.0, 3, 10), (1.5, 2, 5), (4.2, 5, 20), (2.0, 4, 200), (5.5, 8, 3), (0.7, 10, 60)])
def test_ptukey_against_scipy(q, k, df):
    assert ptukey(q, k, df) == pytest.approx(stats.studentized_range.cdf(q, k, df), abs=1e-4)


def test_ptukey_limits():
    assert ptukey(0.0, 3, 10) == 0.0
    assert ptukey(50.0, 3, 10) == pytest.approx(1.0, abs=1e-6)
    assert tukey_sf(0.0, 3, 10) == 1.0
    with pytest.raises(ValueError):
        ptukey(1.0, 1, 10)
    vals = [ptukey(q, 4, 12) for q in np.linspace(0.2, 8, 20)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
