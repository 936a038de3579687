import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigenrestrict.legendre import assoc_legendre_normalized, legendre_columns, legendre_table


def _unnormalized(l, m, x):
    # closed forms with the Condon-Shortley phase, s = sqrt(1 - x^2)
    s = np.sqrt(1 - x * x)
    table = {
        (0, 0): 1.0 + 0 * x,
        (1, 0): x,
        (1, 1): -s,
        (2, 0): (3 * x**2 - 1) / 2,
        (2, 1): -3 * x * s,
        (2, 2): 3 * s**2,
        (3, 0): (5 * x**3 - 3 * x) / 2,
        (3, 1): -1.5 * (5 * x**2 - 1) * s,
        (3, 2): 15 * x * s**2,
        (3, 3): -15 * s**3,
        (4, 0): (35 * x**4 - 30 * x**2 + 3) / 8,
        (4, 1): -2.5 * (7 * x**3 - 3 * x) * s,
        (4, 2): 7.5 * (7 * x**2 - 1) * s**2,
        (4, 3): -105 * x * s**3,
        (4, 4): 105 * s**4,
    }
    return table[(l, m)]


def closed_form(l, m, x):
    norm = math.sqrt((2 * l + 1) / 2 * math.factorial(l - m) / math.factorial(l + m))
    return norm * _unnormalized(l, m, x)


SAMPLES = np.linspace(-1.0, 1.0, 1000)


@pytest.mark.parametrize("l,m", [(l, m) for l in range(5) for m in range(l + 1)])
def test_closed_form_table(l, m):
    got = assoc_legendre_normalized(l, m, SAMPLES)
    assert np.max(np.abs(got - closed_form(l, m, SAMPLES))) <= 1e-12


def test_orthonormal_gauss_legendre():
    x, w = np.polynomial.legendre.leggauss(128)
    for m in (0, 1, 7, 30, 50):
        cols = legendre_columns(m, x, 50)[m:]
        gram = (cols * w) @ cols.T
        assert np.max(np.abs(gram - np.eye(gram.shape[0]))) <= 1e-10


def test_scalar_and_array_shapes():
    assert isinstance(assoc_legendre_normalized(3, 1, 0.2), float)
    assert assoc_legendre_normalized(3, 1, np.zeros((2, 3))).shape == (2, 3)


def test_table_matches_pointwise():
    t = legendre_table(12, 0.37)
    for l in range(13):
        for m in range(l + 1):
            assert t[l, m] == pytest.approx(assoc_legendre_normalized(l, m, 0.37), abs=1e-14)
    assert np.all(np.triu(t, 1) == 0)


def test_poles():
    assert assoc_legendre_normalized(5, 0, 1.0) == pytest.approx(math.sqrt(11 / 2))
    assert assoc_legendre_normalized(5, 0, -1.0) == pytest.approx(-math.sqrt(11 / 2))
    assert assoc_legendre_normalized(5, 3, 1.0) == 0.0


def test_no_underflow_high_degree():
    # sectoral start ~ (1-x^2)^(m/2) is far below double range at m = 5000 near the pole,
    # yet the equator value of Pbar_l^m stays O(1) and the sum rule holds
    l = 10_000
    x = np.array([0.0, 0.3, 0.9])
    vals = np.array([assoc_legendre_normalized(l, m, x) for m in (0, 2500, 5000, 9000)])
    assert np.all(np.isfinite(vals))
    assert np.max(np.abs(vals)) < 10.0
    # addition theorem: sum_m |Y_l^m(x)|^2 = (2l+1)/(4 pi)
    row = legendre_table(400, 0.6)[400]
    total = row[0] ** 2 + 2 * np.sum(row[1:] ** 2)
    assert total / (2 * math.pi) == pytest.approx((2 * 400 + 1) / (4 * math.pi), rel=1e-11)


@settings(max_examples=60, deadline=None)
@given(l=st.integers(0, 60), x=st.floats(-1, 1))
def test_addition_theorem(l, x):
    row = legendre_table(l, x)[l]
    total = row[0] ** 2 + 2 * np.sum(row[1:] ** 2)
    assert total == pytest.approx((2 * l + 1) / 2, rel=1e-10)


@pytest.mark.parametrize("l,m,x", [(-1, 0, 0.0), (2, 3, 0.0), (2, 1, 1.5), (2, -1, 0.0)])
def test_domain_errors(l, m, x):
    with pytest.raises(ValueError):
        assoc_legendre_normalized(l, m, x)
