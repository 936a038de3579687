import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigenrestrict.geometry import GeometryPair, ResourceLimitError
from eigenrestrict.lattice import LatticeQuery, count, jump_scan, main_term_cone, slope_to_c, strip_offsets
from eigenrestrict.sums import ConeRegion, cone_sum


def brute(n, d, lam, pred):
    r = int(math.floor(lam))
    total = 0
    for j in itertools.product(range(-r, r + 1), repeat=n):
        jsq = sum(x * x for x in j)
        if jsq <= lam * lam and pred(j, jsq):
            total += 1
    return total


def test_spec_counts():
    assert count(LatticeQuery(2, 1, 10.0)) == 317
    assert count(LatticeQuery(2, 1, 2.0, "cone", a=0.5, b=0.9)) == 4
    assert count(LatticeQuery(2, 1, 1.0, "cone", a=0.5, b=0.9)) == 0


@pytest.mark.parametrize("n,d,lam,a,b", [(2, 1, 9.3, 0.3, 0.7), (3, 1, 5.0, 0.5, 0.9),
                                          (3, 2, 6.0, 0.0, 0.6), (4, 2, 4.0, 0.2, 1.0)])
def test_cone_brute_force(n, d, lam, a, b):
    def pred(j, jsq):
        if jsq == 0:
            return False
        r2 = Fraction(sum(x * x for x in j[:d]), jsq)
        return Fraction(a) ** 2 <= r2 and (r2 < Fraction(b) ** 2)
    assert count(LatticeQuery(n, d, lam, "cone", a=a, b=b)) == brute(n, d, lam, pred)


def test_exact_tie_at_rational_threshold():
    # |j'|/|j| = 3/5 exactly at j = (3, 4): included at a = 0.6, excluded at b = 0.6
    assert count(LatticeQuery(2, 1, 5.0, "cone", a=0.6, b=0.61)) >= 4
    lo = count(LatticeQuery(2, 1, 5.0, "cone", a=0.5, b=0.6))
    hi = count(LatticeQuery(2, 1, 5.0, "cone", a=0.6, b=0.7))
    whole = count(LatticeQuery(2, 1, 5.0, "cone", a=0.5, b=0.7))
    assert lo + hi == whole


@pytest.mark.parametrize("n,d", [(2, 1), (3, 1), (3, 2)])
@pytest.mark.parametrize("lam", [10.0, 17.5])
def test_oracle_identity(n, d, lam):
    pair = GeometryPair.torus(n, d)
    for a, b in [(0.3, 0.7), (0.5, 0.9)]:
        rep = cone_sum(pair, ConeRegion(a, b, lam))
        c = count(LatticeQuery(n, d, lam, "cone", a=a, b=b))
        assert rep.point_count == c
        assert rep.value == pytest.approx((2 * math.pi) ** -(n - d) * c, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(l1=st.floats(1, 20), l2=st.floats(1, 20))
def test_shell_additivity(l1, l2):
    l1, l2 = sorted((l1, l2))
    shell = count(LatticeQuery(3, 1, l2, lam_min=l1))
    assert count(LatticeQuery(3, 1, l2)) - count(LatticeQuery(3, 1, l1)) == shell


def test_symmetry():
    # flipping signs / permuting within blocks maps cones onto themselves, so a brute
    # count restricted to one orthant times the multiplicity matches
    q = LatticeQuery(3, 1, 8.0, "cone", a=0.2, b=0.8)
    total = count(q)

    def pred_sym(j, jsq):
        j2 = (-j[0], j[2], -j[1])
        return jsq > 0 and 0.04 * jsq <= j2[0] ** 2 < 0.64 * jsq
    assert brute(3, 1, 8.0, pred_sym) == total


def test_gauss_circle():
    errs = [abs(count(LatticeQuery(2, 1, lam)) / lam**2 - math.pi) for lam in (100.0, 1000.0)]
    assert errs[1] < errs[0] < 0.01


def test_main_term_cone():
    a, b, lam = 0.3, 0.7, 13.0
    assert main_term_cone(2, 1, a, b, lam) == pytest.approx(2 * (math.asin(b) - math.asin(a)) * lam**2)
    assert main_term_cone(3, 1, a, b, lam) == pytest.approx(2 * 2 * math.pi / 3 * (b - a) * lam**3)
    assert main_term_cone(3, 1, a, a, lam) == 0.0


def test_strip_offsets_exact_on_ray():
    c, c2 = slope_to_c(Fraction(1))
    psq = np.array([1, 4, 9, 1])
    jsq = np.array([2, 8, 18, 5])
    off = strip_offsets(psq, jsq, c, c2)
    assert off[:3].tolist() == [0.0, 0.0, 0.0]
    assert off[3] == pytest.approx(abs(1 - math.sqrt(5) / math.sqrt(2)))


def test_strip_brute_force():
    c = 0.6
    q = LatticeQuery(2, 1, 12.0, "strip", c=c, w=1.5)
    want = brute(2, 1, 12.0, lambda j, jsq: jsq > 0 and abs(abs(j[0]) - c * math.sqrt(jsq)) <= 1.5)
    assert count(q) == want


def test_jump_scan_examples():
    scan = jump_scan(100.0, np.linspace(0, 1, 201), slope=Fraction(1))
    assert scan.flagged
    w1, w2, c1, c2 = scan.flagged[0]
    assert abs(w2 - w1) <= 4 / 100 and abs(c2 - c1) >= 25
    big = jump_scan(100.0, [-0.01, 0.0, 200.0], slope=1)
    assert big.closed.tolist()[0] == 0 and big.half_open.tolist()[0] == 0
    assert big.closed[-1] == count(LatticeQuery(2, 1, 100.0)) - 1
    # the diagonal points sit exactly at w = 0: the conventions differ there
    assert big.closed[1] > 0 and big.half_open[1] == 0


def test_jump_scan_with_c():
    a = jump_scan(50.0, [0.0, 0.5], c=1 / math.sqrt(2))
    b = jump_scan(50.0, [0.0, 0.5], slope=1)
    assert a.closed.tolist() == b.closed.tolist()


def test_validation():
    for kwargs in [dict(n=1, d=1, lam=3.0), dict(n=2, d=2, lam=3.0), dict(n=2, d=1, lam=0.0),
                   dict(n=2, d=1, lam=3.0, shape="cone", a=0.5, b=0.2),
                   dict(n=2, d=1, lam=3.0, shape="strip", c=1.2, w=1.0),
                   dict(n=2, d=1, lam=3.0, shape="blob")]:
        with pytest.raises(ValueError):
            LatticeQuery(**kwargs)
    with pytest.raises(ResourceLimitError):
        count(LatticeQuery(4, 1, 400.0), point_budget=10**6)
    with pytest.raises(ValueError):
        slope_to_c(Fraction(-1))
