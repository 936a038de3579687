import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigenrestrict.geometry import (
    GeometryKind, GeometryPair, ResourceLimitError, ball_points, closed_square_bound,
    collect_spectrum, enumerate_joint_spectrum, latitude_weight, meridian_restriction,
    meridian_weight, sphere_eigenvalue, torus_coefficient,
)
from eigenrestrict.legendre import assoc_legendre_normalized


def brute_ball(n, lam):
    r = int(math.floor(lam))
    pts = np.array(list(itertools.product(range(-r, r + 1), repeat=n)))
    return pts[np.sum(pts * pts, axis=1) <= lam * lam + 1e-9]


def test_torus_small_spectrum():
    pairs = list(enumerate_joint_spectrum(GeometryPair.torus(2, 1), 1.0))
    assert len(pairs) == 5
    assert all(p.weight == pytest.approx(1 / (2 * math.pi)) for p in pairs)
    origin = [p for p in pairs if p.label_j == (0, 0)]
    assert origin[0].mu == 0 and origin[0].lam == 0


@pytest.mark.parametrize("n,lam", [(2, 2.0), (2, 10.0), (3, 4.5), (3, 10.0), (4, 3.0)])
def test_ball_points_brute_force(n, lam):
    got = np.concatenate(list(ball_points(n, lam)))
    want = brute_ball(n, lam)
    assert got.shape == want.shape
    assert set(map(tuple, got)) == set(map(tuple, want))


def test_shell_enumeration():
    # the shell lam_min <= |j| <= lam is closed at both ends
    outer = brute_ball(2, 12.0)
    strictly_inside = int(np.sum(np.sum(outer * outer, axis=1) < 49))
    shell = sum(b.shape[0] for b in ball_points(2, 12.0, lam_min=7.0))
    assert strictly_inside + shell == outer.shape[0]


def test_closed_bound_includes_exact_radius():
    assert closed_square_bound(5.0) == 25
    assert closed_square_bound(math.sqrt(2)) == 2
    spec = collect_spectrum(GeometryPair.torus(2, 1), 5.0)
    assert np.any(spec.lam == 5.0)


def test_torus_coefficient_selection():
    w = torus_coefficient(3, 1, (2, 1, -1), (2,))
    assert abs(w) ** 2 == pytest.approx((2 * math.pi) ** -2)
    assert torus_coefficient(3, 1, (2, 1, -1), (-2,)) == 0
    with pytest.raises(ValueError):
        torus_coefficient(3, 1, (2, 1), (2,))


def test_torus_weights_rotation_invariant():
    # permuting the normal coordinates and flipping signs leaves the joint measure unchanged
    spec = collect_spectrum(GeometryPair.torus(3, 1), 6.0)
    j = spec.labels_j
    key = lambda jj: sorted(zip(np.abs(jj[:, 0]), np.einsum("ij,ij->i", jj, jj)))
    swapped = j[:, [0, 2, 1]] * np.array([1, -1, 1])
    assert key(j) == key(swapped)


def test_latitude_equator():
    pair = GeometryPair.sphere_latitude(math.pi / 2)
    atoms = list(enumerate_joint_spectrum(pair, math.sqrt(2) + 1e-9))
    # Pbar_1^0(0) = 0, so (l, m) = (1, 0) carries no weight and is dropped
    assert (1, 0) not in {a.label_j for a in atoms}
    weights = sorted(a.weight for a in atoms if a.label_j[0] == 1)
    assert weights == pytest.approx([0.75, 0.75])
    assert [a.weight for a in atoms if a.label_j == (0, 0)] == pytest.approx([0.5])


def test_latitude_weight_trapezoid_oracle():
    # |<Y|_gamma, e^{ik theta}/sqrt(2pi)>|^2 by an independent trapezoid rule on the circle
    phi0, l, m = 1.1, 6, 2
    theta = 2 * math.pi * np.arange(64) / 64
    y = assoc_legendre_normalized(l, m, math.cos(phi0)) * np.exp(1j * m * theta) / math.sqrt(2 * math.pi)
    ds = math.sin(phi0) * 2 * math.pi / 64
    coeff = np.sum(y * np.exp(-1j * m * theta)) / math.sqrt(2 * math.pi) * ds / math.sqrt(math.sin(phi0))
    # psi_k is normalized on a circle of length 2 pi sin phi0
    assert abs(coeff) ** 2 == pytest.approx(latitude_weight(l, m, phi0), rel=1e-12)


def test_latitude_completeness_small():
    x, w = np.polynomial.legendre.leggauss(256)
    phi = 0.5 * math.pi * (x + 1)
    for l, m in [(0, 0), (3, 2), (17, 5)]:
        vals = [latitude_weight(l, m, p) for p in phi]
        assert 0.5 * math.pi * np.dot(w, vals) == pytest.approx(1.0, abs=1e-8)


def test_meridian_restriction_is_continuous():
    # Y_l^m restricted to a great circle is smooth, in particular continuous at s = pi
    for l, m in [(3, 1), (4, 2), (5, 3)]:
        left = meridian_restriction(l, m, math.pi - 1e-9)
        right = meridian_restriction(l, m, math.pi + 1e-9)
        assert left == pytest.approx(right, abs=1e-6)


def test_meridian_weight_values():
    assert meridian_weight(0, 0, 0) == pytest.approx(0.5)
    total = sum(meridian_weight(2, 1, k) for k in range(-2, 3))
    assert total == pytest.approx(15 / 32, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(l=st.integers(0, 25), data=st.data())
def test_meridian_parseval(l, data):
    m = data.draw(st.integers(-l, l))
    total = sum(meridian_weight(l, m, k) for k in range(-l, l + 1))
    x, w = np.polynomial.legendre.leggauss(128)
    s = 0.5 * math.pi * (x + 1)
    quad = 2 * 0.5 * math.pi * np.dot(w, assoc_legendre_normalized(l, abs(m), np.cos(s)) ** 2) / (2 * math.pi)
    assert total == pytest.approx(quad, abs=1e-10)


def test_sphere_eigenvalue():
    assert sphere_eigenvalue(0) == 0.0
    assert sphere_eigenvalue(3) == pytest.approx(math.sqrt(12))


def test_from_spec_and_describe():
    assert GeometryPair.from_spec("torus:n=3,d=2") == GeometryPair.torus(3, 2)
    lat = GeometryPair.from_spec("sphere-latitude:phi0=1.0471")
    assert lat.kind is GeometryKind.SPHERE_LATITUDE
    assert lat.vol_H == pytest.approx(2 * math.pi * math.sin(1.0471))
    assert GeometryPair.from_spec(lat.describe()) == lat
    assert GeometryPair.from_spec("sphere-meridian").vol_H == pytest.approx(2 * math.pi)


@pytest.mark.parametrize("spec", ["torus:n=2,q=1", "cube", "sphere-latitude", "torus:n=2,d=2",
                                  "sphere-latitude:phi0=4", "torus:n"])
def test_bad_specs(spec):
    with pytest.raises(ValueError):
        GeometryPair.from_spec(spec)


def test_validation_and_budget():
    with pytest.raises(ValueError):
        collect_spectrum(GeometryPair.torus(2, 1), 0.0)
    with pytest.raises(ResourceLimitError):
        collect_spectrum(GeometryPair.torus(4, 1), 500.0, point_budget=10**6)
