import math

import numpy as np
import pytest

from eigenrestrict.mollifier import Mollifier


@pytest.mark.parametrize("rho", [Mollifier.gaussian(1.0), Mollifier.gaussian(0.4, dim=3),
                                 Mollifier.band_limited(0.5), Mollifier.band_limited(1.0, dim=1)])
def test_normalization_certificate(rho):
    assert rho.integral == pytest.approx(1.0, abs=1e-10)


def test_nonnegative_and_grid_mass():
    rng = np.random.default_rng(0)
    for rho in (Mollifier.gaussian(1.0), Mollifier.band_limited(0.5)):
        x = rng.uniform(-50, 50, size=(5000, 2))
        assert np.all(rho(x) >= 0)
    # Riemann sum of the Gaussian on a fine grid
    g = np.arange(-12, 12, 0.05) + 0.025
    xx, yy = np.meshgrid(g, g)
    rho = Mollifier.gaussian(1.0)
    assert rho(np.stack((xx, yy), -1)).sum() * 0.05**2 == pytest.approx(1.0, abs=1e-10)


def test_tail_radius():
    rho = Mollifier.gaussian(1.0)
    r = rho.tail_radius
    assert r == pytest.approx(math.sqrt(2 * math.log(1e15)))
    assert rho(np.array([r, 0.0])) <= 1e-15 * rho(np.zeros(2)) * 1.0000001
    band = Mollifier.band_limited(0.5)
    edge = band.tail_radius * np.ones(2) / math.sqrt(2)
    assert band(edge) <= 1e-15 * band(np.zeros(2))


def test_band_limited_fourier_support():
    # the 1D profile's discrete Fourier transform vanishes beyond 2 eps
    rho = Mollifier.band_limited(1.0, dim=1)
    assert rho.fourier_support == 2.0
    h = 0.05
    x = (np.arange(-2**16, 2**16) * h)[:, None]
    spec = np.abs(np.fft.fftshift(np.fft.fft(np.fft.ifftshift(rho(x))))) * h
    xi = np.fft.fftshift(np.fft.fftfreq(x.shape[0], h)) * 2 * math.pi
    assert spec[np.abs(xi - 0) < 1e-9][0] == pytest.approx(1.0, abs=1e-6)
    assert np.max(spec[np.abs(xi) > 2.05]) < 1e-6


def test_from_spec():
    assert Mollifier.from_spec("gaussian:s=1") == Mollifier.gaussian(1.0)
    assert Mollifier.from_spec("band:eps=0.5") == Mollifier.band_limited(0.5)
    assert Mollifier.from_spec(Mollifier.band_limited(0.25).describe()) == Mollifier.band_limited(0.25)
    for bad in ("gaussian:q=1", "box", "band:s=1", "gaussian:s=-1"):
        with pytest.raises(ValueError):
            Mollifier.from_spec(bad)


def test_dimension_check():
    with pytest.raises(ValueError):
        Mollifier.gaussian(1.0)(np.zeros(3))
