"""Nonnegative, unit-mass smoothing kernels on R^D."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

# rho(x) < TAIL_RATIO * rho(0) beyond tail_radius
TAIL_RATIO = 1e-15


@dataclass(frozen=True)
class Mollifier:
    """Either an isotropic Gaussian of width ``scale`` or the band-limited
    product kernel prod_i sinc^4(eps x_i / 2), whose Fourier transform is
    supported in [-2 eps, 2 eps]^D.  Both are normalized to unit integral.
    """

    kind: str
    dim: int = 2
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "band_limited"):
            raise ValueError(f"unknown mollifier kind {self.kind!r}")
        if self.dim < 1 or not self.scale > 0:
            raise ValueError("need dim >= 1 and positive scale")

    @classmethod
    def gaussian(cls, scale: float = 1.0, dim: int = 2) -> "Mollifier":
        return cls("gaussian", dim, float(scale))

    @classmethod
    def band_limited(cls, eps: float = 1.0, dim: int = 2) -> "Mollifier":
        return cls("band_limited", dim, float(eps))

    @classmethod
    def from_spec(cls, spec: str, dim: int = 2) -> "Mollifier":
        """``gaussian:s=1`` or ``band:eps=0.5``."""
        kind, _, rest = spec.partition(":")
        params = dict(item.split("=", 1) for item in rest.split(",") if item)
        if kind == "gaussian":
            unknown = set(params) - {"s"}
            if unknown:
                raise ValueError(f"unknown mollifier keys {sorted(unknown)}")
            return cls.gaussian(float(params.get("s", 1.0)), dim)
        if kind in ("band", "band_limited"):
            unknown = set(params) - {"eps"}
            if unknown:
                raise ValueError(f"unknown mollifier keys {sorted(unknown)}")
            return cls.band_limited(float(params.get("eps", 1.0)), dim)
        raise ValueError(f"unknown mollifier {spec!r}")

    def describe(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian:s={self.scale!r}"
        return f"band:eps={self.scale!r}"

    def _profile(self, u: np.ndarray) -> np.ndarray:
        s = self.scale
        if self.kind == "gaussian":
            return np.exp(-0.5 * (u / s) ** 2) / (math.sqrt(2 * math.pi) * s)
        return 3.0 * s / (4.0 * math.pi) * np.sinc(s * u / (2.0 * math.pi)) ** 4

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected trailing dimension {self.dim}, got {x.shape}")
        if self.kind == "gaussian":
            r2 = np.einsum("...i,...i->...", x, x)
            return np.exp(-0.5 * r2 / self.scale**2) / (2 * math.pi * self.scale**2) ** (self.dim / 2)
        return np.prod(self._profile(x), axis=-1)

    @property
    def tail_radius(self) -> float:
        if self.kind == "gaussian":
            return self.scale * math.sqrt(2.0 * math.log(1.0 / TAIL_RATIO))
        # sinc^4(u) <= u^-4 in the largest coordinate, which is >= |x|/sqrt(D)
        return math.sqrt(self.dim) * 2.0 * TAIL_RATIO ** -0.25 / self.scale

    @property
    def fourier_support(self) -> float:
        """Half-width of the Fourier support box (inf for the Gaussian)."""
        return math.inf if self.kind == "gaussian" else 2.0 * self.scale

    @cached_property
    def integral(self) -> float:
        """Normalization certificate: int rho by quadrature (= rho-hat(0))."""
        if self.kind == "gaussian":
            one, _ = integrate.quad(lambda u: float(self._profile(np.array(u))), -np.inf, np.inf,
                                    epsabs=0, epsrel=1e-13)
        else:
            # int sinc^4 over periods of pi, then the averaged tail (3/8) / (3 U^3)
            periods = 4000
            f = lambda u: (math.sin(u) / u) ** 4 if u else 1.0
            body = math.fsum(integrate.quad(f, i * math.pi, (i + 1) * math.pi, epsabs=0,
                                            epsrel=1e-13)[0] for i in range(periods))
            tail = 1.0 / (8.0 * (periods * math.pi) ** 3)
            one = 2.0 * (body + tail) * (2.0 / self.scale) * 3.0 * self.scale / (4.0 * math.pi)
        return one**self.dim
