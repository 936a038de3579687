"""Exact lattice-point counts in balls, cones and strips of Z^n.

Counting walks the first coordinate and fills the remaining n-1 coordinates as a
dense block, so it shares no code with the spectral enumeration it is meant to
check.  Predicates work on integer squared norms.  Cone ratios are compared in
floating point; points within a relative 1e-12 of a threshold are re-tested in
exact rational arithmetic against the decimal value of that threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .geometry import DEFAULT_POINT_BUDGET, ResourceLimitError, ball_volume, closed_square_bound
from .sums import density_integral, sphere_volume

GUARD = 1e-12


@dataclass(frozen=True)
class LatticeQuery:
    """j in Z^n with |j| <= lam (and |j| > lam_min when given).

    shape is ``ball``, ``cone`` (|j'|/|j| in [a, b)) or ``strip``
    (| |j'| - c|j| | <= w).  j = 0 is excluded from cones and strips.
    """

    n: int
    d: int
    lam: float
    shape: str = "ball"
    a: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None
    w: Optional[float] = None
    lam_min: Optional[float] = None
    c_squared: Optional[Fraction] = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.n >= 2 and 1 <= self.d <= self.n - 1):
            raise ValueError(f"need n >= 2 and 1 <= d <= n-1, got n={self.n}, d={self.d}")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.shape == "cone":
            if self.a is None or self.b is None or not 0.0 <= self.a <= self.b <= 1.0:
                raise ValueError("cone needs 0 <= a <= b <= 1")
        elif self.shape == "strip":
            if self.c is None or self.w is None or not 0.0 < self.c < 1.0:
                raise ValueError("strip needs c in (0, 1) and a width w")
        elif self.shape != "ball":
            raise ValueError(f"unknown shape {self.shape!r}")


def _blocks(n: int, lam: float, lam_min: Optional[float], budget: int):
    """Yield (jsq, j) blocks; j is an (m, n) int64 array."""
    hi2 = closed_square_bound(lam)
    if ball_volume(n, lam + math.sqrt(n)) > budget:
        raise ResourceLimitError(f"lattice count at n={n}, lam={lam} exceeds budget {budget}")
    lo2 = closed_square_bound(lam_min) if lam_min is not None else -1
    r = math.isqrt(hi2)
    for x1 in range(-r, r + 1):
        rest = hi2 - x1 * x1
        rr = math.isqrt(rest)
        axis = np.arange(-rr, rr + 1, dtype=np.int64)
        grids = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
        tail = np.stack([g.ravel() for g in grids], axis=1)
        tsq = np.einsum("ij,ij->i", tail, tail)
        keep = tsq <= rest
        if lo2 >= 0:
            keep &= tsq + x1 * x1 > lo2
        tail = tail[keep]
        j = np.hstack((np.full((tail.shape[0], 1), x1, dtype=np.int64), tail))
        yield tsq[keep] + x1 * x1, j


def _exact_fraction(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def _at_least(psq: np.ndarray, jsq: np.ndarray, t: float) -> np.ndarray:
    """psq / jsq >= t^2 with exact re-test of near-ties."""
    t2 = t * t
    r2 = psq / jsq
    out = r2 >= t2
    near = np.abs(r2 - t2) <= GUARD * max(t2, 1e-300)
    if near.any():
        f2 = _exact_fraction(t) ** 2
        num, den = f2.numerator, f2.denominator
        idx = np.flatnonzero(near)
        out[idx] = [int(p) * den >= num * int(q) for p, q in zip(psq[idx], jsq[idx])]
    return out


def cone_mask(psq: np.ndarray, jsq: np.ndarray, a: float, b: float) -> np.ndarray:
    nz = jsq > 0
    safe = np.where(nz, jsq, 1)
    return nz & _at_least(psq, safe, a) & ~_at_least(psq, safe, b)


def strip_offsets(psq: np.ndarray, jsq: np.ndarray, c: float,
                  c_squared: Optional[Fraction] = None) -> np.ndarray:
    """| |j'| - c|j| | for each point, exact zero on the ray when c^2 is rational."""
    root_p = np.sqrt(psq.astype(float))
    root_j = np.sqrt(jsq.astype(float))
    denom = root_p + c * root_j
    if c_squared is not None and c_squared.denominator < 2**20 and c_squared.numerator < 2**20:
        num = (c_squared.denominator * psq - c_squared.numerator * jsq).astype(float)
        num /= c_squared.denominator
    else:
        num = psq - c * c * jsq.astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.abs(np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0))


def count(query: LatticeQuery, point_budget: int = DEFAULT_POINT_BUDGET) -> int:
    """Exact number of lattice points satisfying the query."""
    total = 0
    d = query.d
    for jsq, j in _blocks(query.n, query.lam, query.lam_min, point_budget):
        if query.shape == "ball":
            total += int(jsq.size)
            continue
        psq = np.einsum("ij,ij->i", j[:, :d], j[:, :d])
        if query.shape == "cone":
            total += int(cone_mask(psq, jsq, query.a, query.b).sum())
        else:
            off = strip_offsets(psq, jsq, query.c, query.c_squared)
            total += int(((jsq > 0) & (off <= query.w)).sum())
    return total


def main_term_cone(n: int, d: int, a: float, b: float, lam: float) -> float:
    """Lebesgue measure of {xi in R^n : |xi| <= lam, |xi'|/|xi| in [a, b]}."""
    if a == b:
        return 0.0
    return (sphere_volume(d - 1) * sphere_volume(n - d - 1) / n
            * density_integral(n, d, a, b) * lam**n)


def slope_to_c(slope) -> tuple[float, Fraction]:
    """c with c / sqrt(1 - c^2) = slope, plus the exact rational c^2."""
    s = Fraction(slope)
    if s <= 0:
        raise ValueError("slope must be positive")
    c2 = s * s / (1 + s * s)
    return math.sqrt(c2.numerator / c2.denominator), c2


@dataclass
class JumpScan:
    lam: float
    c: float
    w: np.ndarray
    closed: np.ndarray
    half_open: np.ndarray
    main_term: np.ndarray
    flagged: list

    def rows(self) -> list[dict]:
        return [{"w": float(w), "count": int(cc), "count_half_open": int(co),
                 "main_term": float(mt)}
                for w, cc, co, mt in zip(self.w, self.closed, self.half_open, self.main_term)]


def jump_scan(lam: float, w_grid: Sequence[float], c: Optional[float] = None, slope=None,
              point_budget: int = DEFAULT_POINT_BUDGET) -> JumpScan:
    """Strip counts on Z^2 (d = 1) over a grid of widths, flagging sudden jumps.

    A consecutive pair is flagged when the closed count changes by at least
    lam/4 while w changes by at most 4/lam.
    """
    c2 = None
    if slope is not None:
        c, c2 = slope_to_c(slope)
    elif c is None:
        raise ValueError("give c or slope")
    else:
        guess = Fraction(c / math.sqrt(1 - c * c)).limit_denominator(1000)
        c_try, c2_try = slope_to_c(guess)
        if abs(c_try - c) <= 1e-12:
            c2 = c2_try
    offs = []
    for jsq, j in _blocks(2, lam, None, point_budget):
        nz = jsq > 0
        psq = j[:, 0] * j[:, 0]
        offs.append(strip_offsets(psq[nz], jsq[nz], c, c2))
    offs = np.sort(np.concatenate(offs))
    w = np.asarray(w_grid, dtype=float)
    closed = np.where(w >= 0, np.searchsorted(offs, w, side="right"), 0)
    half_open = np.where(w >= 0, np.searchsorted(offs, w, side="left"), 0)
    # ladder main term (4/pi) w lam / sqrt(1 - c^2) in lattice-count units
    main = 8.0 * np.maximum(w, 0.0) * lam / math.sqrt(1.0 - c * c)
    flagged = []
    for i in range(len(w) - 1):
        if abs(w[i + 1] - w[i]) <= 4.0 / lam and abs(int(closed[i + 1]) - int(closed[i])) >= lam / 4:
            flagged.append((float(w[i]), float(w[i + 1]), int(closed[i]), int(closed[i + 1])))
    return JumpScan(lam, c, w, closed, half_open, main, flagged)
