"""Cone sums, ladder sums, limit densities and smoothed densities of N.

N is the measure sum_{j,k} |<gamma_H e_j, psi_k>|^2 delta_(mu_k, lambda_j).  Every
sum here is an exactly rounded total over the enumerated atoms, reported next to
its leading-order prediction in a :class:`SumReport`.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .geometry import (DEFAULT_POINT_BUDGET, GeometryPair, SpectrumBatch, collect_spectrum,
                       spectrum_batches)
from .mollifier import Mollifier
from .summation import exact_sum, grouped_exact_sum

# last histogram edge sits just above 1 so that ratio == 1 lands in the last bin
EDGE_EPS = 1e-9


def sphere_volume(k: int) -> float:
    """Surface measure of the unit k-sphere S^k (vol S^0 = 2)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return 2.0
    if k == 1:
        return 2.0 * math.pi
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def chm_constant(pair: GeometryPair) -> float:
    """(2pi)^-n vol(S^{d-1}) vol(S^{n-d-1}) vol(H)."""
    n, d = pair.n, pair.d
    return (2 * math.pi) ** (-n) * sphere_volume(d - 1) * sphere_volume(n - d - 1) * pair.vol_H


def density_integral(n: int, d: int, a: float, b: float) -> float:
    """int_a^b t^(d-1) (1 - t^2)^((n-d-2)/2) dt for 0 <= a < b <= 1."""
    if not (n >= 2 and 1 <= d <= n - 1):
        raise ValueError(f"invalid dimensions n={n}, d={d}")
    if not (0.0 <= a < b <= 1.0):
        raise ValueError(f"need 0 <= a < b <= 1, got a={a}, b={b}")
    if n - d == 1 and d == 1:
        return math.asin(b) - math.asin(a)
    if n - d == 2:
        return (b**d - a**d) / d
    if d == 1 and n - d == 4:
        return (b - b**3 / 3.0) - (a - a**3 / 3.0)
    # t = sin(theta) removes the (1 - t^2)^(-1/2) endpoint singularity
    p, q = d - 1, n - d - 1
    val, _ = integrate.quad(lambda th: math.sin(th) ** p * math.cos(th) ** q,
                            math.asin(a), math.asin(b), epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def limit_density(pair: GeometryPair, t):
    """Density of the weak-* limit of lambda^-n sum |.|^2 delta_{mu/lambda}.

    Returns +inf at t = 1 when n - d = 1 (integrable singularity).
    """
    n, d = pair.n, pair.d
    t = np.asarray(t, dtype=float)
    inside = (t >= 0.0) & (t <= 1.0)
    tt = np.where(inside, t, 0.5)
    base = np.clip(1.0 - tt * tt, 0.0, None)
    expo = (n - d - 2) / 2.0
    with np.errstate(divide="ignore"):
        val = chm_constant(pair) / n * tt ** (d - 1) * base**expo
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConeRegion:
    a: float
    b: float
    lambda_max: float

    def __post_init__(self):
        if not (0.0 < self.a < self.b < 1.0):
            raise ValueError(f"need 0 < a < b < 1, got [{self.a}, {self.b})")
        if not self.lambda_max > 0:
            raise ValueError("lambda_max must be positive")


@dataclass(frozen=True)
class StripRegion:
    """|mu - c lambda| <= w(lambda_max) with w(lambda) = w0 * lambda^p."""

    c: float
    w0: float
    p: float
    lambda_max: float

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValueError("c must lie in (0, 1)")
        if not self.w0 > 0:
            raise ValueError("w0 must be positive (the width has to grow to infinity)")
        if self.p < 0:
            raise ValueError("p must be >= 0 (w monotone)")
        if not self.lambda_max > 0:
            raise ValueError("lambda_max must be positive")

    def width(self, lam: Optional[float] = None) -> float:
        lam = self.lambda_max if lam is None else lam
        return self.w0 * lam**self.p

    def check_dimension(self, n: int) -> None:
        if self.p > 1.0 - 1.0 / n + 1e-15:
            raise ValueError(f"width exponent p={self.p} exceeds 1 - 1/n = {1 - 1 / n}")


CSV_COLUMNS = ("geometry", "n", "d", "region_type", "a", "b", "c", "w0", "p", "lambda_max",
               "value", "main_term", "abs_deviation", "point_count")


def format_number(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


@dataclass
class SumReport:
    geometry: str
    n: int
    d: int
    region_type: str
    lambda_max: float
    value: float
    main_term: float
    point_count: int
    a: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None
    w0: Optional[float] = None
    p: Optional[float] = None
    abs_deviation: Optional[float] = None

    def __post_init__(self):
        self.abs_deviation = abs(self.value - self.main_term)

    @property
    def ratio(self) -> float:
        return self.value / self.main_term if self.main_term else math.nan

    @property
    def relative_deviation(self) -> float:
        return self.abs_deviation / abs(self.main_term) if self.main_term else math.nan

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in CSV_COLUMNS}

    def csv_row(self) -> list[str]:
        d = self.to_dict()
        return [format_number(d[k]) for k in CSV_COLUMNS]

    @classmethod
    def from_csv_row(cls, row: dict) -> "SumReport":
        def num(key, typ=float):
            v = row.get(key, "")
            return None if v == "" else typ(v)

        rep = cls(row["geometry"], int(row["n"]), int(row["d"]), row["region_type"],
                  num("lambda_max"), num("value"), num("main_term"), num("point_count", int),
                  num("a"), num("b"), num("c"), num("w0"), num("p"))
        rep.abs_deviation = num("abs_deviation")
        return rep


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow(r.csv_row())
    return buf.getvalue()


def _ratio(batch: SpectrumBatch) -> np.ndarray:
    # the constant mode (lambda = 0) is assigned ratio 0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(batch.lam > 0, batch.mu / np.where(batch.lam > 0, batch.lam, 1.0), 0.0)


def cone_sum(pair: GeometryPair, region: ConeRegion,
             point_budget: int = DEFAULT_POINT_BUDGET) -> SumReport:
    """Sum of weights with lambda_j <= lambda_max and mu_k / lambda_j in [a, b)."""
    chunks, count = [], 0
    for batch in spectrum_batches(pair, region.lambda_max, point_budget=point_budget):
        r = _ratio(batch)
        sel = (batch.lam > 0) & (r >= region.a) & (r < region.b)
        chunks.append(batch.weight[sel])
        count += int(sel.sum())
    main = (chm_constant(pair) / pair.n * density_integral(pair.n, pair.d, region.a, region.b)
            * region.lambda_max**pair.n)
    return SumReport(pair.describe(), pair.n, pair.d, "cone", region.lambda_max,
                     exact_sum(chunks), main, count, a=region.a, b=region.b)


def ladder_main_term(pair: GeometryPair, c: float, w: float, lam: float) -> float:
    n, d = pair.n, pair.d
    return (2.0 * chm_constant(pair) / (n - 1) * w * c ** (d - 1)
            * (1.0 - c * c) ** ((n - d - 2) / 2.0) * lam ** (n - 1))


def ladder_sum(pair: GeometryPair, strip: StripRegion,
               point_budget: int = DEFAULT_POINT_BUDGET) -> SumReport:
    """Sum of weights with lambda_j <= lambda_max and |mu_k - c lambda_j| <= w(lambda_max)."""
    strip.check_dimension(pair.n)
    w = strip.width()
    if w < 1.0:
        raise ValueError(f"width w(lambda_max) = {w} is below 1")
    chunks, count = [], 0
    for batch in spectrum_batches(pair, strip.lambda_max, point_budget=point_budget):
        sel = np.abs(batch.mu - strip.c * batch.lam) <= w
        chunks.append(batch.weight[sel])
        count += int(sel.sum())
    return SumReport(pair.describe(), pair.n, pair.d, "strip", strip.lambda_max, exact_sum(chunks),
                     ladder_main_term(pair, strip.c, w, strip.lambda_max), count,
                     c=strip.c, w0=strip.w0, p=strip.p)


def local_weyl_sum(pair: GeometryPair, lambda_max: float,
                   point_budget: int = DEFAULT_POINT_BUDGET) -> SumReport:
    """Total weight sum_{lambda_j <= lambda} int_H |e_j|^2 against the pointwise Weyl law."""
    chunks, count = [], 0
    for batch in spectrum_batches(pair, lambda_max, point_budget=point_budget):
        chunks.append(batch.weight)
        count += len(batch)
    n = pair.n
    main = (2 * math.pi) ** (-n) * pair.vol_H * sphere_volume(n - 1) / n * lambda_max**n
    return SumReport(pair.describe(), n, pair.d, "weyl", lambda_max, exact_sum(chunks), main, count)


@dataclass
class EmpiricalMeasure:
    """Histogram of lambda^-n sum |.|^2 delta_{mu/lambda} on [0, 1 + EDGE_EPS]."""

    edges: np.ndarray
    masses: np.ndarray
    overflow: float
    lambda_max: float
    point_count: int

    @property
    def total_mass(self) -> float:
        return math.fsum(self.masses.tolist() + [self.overflow])

    def limit_masses(self, pair: GeometryPair) -> np.ndarray:
        """Mass of the limit measure in each bin."""
        lo = np.clip(self.edges[:-1], 0.0, 1.0)
        hi = np.clip(self.edges[1:], 0.0, 1.0)
        scale = chm_constant(pair) / pair.n
        return np.array([scale * density_integral(pair.n, pair.d, a, b) if b > a else 0.0
                         for a, b in zip(lo, hi)])

    def l1_distance(self, pair: GeometryPair) -> float:
        return float(np.abs(self.masses - self.limit_masses(pair)).sum() + abs(self.overflow))


def empirical_measure(pair: GeometryPair, lambda_max: float, bins: int = 50,
                      point_budget: int = DEFAULT_POINT_BUDGET) -> EmpiricalMeasure:
    if bins < 10:
        raise ValueError("need at least 10 bins")
    edges = np.linspace(0.0, 1.0, bins + 1)
    edges[-1] = 1.0 + EDGE_EPS
    keys, vals, count = [], [], 0
    for batch in spectrum_batches(pair, lambda_max, point_budget=point_budget):
        idx = np.searchsorted(edges, _ratio(batch), side="right") - 1
        idx = np.where(idx >= bins, bins, idx)
        keys.append(idx)
        vals.append(batch.weight)
        count += len(batch)
    keys = np.concatenate(keys) if keys else np.empty(0, dtype=np.int64)
    vals = np.concatenate(vals) if vals else np.empty(0)
    sums = grouped_exact_sum(keys, vals, bins + 1)
    scale = lambda_max ** (-pair.n)
    return EmpiricalMeasure(edges, sums[:bins] * scale, sums[bins] * scale, lambda_max, count)


def smoothed_main_term(pair: GeometryPair, mollifier: Mollifier, mu: float, lam: float) -> float:
    """C_{H,M} rho-hat(0) mu^(d-1) lambda^(n-d-1) (1 - mu^2/lambda^2)^((n-d-2)/2)."""
    _check_ray_point(mu, lam)
    n, d = pair.n, pair.d
    return (chm_constant(pair) * mollifier.integral * mu ** (d - 1) * lam ** (n - d - 1)
            * (1.0 - (mu / lam) ** 2) ** ((n - d - 2) / 2.0))


def _check_ray_point(mu: float, lam: float) -> None:
    if not lam > 0 or not 0.0 < mu / lam < 1.0:
        raise ValueError(f"need lambda > 0 and mu/lambda in (0, 1), got ({mu}, {lam})")


def smoothed_from_atoms(mu_k, lam_j, weights, mollifier: Mollifier, mu: float, lam: float) -> float:
    """sum_i w_i rho(mu - mu_i, lam - lam_i) over the given atoms."""
    mu_k = np.asarray(mu_k, dtype=float)
    if mu_k.size == 0:
        return 0.0
    diff = np.column_stack((mu - mu_k, lam - np.asarray(lam_j, dtype=float)))
    return math.fsum((np.asarray(weights, dtype=float) * mollifier(diff)).tolist())


def smoothed_density(pair: GeometryPair, mollifier: Mollifier, mu: float, lam: float,
                     point_budget: int = DEFAULT_POINT_BUDGET) -> float:
    """(N * rho)(mu, lam), enumerating only atoms within the mollifier tail."""
    return _smoothed(pair, mollifier, mu, lam, point_budget)[0]


def _smoothed(pair, mollifier, mu, lam, point_budget):
    _check_ray_point(mu, lam)
    if mollifier.dim != 2:
        raise ValueError("the joint spectrum lives in R^2")
    tail = mollifier.tail_radius
    spec = collect_spectrum(pair, lam + tail, max(lam - tail, 0.0), point_budget)
    near = np.abs(spec.mu - mu) <= tail
    value = smoothed_from_atoms(spec.mu[near], spec.lam[near], spec.weight[near], mollifier, mu, lam)
    return value, int(near.sum())


def smoothed_report(pair: GeometryPair, mollifier: Mollifier, mu: float, lam: float,
                    point_budget: int = DEFAULT_POINT_BUDGET) -> SumReport:
    """Smoothed density against its main term, as a SumReport (a = mu/lambda)."""
    value, count = _smoothed(pair, mollifier, mu, lam, point_budget)
    return SumReport(pair.describe(), pair.n, pair.d, "ray", lam, value,
                     smoothed_main_term(pair, mollifier, mu, lam), count, a=mu / lam)
