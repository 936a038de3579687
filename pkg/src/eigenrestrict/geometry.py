"""Model (M, H) pairs and their weighted joint spectra.

Three pairs are supported:

* ``torus``: M = (R/2piZ)^n with H = T^d x 0 and exponential eigenbases.  Each
  j in Z^n pairs with exactly one k = j' (the first d coordinates) with weight
  (2pi)^-(n-d).
* ``sphere-latitude``: M = S^2, H the circle {phi = phi0}.  Y_l^m has a single
  nonzero coefficient, against e^{i m theta} on H.
* ``sphere-meridian``: M = S^2, H the great circle through both poles at
  longitudes 0 and pi.  Coefficients come from an FFT of the restriction.

Enumeration is vectorized: :func:`spectrum_batches` yields arrays, and
:func:`enumerate_joint_spectrum` unrolls them into :class:`JointEigenpair` records.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .legendre import assoc_legendre_normalized, legendre_columns, legendre_table

TWO_PI = 2.0 * math.pi

WEIGHT_FLOOR = 1e-18
DEFAULT_POINT_BUDGET = 10**9
CHUNK_POINTS = 1 << 20
# lambda_j <= lambda is closed; ties within this relative band count as inside
TIE_GUARD = 1e-12


class ResourceLimitError(RuntimeError):
    """Raised when an enumeration would exceed its point budget."""


class GeometryKind(str, enum.Enum):
    TORUS = "torus"
    SPHERE_LATITUDE = "sphere-latitude"
    SPHERE_MERIDIAN = "sphere-meridian"


@dataclass(frozen=True)
class GeometryPair:
    kind: GeometryKind
    n: int
    d: int
    vol_H: float
    phi0: Optional[float] = None

    def __post_init__(self):
        if not (self.n >= 2 and 1 <= self.d <= self.n - 1):
            raise ValueError(f"need n >= 2 and 1 <= d <= n-1, got n={self.n}, d={self.d}")
        if not self.vol_H > 0:
            raise ValueError("vol_H must be positive")

    @classmethod
    def torus(cls, n: int, d: int) -> "GeometryPair":
        return cls(GeometryKind.TORUS, int(n), int(d), TWO_PI ** int(d))

    @classmethod
    def sphere_latitude(cls, phi0: float) -> "GeometryPair":
        phi0 = float(phi0)
        if not 0.0 < phi0 < math.pi:
            raise ValueError("phi0 must lie in (0, pi)")
        return cls(GeometryKind.SPHERE_LATITUDE, 2, 1, TWO_PI * math.sin(phi0), phi0)

    @classmethod
    def sphere_meridian(cls) -> "GeometryPair":
        return cls(GeometryKind.SPHERE_MERIDIAN, 2, 1, TWO_PI)

    @classmethod
    def from_spec(cls, spec: str) -> "GeometryPair":
        """Parse ``torus:n=2,d=1``, ``sphere-latitude:phi0=1.0471`` or ``sphere-meridian``."""
        kind, _, rest = spec.strip().partition(":")
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, eq, val = item.partition("=")
            if not eq:
                raise ValueError(f"malformed geometry parameter {item!r}")
            params[key.strip()] = val.strip()
        allowed = {"torus": {"n", "d"}, "sphere-latitude": {"phi0"}, "sphere-meridian": set()}
        if kind not in allowed:
            raise ValueError(f"unknown geometry {kind!r}")
        unknown = set(params) - allowed[kind]
        if unknown:
            raise ValueError(f"unknown keys for {kind}: {sorted(unknown)}")
        try:
            if kind == "torus":
                return cls.torus(int(params.get("n", 2)), int(params.get("d", 1)))
            if kind == "sphere-latitude":
                return cls.sphere_latitude(float(params["phi0"]))
        except KeyError as exc:
            raise ValueError(f"missing parameter {exc} for {kind}") from None
        return cls.sphere_meridian()

    def describe(self) -> str:
        if self.kind is GeometryKind.TORUS:
            return f"torus:n={self.n},d={self.d}"
        if self.kind is GeometryKind.SPHERE_LATITUDE:
            return f"sphere-latitude:phi0={self.phi0!r}"
        return "sphere-meridian"


@dataclass(frozen=True)
class JointEigenpair:
    mu: float
    lam: float
    weight: float
    label_j: tuple
    label_k: tuple


@dataclass
class SpectrumBatch:
    """A block of joint eigenpairs stored column-wise."""

    mu: np.ndarray
    lam: np.ndarray
    weight: np.ndarray
    labels_j: np.ndarray
    labels_k: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.mu.size

    def select(self, mask: np.ndarray) -> "SpectrumBatch":
        return SpectrumBatch(self.mu[mask], self.lam[mask], self.weight[mask],
                             self.labels_j[mask], self.labels_k[mask])


def sphere_eigenvalue(l: int) -> float:
    """Eigenfrequency sqrt(l(l+1)) of degree-l spherical harmonics."""
    if l < 0:
        raise ValueError("l must be >= 0")
    return math.sqrt(l * (l + 1))


def closed_square_bound(lam: float) -> int:
    """Largest integer q with q <= lam^2, counting near-ties as inside."""
    return int(math.floor(lam * lam * (1.0 + TIE_GUARD)))


def _isqrt(a: np.ndarray) -> np.ndarray:
    r = np.floor(np.sqrt(a.astype(float))).astype(np.int64)
    r -= (r * r > a).astype(np.int64)
    r += ((r + 1) * (r + 1) <= a).astype(np.int64)
    return r


def _expand_segments(rows, starts, lengths):
    total = int(lengths.sum())
    if total == 0:
        return np.empty((0, 2), dtype=np.int64)
    offsets = np.repeat(np.cumsum(lengths) - lengths, lengths)
    v = np.arange(total, dtype=np.int64) - offsets + np.repeat(starts, lengths)
    return np.column_stack((np.repeat(rows, lengths), v))


def _disk_points(q: int, hi2: int, lo2: int, chunk: int) -> Iterator[np.ndarray]:
    """Integer (u, v) with lo2 <= q + u^2 + v^2 <= hi2, in row blocks."""
    top = hi2 - q
    if top < 0:
        return
    umax = math.isqrt(top)
    u = np.arange(-umax, umax + 1, dtype=np.int64)
    a = _isqrt(top - u * u)
    inner = lo2 - q - u * u - 1
    b = np.where(inner >= 0, _isqrt(np.maximum(inner, 0)), -1)

    full = b < 0
    rows = [u[full]]
    starts = [-a[full]]
    lengths = [2 * a[full] + 1]
    split = ~full & (b < a)
    rows += [u[split], u[split]]
    starts += [-a[split], b[split] + 1]
    lengths += [a[split] - b[split], a[split] - b[split]]
    rows = np.concatenate(rows)
    starts = np.concatenate(starts)
    lengths = np.concatenate(lengths)
    order = np.lexsort((starts, rows))
    rows, starts, lengths = rows[order], starts[order], lengths[order]

    csum = np.cumsum(lengths)
    begin = 0
    while begin < rows.size:
        base = csum[begin] - lengths[begin]
        end = int(np.searchsorted(csum, base + chunk, side="right"))
        end = max(end, begin + 1)
        yield _expand_segments(rows[begin:end], starts[begin:end], lengths[begin:end])
        begin = end


def _prefixes(k: int, hi2: int):
    """All integer k-vectors with squared norm <= hi2 (as (vector, sqnorm))."""
    if k == 0:
        yield (), 0
        return
    for head, q in _prefixes(k - 1, hi2):
        r = math.isqrt(hi2 - q)
        for x in range(-r, r + 1):
            yield head + (x,), q + x * x


def ball_points(n: int, lam: float, lam_min: float = 0.0,
                chunk: int = CHUNK_POINTS) -> Iterator[np.ndarray]:
    """Yield (k, n) int64 blocks of all j in Z^n with lam_min <= |j| <= lam."""
    hi2 = closed_square_bound(lam)
    lo2 = int(math.ceil(lam_min * lam_min * (1.0 - TIE_GUARD))) if lam_min > 0 else 0
    pending, size = [], 0
    for prefix, q in _prefixes(n - 2, hi2):
        for block in _disk_points(q, hi2, lo2, chunk):
            if prefix:
                head = np.broadcast_to(np.array(prefix, dtype=np.int64), (block.shape[0], n - 2))
                block = np.hstack((head, block))
            pending.append(block)
            size += block.shape[0]
            if size >= chunk:
                yield np.vstack(pending)
                pending, size = [], 0
    if pending:
        yield np.vstack(pending)


def ball_volume(n: int, r: float) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r**n


def _check_budget(n: int, lam: float, budget: int) -> None:
    estimate = ball_volume(n, lam + math.sqrt(n))
    if estimate > budget:
        raise ResourceLimitError(
            f"enumeration of ~{estimate:.3g} lattice points exceeds budget {budget}")


def torus_coefficient(n: int, d: int, j, k) -> complex:
    """Exact <gamma_H e_j, psi_k> on the torus pair."""
    j = tuple(int(x) for x in j)
    k = tuple(int(x) for x in k)
    if len(j) != n or len(k) != d:
        raise ValueError("label lengths must be n and d")
    return complex(TWO_PI ** (-(n - d) / 2)) if j[:d] == k else 0j


def latitude_weight(l: int, m: int, phi0: float) -> float:
    """sin(phi0) * Pbar_l^|m|(cos phi0)^2: the only nonzero |coefficient|^2 of Y_l^m."""
    if l < 0 or abs(m) > l:
        raise ValueError(f"need |m| <= l, got l={l}, m={m}")
    if not 0.0 < phi0 < math.pi:
        raise ValueError("phi0 must lie in (0, pi)")
    p = assoc_legendre_normalized(l, abs(m), math.cos(phi0))
    return math.sin(phi0) * p * p


def meridian_nodes(count: int) -> np.ndarray:
    return TWO_PI * np.arange(count) / count


def meridian_restriction(l: int, m: int, s) -> np.ndarray:
    """Y_l^m along the meridian great circle, arc length s in [0, 2pi).

    The circle runs down longitude 0 for s in [0, pi] and back up longitude pi.
    """
    s = np.asarray(s, dtype=float)
    vals = assoc_legendre_normalized(l, abs(m), np.cos(s))
    back = (s > math.pi) & (m % 2 == 1)
    return np.where(back, -vals, vals) / math.sqrt(TWO_PI)


@functools.lru_cache(maxsize=32)
def _meridian_coefficients(m: int, lmax: int, nodes: int) -> np.ndarray:
    """Array [l, k] of coefficients c_k(Y_l^m) for k = -nodes/2 .. via fft order (read-only)."""
    s = meridian_nodes(nodes)
    cols = legendre_columns(abs(m), np.cos(s), lmax)
    if m % 2:
        cols[:, s > math.pi] *= -1.0
    # c_k = (1/2pi) int P(s) e^{-iks} ds ~ fft / nodes
    out = np.fft.fft(cols, axis=1) / nodes
    out.setflags(write=False)
    return out


def meridian_weight(l: int, m: int, k: int) -> float:
    """|int_0^{2pi} Y_l^m(gamma(s)) e^{-iks} / sqrt(2pi) ds|^2 by trapezoid rule."""
    if l < 0 or abs(m) > l:
        raise ValueError(f"need |m| <= l, got l={l}, m={m}")
    nodes = 2 * max(l, abs(k)) + 64
    coeffs = _meridian_coefficients(abs(m), l, nodes)
    c = coeffs[l, k % nodes]
    return float(c.real**2 + c.imag**2)


def _sphere_l_range(lam_min: float, lam_max: float) -> tuple[int, int]:
    hi2 = lam_max * lam_max * (1.0 + TIE_GUARD)
    l_hi = int(math.floor((math.sqrt(1.0 + 4.0 * hi2) - 1.0) / 2.0)) + 1
    while l_hi * (l_hi + 1) > hi2:
        l_hi -= 1
    l_lo = 0
    if lam_min > 0:
        lo2 = lam_min * lam_min * (1.0 - TIE_GUARD)
        l_lo = max(0, int(math.floor((math.sqrt(1.0 + 4.0 * lo2) - 1.0) / 2.0)) - 1)
        while l_lo * (l_lo + 1) < lo2:
            l_lo += 1
    return l_lo, l_hi


def _torus_batches(pair, lam_max, lam_min, budget):
    _check_budget(pair.n, lam_max, budget)
    n, d = pair.n, pair.d
    w = TWO_PI ** (-(n - d))
    for j in ball_points(n, lam_max, lam_min):
        jsq = np.einsum("ij,ij->i", j, j)
        psq = np.einsum("ij,ij->i", j[:, :d], j[:, :d])
        yield SpectrumBatch(np.sqrt(psq.astype(float)), np.sqrt(jsq.astype(float)),
                            np.full(j.shape[0], w), j, j[:, :d])


def _latitude_batches(pair, lam_max, lam_min):
    l_lo, l_hi = _sphere_l_range(lam_min, lam_max)
    if l_hi < l_lo:
        return
    sin0 = math.sin(pair.phi0)
    table = legendre_table(l_hi, math.cos(pair.phi0))
    for l in range(l_lo, l_hi + 1):
        m = np.arange(-l, l + 1, dtype=np.int64)
        weight = sin0 * table[l, np.abs(m)] ** 2
        keep = weight > WEIGHT_FLOOR
        m = m[keep]
        yield SpectrumBatch(np.abs(m) / sin0, np.full(m.size, sphere_eigenvalue(l)),
                            weight[keep], np.column_stack((np.full(m.size, l), m)),
                            m[:, None])


def _meridian_batches(pair, lam_max, lam_min):
    l_lo, l_hi = _sphere_l_range(lam_min, lam_max)
    if l_hi < l_lo:
        return
    nodes = 2 * l_hi + 64
    ks = np.arange(-l_hi, l_hi + 1, dtype=np.int64)
    for m in range(0, l_hi + 1):
        coeffs = _meridian_coefficients(m, l_hi, nodes)
        weights = np.abs(coeffs[:, ks % nodes]) ** 2
        for l in range(max(m, l_lo), l_hi + 1):
            inside = np.abs(ks) <= l
            w = weights[l][inside]
            k = ks[inside]
            keep = w > WEIGHT_FLOOR
            w, k = w[keep], k[keep]
            for mm in ((m, -m) if m else (m,)):
                # Y_l^{-m} = (-1)^m conj(Y_l^m); on the real restriction |c_k| = |c_{-k}|
                kk = k if mm >= 0 else -k
                yield SpectrumBatch(np.abs(kk).astype(float), np.full(k.size, sphere_eigenvalue(l)),
                                    w.copy(), np.column_stack((np.full(k.size, l), np.full(k.size, mm))),
                                    kk[:, None])


def spectrum_batches(pair: GeometryPair, lambda_max: float, lambda_min: float = 0.0,
                     point_budget: int = DEFAULT_POINT_BUDGET) -> Iterator[SpectrumBatch]:
    """Yield the atoms of N with lambda_min <= lambda <= lambda_max and weight > floor."""
    if not lambda_max > 0:
        raise ValueError("lambda_max must be positive")
    if pair.kind is GeometryKind.TORUS:
        yield from _torus_batches(pair, lambda_max, lambda_min, point_budget)
    elif pair.kind is GeometryKind.SPHERE_LATITUDE:
        yield from _latitude_batches(pair, lambda_max, lambda_min)
    else:
        yield from _meridian_batches(pair, lambda_max, lambda_min)


def enumerate_joint_spectrum(pair: GeometryPair, lambda_max: float, lambda_min: float = 0.0,
                             point_budget: int = DEFAULT_POINT_BUDGET) -> Iterator[JointEigenpair]:
    for batch in spectrum_batches(pair, lambda_max, lambda_min, point_budget):
        for i in range(len(batch)):
            yield JointEigenpair(float(batch.mu[i]), float(batch.lam[i]), float(batch.weight[i]),
                                 tuple(int(x) for x in batch.labels_j[i]),
                                 tuple(int(x) for x in batch.labels_k[i]))


def collect_spectrum(pair: GeometryPair, lambda_max: float, lambda_min: float = 0.0,
                     point_budget: int = DEFAULT_POINT_BUDGET) -> SpectrumBatch:
    """Concatenate every batch into one (fine for desk-scale lambda)."""
    parts = list(spectrum_batches(pair, lambda_max, lambda_min, point_budget))
    if not parts:
        width = pair.n if pair.kind is GeometryKind.TORUS else 2
        return SpectrumBatch(np.empty(0), np.empty(0), np.empty(0),
                             np.empty((0, width), dtype=np.int64),
                             np.empty((0, pair.d if pair.kind is GeometryKind.TORUS else 1), dtype=np.int64))
    return SpectrumBatch(*(np.concatenate([getattr(p, f) for p in parts])
                           for f in ("mu", "lam", "weight", "labels_j", "labels_k")))
