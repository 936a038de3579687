"""Numerical checks of the multidimensional Tauberian inequality

    |N(Omega) - int_Omega N*rho| <= C int_{boundary thickening [-1,1]} m

for finite atomic measures N on R^D, together with its two thickening lemmas.

Regions are indicator functions sampled at cell centres of a uniform grid.
The boundary is located by bisection on every grid edge whose two cells
disagree, and the distance from each cell centre to the nearest such boundary
point is found by a k-d tree search.  Signed distance is positive outside Omega
and negative inside; the sign comes straight from the indicator.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .geometry import GeometryPair, ResourceLimitError, collect_spectrum
from .mollifier import Mollifier

_PAIR_CHUNK = 4_000_000
GRID_CELL_BUDGET = 50_000_000


@dataclass
class PointMeasure:
    """Finite positive atomic measure: sum_i weights[i] delta_{locations[i]}."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.locations = np.atleast_2d(np.asarray(self.locations, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.locations.shape[0] != self.weights.size:
            if self.weights.size == 0:
                self.locations = self.locations.reshape(0, self.locations.shape[-1])
            else:
                raise ValueError("one weight per location")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        self._tree = None

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights.tolist())

    @classmethod
    def empty(cls, dim: int = 2) -> "PointMeasure":
        return cls(np.empty((0, dim)), np.empty(0))

    @classmethod
    def from_spectrum(cls, pair: GeometryPair, lambda_max: float,
                      ratio_window: Optional[tuple[float, float]] = None) -> "PointMeasure":
        """Atoms (mu_k, lambda_j) of N, coincident atoms merged.

        ``ratio_window`` keeps only atoms with mu/lambda inside it, a hard
        version of restricting N to a cone around the region of interest.
        """
        spec = collect_spectrum(pair, lambda_max)
        pts = np.column_stack((spec.mu, spec.lam))
        w = spec.weight
        if ratio_window is not None:
            lo, hi = ratio_window
            with np.errstate(invalid="ignore", divide="ignore"):
                r = np.where(spec.lam > 0, spec.mu / np.where(spec.lam > 0, spec.lam, 1), -1.0)
            keep = (r >= lo) & (r <= hi)
            pts, w = pts[keep], w[keep]
        uniq, inv = np.unique(pts, axis=0, return_inverse=True)
        return cls(uniq, np.bincount(inv.ravel(), weights=w, minlength=uniq.shape[0]))

    @classmethod
    def from_csv(cls, path) -> "PointMeasure":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            cols = [c for c in reader.fieldnames if c.startswith("x")]
            cols.sort(key=lambda c: int(c[1:]))
            if "weight" not in reader.fieldnames or not cols:
                raise ValueError("expected columns x1..xD, weight")
            rows = list(reader)
        locs = np.array([[float(r[c]) for c in cols] for r in rows]).reshape(-1, len(cols))
        return cls(locs, np.array([float(r["weight"]) for r in rows]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"x{i + 1}" for i in range(self.dim)] + ["weight"])
            for loc, w in zip(self.locations, self.weights):
                writer.writerow([format(float(v), ".17g") for v in loc] + [format(float(w), ".17g")])

    def translated(self, shift) -> "PointMeasure":
        return PointMeasure(self.locations + np.asarray(shift, dtype=float), self.weights.copy())

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.locations)
        return self._tree


def convolve(N: PointMeasure, rho: Mollifier, x) -> np.ndarray:
    """(N * rho)(x) = sum_i w_i rho(x - y_i), skipping atoms beyond the mollifier tail."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != N.dim or rho.dim != N.dim:
        raise ValueError("dimension mismatch between measure, mollifier and points")
    out = np.zeros(pts.shape[0])
    if N.weights.size == 0:
        return float(out[0]) if single else out
    tail = rho.tail_radius
    step = max(1, _PAIR_CHUNK // max(1, N.weights.size))
    step = max(step, 256)
    for start in range(0, pts.shape[0], step):
        chunk = pts[start:start + step]
        pairs = cKDTree(chunk).sparse_distance_matrix(N.tree, tail, output_type="ndarray")
        if pairs.size == 0:
            continue
        i, j = pairs["i"], pairs["j"]
        vals = N.weights[j] * rho(chunk[i] - N.locations[j])
        out[start:start + chunk.shape[0]] = np.bincount(i, weights=vals, minlength=chunk.shape[0])
    return float(out[0]) if single else out


@dataclass
class OrderFunction:
    """Positive m with m(x) <= C (1 + |x - y|)^nu m(y)."""

    func: Callable[[np.ndarray], np.ndarray]
    C: float
    nu: float
    label: str = ""

    def __call__(self, x) -> np.ndarray:
        return self.func(np.asarray(x, dtype=float))

    @classmethod
    def power(cls, K: float, p: float, center=None) -> "OrderFunction":
        """K (1 + |x - center|)^p; Peetre's inequality gives C = 1, nu = |p|."""
        if not K > 0:
            raise ValueError("K must be positive")

        def m(x):
            z = x if center is None else x - np.asarray(center, dtype=float)
            return K * (1.0 + np.sqrt(np.einsum("...i,...i->...", z, z))) ** p

        return cls(m, 1.0, abs(p), f"{K!r}*(1+|x|)^{p!r}")

    @classmethod
    def constant(cls, K: float = 1.0) -> "OrderFunction":
        return cls.power(K, 0.0)

    def translated(self, shift) -> "OrderFunction":
        shift = np.asarray(shift, dtype=float)
        f = self.func
        return OrderFunction(lambda x: f(x - shift), self.C, self.nu, self.label)

    def certificate(self, lo, hi, samples: int = 10_000, seed: int = 0) -> float:
        """max over random pairs of m(x) / (C (1+|x-y|)^nu m(y)); <= 1 certifies."""
        rng = np.random.default_rng(seed)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        x = rng.uniform(lo, hi, size=(samples, lo.size))
        y = rng.uniform(lo, hi, size=(samples, lo.size))
        dist = np.linalg.norm(x - y, axis=1)
        return float(np.max(self(x) / (self.C * (1.0 + dist) ** self.nu * self(y))))


def calibrate_order_function(N: PointMeasure, rho: Mollifier, samples, power: float) -> OrderFunction:
    """K (1+|x|)^power with K = max over samples of (N*rho)/(1+|x|)^power."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    vals = convolve(N, rho, samples)
    K = float(np.max(vals / (1.0 + np.linalg.norm(samples, axis=1)) ** power))
    return OrderFunction.power(max(K, np.finfo(float).tiny), power)


@dataclass
class Region:
    """Indicator of Omega plus a bounding box outside of which it is 'out'."""

    indicator: Callable[[np.ndarray], np.ndarray]
    lo: np.ndarray
    hi: np.ndarray
    h: float
    label: str = ""

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.all((x >= self.lo) & (x <= self.hi), axis=1)
        out = np.zeros(x.shape[0], dtype=bool)
        if inside.any():
            out[inside] = self.indicator(x[inside])
        return out

    def translated(self, shift) -> "Region":
        shift = np.asarray(shift, dtype=float)
        f = self.indicator
        return Region(lambda x: f(x - shift), self.lo + shift, self.hi + shift, self.h, self.label)

    @classmethod
    def disk(cls, radius: float, center=(0.0, 0.0), h: float = 0.1) -> "Region":
        c = np.asarray(center, dtype=float)
        return cls(lambda x: np.sum((x - c) ** 2, axis=1) <= radius * radius,
                   c - radius, c + radius, h, f"disk(R={radius!r})")

    @classmethod
    def empty(cls, dim: int = 2, h: float = 0.5) -> "Region":
        return cls(lambda x: np.zeros(x.shape[0], dtype=bool), np.zeros(dim), np.ones(dim), h, "empty")

    @classmethod
    def cone(cls, a: float, b: float, lam: float, h: float = 0.5) -> "Region":
        """{(mu, l) : mu, l > 0, l <= lam, mu/l in [a, b)} in the joint-spectrum plane."""
        def ind(x):
            mu, l = x[:, 0], x[:, 1]
            ok = (mu > 0) & (l > 0) & (l <= lam)
            r = np.where(ok, mu / np.where(l > 0, l, 1.0), -1.0)
            return ok & (r >= a) & (r < b)

        return cls(ind, np.zeros(2), np.array([b * lam, lam]), h, f"cone([{a!r},{b!r}), {lam!r})")


class ThickeningGrid:
    """Cell-centre grid around a region with its signed distance field."""

    def __init__(self, region: Region, margin: float):
        h = region.h
        self.region = region
        self.h = h
        cells = np.ceil((region.hi - region.lo + 2 * margin) / h).astype(int) + 1
        if float(np.prod(cells.astype(float))) > GRID_CELL_BUDGET:
            raise ResourceLimitError(f"thickening grid of {cells.tolist()} cells exceeds {GRID_CELL_BUDGET}")
        self.origin = region.lo - margin
        self.shape = tuple(int(c) for c in cells)
        axes = [self.origin[i] + (np.arange(self.shape[i]) + 0.5) * h for i in range(region.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        self.points = np.stack([g.ravel() for g in mesh], axis=1)
        self.inside = region.contains(self.points).reshape(self.shape)
        self.boundary = self._boundary_points()
        if self.boundary.shape[0] == 0:
            self.signed = np.full(self.shape, -np.inf if self.inside.all() else np.inf)
        else:
            dist, _ = cKDTree(self.boundary).query(self.points, distance_upper_bound=margin + 2 * h)
            dist = dist.reshape(self.shape)
            self.signed = np.where(self.inside, -dist, dist)

    def _boundary_points(self, iterations: int = 40) -> np.ndarray:
        """Boundary crossings on every grid edge joining an inside and an outside cell.

        Each crossing is located by bisecting the indicator along the edge, so
        distances are measured to the true boundary rather than to cell centres.
        """
        dim = self.region.dim
        ins_pts, out_pts = [], []
        pts = self.points.reshape(self.shape + (dim,))
        for axis in range(dim):
            lo = [slice(None)] * dim
            hi = [slice(None)] * dim
            lo[axis] = slice(None, -1)
            hi[axis] = slice(1, None)
            a, b = self.inside[tuple(lo)], self.inside[tuple(hi)]
            flip = a != b
            pa, pb = pts[tuple(lo)][flip], pts[tuple(hi)][flip]
            first_in = a[flip]
            ins_pts.append(np.where(first_in[:, None], pa, pb))
            out_pts.append(np.where(first_in[:, None], pb, pa))
        p_in = np.concatenate(ins_pts)
        p_out = np.concatenate(out_pts)
        for _ in range(iterations if p_in.shape[0] else 0):
            mid = 0.5 * (p_in + p_out)
            hit = self.region.contains(mid)
            p_in = np.where(hit[:, None], mid, p_in)
            p_out = np.where(hit[:, None], p_out, mid)
        return 0.5 * (p_in + p_out)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.region.dim

    def band(self, a: float, b: float) -> np.ndarray:
        """Flat mask of cells in the thickening [a, b] of the boundary."""
        s = self.signed.ravel()
        return (s >= a) & (s <= b)

    def integrate(self, m: OrderFunction, a: float, b: float) -> float:
        mask = self.band(a, b)
        if not mask.any():
            return 0.0
        return math.fsum((m(self.points[mask]) * self.cell_volume).tolist())

    def cell_index(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        idx = np.floor((x - self.origin) / self.h).astype(np.int64)
        valid = np.all((idx >= 0) & (idx < np.array(self.shape)), axis=1)
        return idx, valid

    def signed_at(self, x) -> np.ndarray:
        """Signed distance at arbitrary points (nearest cell; +inf off the grid)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx, valid = self.cell_index(x)
        out = np.full(x.shape[0], np.inf)
        if valid.any():
            out[valid] = self.signed[tuple(idx[valid].T)]
        return out


def _check_resolution(h: float, a: float, b: float) -> None:
    if (a >= 0 or b <= 0) and h > (b - a) / 4.0:
        raise ValueError(f"grid spacing h={h} cannot resolve the thickening [{a}, {b}]")


def thickening_integral(omega: Region, m: OrderFunction, a: float, b: float,
                        grid: Optional[ThickeningGrid] = None) -> float:
    """Riemann sum of m over {x : a <= signed distance to the boundary <= b}."""
    if not a < b:
        raise ValueError("need a < b")
    _check_resolution(omega.h, a, b)
    if grid is None:
        grid = ThickeningGrid(omega, max(abs(a), abs(b), 1.0) + 2 * omega.h)
    return grid.integrate(m, a, b)


def _stencil(radius_cells: int, dim: int) -> np.ndarray:
    ax = np.arange(-radius_cells, radius_cells + 1)
    mesh = np.meshgrid(*([ax] * dim), indexing="ij")
    off = np.stack([g.ravel() for g in mesh], axis=1)
    return off[np.sum(off * off, axis=1) <= radius_cells * radius_cells]


def smoothed_mass(N: PointMeasure, rho: Mollifier, grid: ThickeningGrid) -> float:
    """Grid Riemann sum of int_Omega (N * rho)(x) dx.

    Written per atom as sum_y w_y sum_{x in Omega} rho(x - y) h^D.  Atoms deeper
    than the mollifier tail contribute w_y (inside) or 0 (outside): the Riemann
    sum of the whole kernel differs from 1 only at the level of its aliasing
    error.  Atoms near the boundary are summed over a stencil of cells.
    """
    if N.weights.size == 0:
        return 0.0
    tail = rho.tail_radius
    reach = tail + 2 * grid.h
    s = grid.signed_at(N.locations)
    deep_in = s < -reach
    near = np.abs(s) <= reach
    parts = [N.weights[deep_in]]
    if near.any():
        ys = N.locations[near]
        ws = N.weights[near]
        offsets = _stencil(int(math.ceil(reach / grid.h)) + 1, grid.region.dim)
        base, _ = grid.cell_index(ys)
        shape = np.array(grid.shape)
        step = max(1, _PAIR_CHUNK // offsets.shape[0])
        for start in range(0, ys.shape[0], step):
            b = base[start:start + step]
            y = ys[start:start + step]
            idx = b[:, None, :] + offsets[None, :, :]
            ok = np.all((idx >= 0) & (idx < shape), axis=2)
            cell = np.where(ok[..., None], idx, 0)
            ins = grid.inside[tuple(np.moveaxis(cell, 2, 0))] & ok
            centers = grid.origin + (cell + 0.5) * grid.h
            vals = np.where(ins, rho(centers - y[:, None, :]), 0.0)
            parts.append(ws[start:start + step] * vals.sum(axis=1) * grid.cell_volume)
    return math.fsum(np.concatenate(parts).tolist())


@dataclass
class TauberianReport:
    mass: float
    smoothed: float
    gap: float
    bound: float
    ratio: float

    def to_dict(self) -> dict:
        return {"mass": self.mass, "smoothed": self.smoothed, "gap": self.gap,
                "bound": self.bound, "ratio": self.ratio}


def tauberian_gap(N: PointMeasure, rho: Mollifier, omega: Region, m: OrderFunction) -> TauberianReport:
    """gap = |N(Omega) - int_Omega N*rho|, bound = int of m over the unit thickening."""
    if N.dim != omega.dim or rho.dim != omega.dim:
        raise ValueError("dimension mismatch")
    grid = ThickeningGrid(omega, rho.tail_radius + 2.0 + 2 * omega.h)
    mass = math.fsum(N.weights[omega.contains(N.locations)].tolist()) if N.weights.size else 0.0
    smooth = smoothed_mass(N, rho, grid)
    gap = abs(mass - smooth)
    bound = grid.integrate(m, -1.0, 1.0)
    ratio = 0.0 if gap == 0 and bound == 0 else gap / bound
    return TauberianReport(mass, smooth, gap, bound, ratio)


def check_lemma_thickening(omega: Region, m: OrderFunction, a: float, b: float,
                           nu: Optional[float] = None) -> tuple[float, float, float]:
    """(lhs, rhs_base, implied_C) for int_[a,b] m <= C (1+max|a|,|b|)^nu int_[-1,1] m."""
    if not a < b:
        raise ValueError("need a < b")
    _check_resolution(omega.h, a, b)
    nu = m.nu + 1.0 if nu is None else nu
    grid = ThickeningGrid(omega, max(abs(a), abs(b), 1.0) + 2 * omega.h)
    lhs = grid.integrate(m, a, b)
    rhs = grid.integrate(m, -1.0, 1.0)
    implied = lhs / (rhs * (1.0 + max(abs(a), abs(b))) ** nu) if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return lhs, rhs, implied


def check_annulus_mass(N: PointMeasure, rho: Mollifier, omega: Region, m: OrderFunction, r: float,
                       nu: Optional[float] = None) -> tuple[float, float, float]:
    """(mass, bound, implied_C) for N(outer thickening [0, r]) <= C (1+r)^nu int_[-1,1] m."""
    if r < 1:
        raise ValueError("need r >= 1")
    nu = m.nu + 1.0 if nu is None else nu
    grid = ThickeningGrid(omega, max(r, 1.0) + 2 * omega.h)
    if N.weights.size:
        outside = ~omega.contains(N.locations)
        s = grid.signed_at(N.locations)
        sel = outside & (s <= r)
        mass = math.fsum(N.weights[sel].tolist())
    else:
        mass = 0.0
    bound = grid.integrate(m, -1.0, 1.0)
    implied = mass / (bound * (1.0 + r) ** nu) if bound > 0 else (0.0 if mass == 0 else math.inf)
    return mass, bound, implied
