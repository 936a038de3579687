"""Fully normalized associated Legendre functions.

The normalization is the one that makes

    Y_l^m(theta, phi) = Pbar_l^m(cos phi) * exp(i m theta) / sqrt(2 pi)

an L^2(S^2)-normalized spherical harmonic, i.e. ``int_{-1}^{1} Pbar_l^m(x)^2 dx = 1``.
The Condon-Shortley phase ``(-1)^m`` is included.

Values come from the standard three-term recurrence in ``l`` started from the
sectoral term ``Pbar_m^m``.  The sectoral term carries a factor ``(1-x^2)^(m/2)``
that underflows double precision long before ``l = 10^4``, so every column keeps
a separate natural-log scale exponent and the recurrence runs on mantissas.
"""
from __future__ import annotations

import math

import numpy as np

_RESCALE = 1e150


def _sectoral_log_norm(m: np.ndarray) -> np.ndarray:
    """log of sqrt((2m+1)/2 * prod_{k<=m} (2k-1)/(2k)), elementwise."""
    mmax = int(m.max()) if m.size else 0
    k = np.arange(1, mmax + 1, dtype=float)
    cum = np.concatenate(([0.0], np.cumsum(np.log((2 * k - 1) / (2 * k)))))
    return 0.5 * np.log((2 * m + 1) / 2.0) + 0.5 * cum[m]


def _column_sweep(m, x, lmax: int, keep_all: bool = False) -> np.ndarray:
    """Run the l-recurrence for many (m, x) columns at once.

    Returns ``Pbar_lmax^m(x)`` per column, or the full ``(lmax+1, ncol)`` table
    when ``keep_all`` (entries with ``l < m`` are zero).
    """
    m, x = np.broadcast_arrays(np.asarray(m, dtype=np.int64), np.asarray(x, dtype=float))
    m = m.ravel()
    x = x.ravel()
    ncol = m.size

    s2 = np.clip(1.0 - x * x, 0.0, None)
    dead = (s2 == 0.0) & (m > 0)
    log_s2 = np.log(np.where(s2 > 0.0, s2, 1.0))
    log_start = _sectoral_log_norm(m) + 0.5 * m * log_s2
    sign = np.where(m % 2 == 0, 1.0, -1.0)

    p_cur = np.zeros(ncol)
    p_prev = np.zeros(ncol)
    scale = np.zeros(ncol)
    mf = m.astype(float)
    table = np.zeros((lmax + 1, ncol)) if keep_all else None

    for l in range(lmax + 1):
        start = m == l
        if start.any():
            p_cur[start] = sign[start]
            p_prev[start] = 0.0
            scale[start] = log_start[start]

        second = m == l - 1
        if second.any():
            new = x[second] * math.sqrt(2 * l + 1) * p_cur[second]
            p_prev[second] = p_cur[second]
            p_cur[second] = new

        rec = m <= l - 2
        if rec.any():
            mm = mf[rec]
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - mm * mm))
            b = np.sqrt(((l - 1.0) ** 2 - mm * mm) / (4.0 * (l - 1.0) ** 2 - 1.0))
            new = a * (x[rec] * p_cur[rec] - b * p_prev[rec])
            p_prev[rec] = p_cur[rec]
            p_cur[rec] = new

        big = np.abs(p_cur) > _RESCALE
        if big.any():
            f = np.abs(p_cur[big])
            p_cur[big] /= f
            p_prev[big] /= f
            scale[big] += np.log(f)

        if keep_all:
            table[l] = _unscale(p_cur, scale, (m <= l) & ~dead)

    if keep_all:
        return table
    return _unscale(p_cur, scale, (m <= lmax) & ~dead)


def _unscale(p: np.ndarray, scale: np.ndarray, live: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    nz = live & (p != 0.0)
    out[nz] = np.sign(p[nz]) * np.exp(np.log(np.abs(p[nz])) + scale[nz])
    return out


def _check_domain(l: int, m: int, x: np.ndarray) -> None:
    if l < 0 or m < 0 or m > l:
        raise ValueError(f"need 0 <= m <= l, got l={l}, m={m}")
    if np.any(np.abs(x) > 1.0) or np.any(~np.isfinite(x)):
        raise ValueError("x must lie in [-1, 1]")


def assoc_legendre_normalized(l: int, m: int, x):
    """Evaluate ``Pbar_l^m(x)`` for integer ``0 <= m <= l`` and ``|x| <= 1``.

    ``x`` may be a scalar or an array; the result has the same shape.
    """
    xa = np.asarray(x, dtype=float)
    _check_domain(int(l), int(m), xa)
    vals = _column_sweep(np.full(xa.size, int(m)), xa.ravel(), int(l))
    if xa.ndim == 0:
        return float(vals[0])
    return vals.reshape(xa.shape)


def legendre_table(lmax: int, x: float) -> np.ndarray:
    """All ``Pbar_l^m(x)`` for ``0 <= m <= l <= lmax`` as a ``[l, m]`` array."""
    if lmax < 0:
        raise ValueError("lmax must be >= 0")
    _check_domain(0, 0, np.asarray(x, dtype=float))
    return _column_sweep(np.arange(lmax + 1), np.full(lmax + 1, float(x)), lmax, keep_all=True)


def legendre_columns(m: int, x, lmax: int) -> np.ndarray:
    """``Pbar_l^m(x_i)`` for ``l = 0..lmax`` as an ``[l, i]`` array (zero for l < m)."""
    xa = np.asarray(x, dtype=float).ravel()
    if m < 0:
        raise ValueError("m must be >= 0")
    _check_domain(max(m, lmax), m, xa)
    return _column_sweep(np.full(xa.size, int(m)), xa, lmax, keep_all=True)
