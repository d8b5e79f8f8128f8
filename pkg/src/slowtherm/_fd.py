"""Finite-difference stencils on a bounded interval."""
from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple[int, ...], order: int) -> np.ndarray:
    """Weights ``w`` with ``f^(order)(0) ~ sum_k w_k f(k)`` for integer offsets."""
    k = np.asarray(offsets, dtype=float)
    n = len(k)
    if order >= n:
        raise ValueError("stencil too short for requested derivative order")
    vander = k[None, :] ** np.arange(n)[:, None]
    rhs = np.zeros(n)
    rhs[order] = factorial(order)
    return np.linalg.solve(vander, rhs)


def stencil_radius(order: int) -> int:
    """Half-width of a stencil with accuracy >= 4 for the given derivative order."""
    return (order + 4) // 2


def _shifts(t: np.ndarray, h: float, r: int, lo: float, hi: float) -> np.ndarray:
    # integer shift that keeps t + (k + m) h inside [lo, hi] for k in [-r, r]
    eps = 1e-9
    m = np.zeros(t.shape, dtype=int)
    low = t - r * h < lo - eps * h
    m[low] = np.ceil((lo - t[low]) / h + r - eps).astype(int)
    high = t + r * h > hi + eps * h
    m[high] = np.floor((hi - t[high]) / h - r + eps).astype(int)
    return m


def derivative(f, t, h: float, order: int = 1, richardson: bool = False,
               lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Numerical derivative of a vectorized function on ``[lo, hi]``.

    ``f`` maps a 1-D array of abscissae to an array whose first axis runs over
    them. Central stencils are used where they fit; near the ends the stencil
    is shifted inward (one-sided) keeping the same number of points.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < lo - 1e-12) or np.any(t > hi + 1e-12):
        raise ValueError("derivative requested outside the protocol interval")
    if 2 * stencil_radius(order) * h > hi - lo:
        raise ValueError("stencil step too large for the interval")
    est = _stencil_derivative(f, t, h, order, lo, hi)
    if not richardson:
        return est
    fine = _stencil_derivative(f, t, 0.5 * h, order, lo, hi)
    p = 2 * stencil_radius(order) + 1 - order
    return fine + (fine - est) / (2.0**p - 1.0)


def _stencil_derivative(f, t, h, order, lo, hi):
    r = stencil_radius(order)
    base = np.arange(-r, r + 1)
    m = _shifts(t, h, r, lo, hi)
    offsets = base[None, :] + m[:, None]
    pts = np.clip(t[:, None] + offsets * h, lo, hi)
    vals = np.asarray(f(pts.ravel()))
    vals = vals.reshape(pts.shape + vals.shape[1:])
    weights = np.empty(offsets.shape)
    for shift in np.unique(m):
        sel = m == shift
        weights[sel] = fd_weights(tuple(int(k) for k in base + shift), order)
    w = weights.reshape(weights.shape + (1,) * (vals.ndim - 2))
    # weights sum to zero: differencing against the first sample makes
    # constants differentiate to exactly zero
    return (w * (vals - vals[:, :1])).sum(axis=1) / h**order
