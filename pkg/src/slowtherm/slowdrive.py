"""Perturbation engine for slowly driven master equations.

In rescaled time ``t' = t/tau`` the solution of ``d rho/dt = L_t[rho]`` is
expanded as ``rho = rho_0 + rho_1/tau + rho_2/tau**2 + ...`` with

    L[rho_0] = 0,  tr rho_0 = 1,
    rho_{j+1} = (L P)^{-1} d rho_j/dt',   tr rho_{j+1} = 0,

where ``P`` projects onto traceless operators. Both the steady state and the
projected inverse come from one bordered system

    [[L, vec(I)], [tr, 0]] @ [x, mu] = [y, c].
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _fd
from .exceptions import DegenerateKernelError, NumericalError, TracelessKernelError
from .superop import apply_super, dagger, trace_row, unvectorize, vectorize

#: step in rescaled time for differentiating rho_j, j >= 1
STENCIL_STEP = 1e-3
#: second-smallest |eigenvalue| must exceed this times max|L|
KERNEL_GAP = 1e-8
DEFAULT_ORDER = 2
RICHARDSON = True


class PositivityWarning(UserWarning):
    """A truncated slow solution has a negative eigenvalue below -1e-6."""


def _dim(sup) -> int:
    n2 = sup.shape[-1]
    d = int(round(np.sqrt(n2)))
    if d * d != n2 or sup.shape[-2] != n2:
        raise ValueError(f"not a superoperator shape: {sup.shape}")
    return d


def _hermitize(x):
    return 0.5 * (x + dagger(x))


def kernel_gap(sup) -> np.ndarray:
    """Second-smallest eigenvalue magnitude relative to max|L| (batched)."""
    sup = np.asarray(sup, dtype=complex)
    mags = np.sort(np.abs(np.linalg.eigvals(sup)), axis=-1)
    scale = np.abs(sup).max(axis=(-1, -2))
    return mags[..., 1] / np.where(scale > 0, scale, 1.0)


def _check_kernel(sup, traced: bool = False) -> None:
    sup = np.asarray(sup, dtype=complex)
    if traced:
        vals, vecs = np.linalg.eig(sup)
    else:
        vals = np.linalg.eigvals(sup)
    mags = np.abs(vals)
    order = np.argsort(mags, axis=-1)
    second = np.take_along_axis(mags, order[..., 1:2], axis=-1)[..., 0]
    scale = np.abs(sup).max(axis=(-1, -2))
    gap = second / np.where(scale > 0, scale, 1.0)
    if np.any(gap <= KERNEL_GAP):
        raise DegenerateKernelError(
            f"degenerate kernel: relative spectral gap {np.min(gap):.3g} <= {KERNEL_GAP}"
        )
    if traced:
        d = _dim(sup)
        null = np.take_along_axis(vecs, order[..., None, 0:1], axis=-1)[..., 0]
        tr = np.abs(null @ trace_row(d))
        if np.any(tr < 1e-10 * np.linalg.norm(null, axis=-1)):
            raise TracelessKernelError("traceless kernel: null vector is not a state")


def _diagnose_singular(sup) -> None:
    flat = sup.reshape((-1,) + sup.shape[-2:])
    d = _dim(sup)
    for mat in flat:
        _, s, vh = np.linalg.svd(mat)
        null = vh[-1].conj()
        if s[-1] <= KERNEL_GAP * max(np.abs(mat).max(), 1e-300):
            if abs(trace_row(d) @ null) < 1e-10 * np.linalg.norm(null):
                raise TracelessKernelError("traceless kernel: null vector is not a state")
    raise DegenerateKernelError("degenerate kernel: bordered system is singular")


def bordered_matrix(sup) -> np.ndarray:
    """``[[L, vec(I)], [tr, 0]]`` for a (batched) superoperator."""
    sup = np.asarray(sup, dtype=complex)
    d = _dim(sup)
    n2 = d * d
    out = np.zeros(sup.shape[:-2] + (n2 + 1, n2 + 1), dtype=complex)
    out[..., :n2, :n2] = sup
    out[..., :n2, n2] = trace_row(d)
    out[..., n2, :n2] = trace_row(d)
    return out


def _bordered_solve(sup, rhs_vec, rhs_last):
    border = bordered_matrix(sup)
    n2 = sup.shape[-1]
    rhs = np.zeros(border.shape[:-1], dtype=complex)
    rhs[..., :n2] = rhs_vec
    rhs[..., n2] = rhs_last
    try:
        sol = np.linalg.solve(border, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        _diagnose_singular(sup)
        raise
    if not np.all(np.isfinite(sol)):
        _diagnose_singular(sup)
    return sol[..., :n2]


def steady_state(sup, check: bool = True) -> np.ndarray:
    """Unit-trace null vector of a relaxing Liouvillian, as an operator.

    Accepts a single ``(d*d, d*d)`` superoperator or a stack of them.

    Raises
    ------
    DegenerateKernelError
        If the zero eigenvalue is not simple (relative gap below ``KERNEL_GAP``).
    TracelessKernelError
        If the kernel vector has vanishing trace.
    """
    sup = np.asarray(sup, dtype=complex)
    _dim(sup)
    if check:
        _check_kernel(sup, traced=True)
    x = _bordered_solve(sup, 0.0, 1.0)
    rho = _hermitize(unvectorize(x))
    tr = np.trace(rho, axis1=-2, axis2=-1).real
    rho = rho / tr[..., None, None]
    res = np.abs(np.einsum("...ij,...j->...i", sup, vectorize(rho))).max()
    if res > 1e-8 * max(np.abs(sup).max(), 1e-300):
        _diagnose_singular(sup)
    return rho


def traceless_projector(d: int) -> np.ndarray:
    """Matrix of X -> X - tr(X) I/d."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    t = trace_row(d)
    return np.eye(d * d, dtype=complex) - np.outer(t, t) / d


def projected_inverse_apply(sup, y, check: bool = True) -> np.ndarray:
    """Solve ``L[x] = y`` with ``tr x = 0`` for traceless ``y`` (batched).

    Raises
    ------
    ValueError
        If ``y`` is not traceless within 1e-10 (relative to its size).
    DegenerateKernelError
        If the bordered system is singular.
    """
    sup = np.asarray(sup, dtype=complex)
    y = np.asarray(y, dtype=complex)
    d = _dim(sup)
    tr = np.abs(np.trace(y, axis1=-2, axis2=-1))
    size = np.abs(y).max(axis=(-1, -2)) if y.size else 0.0
    if np.any(tr > 1e-10 * np.maximum(size, 1.0)):
        raise ValueError("projected inverse needs a traceless argument")
    if check:
        _check_kernel(sup)
    yv = vectorize(y)
    x = _bordered_solve(sup, yv, 0.0)
    res = np.linalg.norm(np.einsum("...ij,...j->...i", sup, x) - yv, axis=-1)
    ynorm = np.linalg.norm(yv, axis=-1)
    if np.any(res > 1e-10 * np.maximum(ynorm, 1e-300)):
        raise NumericalError(
            f"projected inverse residual {np.max(res):.3g} exceeds tolerance"
        )
    return unvectorize(x).reshape(np.broadcast_shapes(sup.shape[:-2], y.shape[:-2]) + (d, d))


def projected_inverse_matrix(sup) -> np.ndarray:
    """Full matrix of ``(L P)^{-1}``, i.e. projection followed by the inverse."""
    sup = np.asarray(sup, dtype=complex)
    d = _dim(sup)
    basis = unvectorize(traceless_projector(d).T)  # row k -> P[e_k]
    cols = projected_inverse_apply(np.broadcast_to(sup, (d * d,) + sup.shape), basis)
    return vectorize(cols).T


@dataclass(frozen=True)
class PerturbativeState:
    """Terms ``[rho_0, ..., rho_J]`` of the 1/tau expansion at one rescaled time."""

    t_prime: float
    terms: tuple

    @property
    def order(self) -> int:
        return len(self.terms) - 1

    def total(self, tau: float) -> np.ndarray:
        return sum(term / tau**j for j, term in enumerate(self.terms))


def _term(p, ts: np.ndarray, j: int) -> np.ndarray:
    """rho_j at the rescaled times ``ts`` (1-D), shape ``(n, d, d)``."""
    if j == 0:
        return p.steady_state(ts)
    y = term_derivative(p, ts, j - 1)
    return _hermitize(projected_inverse_apply(p.liouvillian(ts), y, check=False))


def term_derivative(p, ts, j: int) -> np.ndarray:
    """d rho_j / dt' at rescaled times ``ts``; traceless by construction.

    ``j = 0`` uses the protocol's steady-state derivative; higher orders
    differentiate the engine output on a five-point stencil.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if j == 0:
        y = p.steady_state_derivative(ts, 1)
    else:
        y = _fd.derivative(lambda s: _term(p, s, j), ts, STENCIL_STEP, richardson=RICHARDSON)
    d = y.shape[-1]
    tr = np.trace(y, axis1=-2, axis2=-1)
    return _hermitize(y - tr[..., None, None] * np.eye(d) / d)


def perturbation_series(p, ts, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Array ``(order+1, n, d, d)`` of the expansion terms at times ``ts``."""
    if order < 0:
        raise ValueError("order must be non-negative")
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if np.any(ts < 0.0) or np.any(ts > 1.0):
        raise ValueError("rescaled time must lie in [0, 1]")
    _check_kernel(p.liouvillian(ts))
    return np.stack([_term(p, ts, j) for j in range(order + 1)])


def perturbation_terms(p, t_prime: float, order: int = DEFAULT_ORDER) -> PerturbativeState:
    series = perturbation_series(p, [t_prime], order)
    return PerturbativeState(float(t_prime), tuple(series[:, 0]))


def slow_solution(p, t_prime, order: int = DEFAULT_ORDER, tau: float | None = None) -> np.ndarray:
    """Truncated series ``sum_j rho_j(t')/tau**j`` (scalar or 1-D ``t_prime``).

    Positivity is not guaranteed by truncation; a :class:`PositivityWarning`
    is issued when an eigenvalue drops below -1e-6.
    """
    tau = p.tau if tau is None else tau
    if tau is None or not tau > 0:
        raise ValueError("slow_solution needs a positive protocol duration tau")
    scalar = np.ndim(t_prime) == 0
    series = perturbation_series(p, t_prime, order)
    weights = tau ** -np.arange(order + 1, dtype=float)
    rho = np.tensordot(weights, series, axes=1)
    if order > 0:
        low = np.linalg.eigvalsh(rho).min()
        if low < -1e-6:
            warnings.warn(
                f"truncated slow solution is not positive (min eigenvalue {low:.3g})",
                PositivityWarning,
                stacklevel=2,
            )
    return rho[0] if scalar else rho


def recursion_residual(p, ts, j: int) -> np.ndarray:
    """``|| L[rho_{j+1}] - d rho_j/dt' ||`` at each time, for diagnostics."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    nxt = _term(p, ts, j + 1)
    lhs = apply_super(p.liouvillian(ts), nxt)
    return np.linalg.norm(lhs - term_derivative(p, ts, j), axis=(-1, -2))
