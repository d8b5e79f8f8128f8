"""Heat, work and energy coefficients of the 1/tau expansion.

Every quantity ``X`` in ``{U, S, W, Q}`` of a finite-time process is expanded
as ``X = X_0 + X_1/tau + X_2/tau**2 + ...``. The coefficients are integrals
over rescaled time of traces involving the perturbative terms ``rho_j``:

    Q_j = int_0^1 tr[H d(rho_j)/dt'] dt',   W_j = int_0^1 tr[dH/dt' rho_j] dt'.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import QuadratureError
from .slowdrive import _term, term_derivative

PANELS = 64
NODES_PER_PANEL = 8
QUAD_RTOL = 1e-8
EIGEN_FLOOR = 1e-300


def equilibrium_quantities(h, beta: float):
    """Partition function, energy and entropy of the Gibbs state of ``h``.

    Returns ``(Z, U0, S0)`` with ``S0 = beta*U0 + log Z``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    energies = np.linalg.eigvalsh(np.asarray(h, dtype=complex))
    e_min = energies.min()
    w = np.exp(-beta * (energies - e_min))
    z_shift = w.sum()
    log_z = np.log(z_shift) - beta * e_min
    u0 = float((w * energies).sum() / z_shift)
    return float(np.exp(log_z)), u0, float(beta * u0 + log_z)


def log_partition(h, beta: float) -> float:
    energies = np.linalg.eigvalsh(np.asarray(h, dtype=complex))
    e_min = energies.min()
    return float(np.log(np.exp(-beta * (energies - e_min)).sum()) - beta * e_min)


def gauss_legendre_panels(panels: int = PANELS, nodes: int = NODES_PER_PANEL):
    """Nodes and weights of a composite Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x[None, :]).ravel(), (half[:, None] * w[None, :]).ravel()


def _integrate(integrand, what: str, rtol: float = QUAD_RTOL) -> float:
    """Composite Gauss-Legendre with one panel doubling as error estimate.

    The refinement difference is measured relative to ``int |f|``, which
    equals ``|int f|`` for sign-definite integrands and stays meaningful when
    the integral cancels (e.g. coefficients that vanish by symmetry).
    """
    x1, w1 = gauss_legendre_panels(PANELS)
    x2, w2 = gauss_legendre_panels(2 * PANELS)
    f1 = integrand(x1)
    f2 = integrand(x2)
    coarse, fine = float(w1 @ f1), float(w2 @ f2)
    scale = max(abs(fine), float(w2 @ np.abs(f2)), 1e-300)
    if abs(fine - coarse) > rtol * scale:
        raise QuadratureError(
            f"{what}: quadrature refinement changed the result from {coarse:.12g} "
            f"to {fine:.12g} (relative {abs(fine - coarse) / scale:.2e} > {rtol:.0e})"
        )
    return fine


def _trace_product(a, b) -> np.ndarray:
    return np.einsum("...ij,...ji->...", a, b).real


def heat_coefficient(p, j: int, rtol: float = QUAD_RTOL) -> float:
    """``Q_j = int_0^1 tr[H d(rho_j)/dt'] dt'``."""
    if j < 0:
        raise ValueError("order must be non-negative")

    def integrand(ts):
        return _trace_product(p.hamiltonian(ts), term_derivative(p, ts, j))

    return _integrate(integrand, f"Q_{j}", rtol)


def work_coefficient(p, j: int, rtol: float = QUAD_RTOL) -> float:
    """``W_j = int_0^1 tr[dH/dt' rho_j] dt'``."""
    if j < 0:
        raise ValueError("order must be non-negative")

    def integrand(ts):
        return _trace_product(p.hamiltonian_derivative(ts), _term(p, ts, j))

    return _integrate(integrand, f"W_{j}", rtol)


def energy_coefficients(p, j: int) -> tuple[float, float]:
    """``(U_j(0), U_j(1))`` with ``U_j = tr[H rho_j]``."""
    ends = np.array([0.0, 1.0])
    u = _trace_product(p.hamiltonian(ends), _term(p, ends, j))
    return float(u[0]), float(u[1])


def _log_state(rho) -> np.ndarray:
    vals, vecs = np.linalg.eigh(rho)
    if np.any(vals <= 0.0):
        raise ValueError("steady state is singular; log is undefined")
    return (vecs * np.log(np.maximum(vals, EIGEN_FLOOR))[..., None, :]) @ np.swapaxes(vecs.conj(), -1, -2)


def first_order_entropy(p, t_prime) -> float:
    """``S_1 = -tr[rho_1 log rho_0]`` at rescaled time ``t_prime``."""
    ts = np.atleast_1d(np.asarray(t_prime, dtype=float))
    rho0 = _term(p, ts, 0)
    rho1 = _term(p, ts, 1)
    out = -_trace_product(rho1, _log_state(rho0))
    return float(out[0]) if np.ndim(t_prime) == 0 else out


def first_order_energy(p, t_prime):
    """``U_1 = tr[H rho_1]`` at rescaled time ``t_prime``."""
    ts = np.atleast_1d(np.asarray(t_prime, dtype=float))
    out = _trace_product(p.hamiltonian(ts), _term(p, ts, 1))
    return float(out[0]) if np.ndim(t_prime) == 0 else out


@dataclass(frozen=True)
class ThermoExpansion:
    """Order-by-order coefficients ``[X_0, ..., X_J]`` of a process."""

    Q_coeffs: tuple
    W_coeffs: tuple
    U_endpoints: tuple
    S_coeffs: tuple

    @property
    def order(self) -> int:
        return len(self.Q_coeffs) - 1

    def delta_u(self, j: int) -> float:
        u0, u1 = self.U_endpoints[j]
        return u1 - u0

    def first_law_residual(self, j: int) -> float:
        """``|dU_j - W_j - Q_j|`` relative to the largest of the three."""
        du, w, q = self.delta_u(j), self.W_coeffs[j], self.Q_coeffs[j]
        scale = max(abs(du), abs(w), abs(q), 1e-300)
        return abs(du - w - q) / scale

    def heat(self, tau: float) -> float:
        return sum(q / tau**j for j, q in enumerate(self.Q_coeffs))

    def work(self, tau: float) -> float:
        return sum(w / tau**j for j, w in enumerate(self.W_coeffs))


def expand(p, order: int = 2) -> ThermoExpansion:
    """Heat, work, energy and entropy coefficients up to ``order``.

    Entropy coefficients are reported at the two endpoints:
    ``S_0 = -tr[rho_0 log rho_0]`` and ``S_1 = -tr[rho_1 log rho_0]``; higher
    entropy orders are not part of the expansion kept here.
    """
    qs = tuple(heat_coefficient(p, j) for j in range(order + 1))
    ws = tuple(work_coefficient(p, j) for j in range(order + 1))
    us = tuple(energy_coefficients(p, j) for j in range(order + 1))
    ends = np.array([0.0, 1.0])
    rho0 = _term(p, ends, 0)
    log0 = _log_state(rho0)
    s0 = -_trace_product(rho0, log0)
    ss = [(float(s0[0]), float(s0[1]))]
    if order >= 1:
        s1 = -_trace_product(_term(p, ends, 1), log0)
        ss.append((float(s1[0]), float(s1[1])))
    return ThermoExpansion(qs, ws, us, tuple(ss))
