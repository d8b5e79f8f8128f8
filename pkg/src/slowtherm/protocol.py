"""Slow driving schedules on rescaled time ``t' in [0, 1]``.

A :class:`Protocol` bundles vectorized callables ``t' -> L(t')`` and
``t' -> H(t')``; analytic steady states and derivatives are optional and take
precedence over the numerical ones when present.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _fd
from .exceptions import DegenerateKernelError
from .slowdrive import kernel_gap, steady_state
from .superop import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Z,
    BathSpec,
    dissipator_super,
    eigenoperator_decomposition,
    hamiltonian_super,
)

#: base step for the steady-state derivative (first order), Richardson refined
DERIVATIVE_STEP = 1e-3
#: default lower bound on qubit frequencies, relative to the protocol's frequency scale
OMEGA_MIN_FRACTION = 1e-6


def _stepsize(order: int) -> float:
    # balances Richardson truncation (~h**6) against roundoff (~eps/h**order)
    return DERIVATIVE_STEP * 10.0 ** (0.5 * (order - 1))


@dataclass(frozen=True)
class Protocol:
    """A driving schedule in rescaled time.

    ``liouvillian_at`` and ``hamiltonian_at`` must accept a 1-D array of
    rescaled times and return stacked ``(n, d*d, d*d)`` / ``(n, d, d)`` arrays.
    """

    dim: int
    liouvillian_at: Callable
    hamiltonian_at: Callable
    bath: BathSpec | None = None
    tau: float | None = None
    smoothness_order: float = np.inf
    steady_state_at: Callable | None = None
    steady_state_derivative_at: Callable | None = None
    hamiltonian_derivative_at: Callable | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.tau is not None and not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    def with_tau(self, tau: float) -> "Protocol":
        return dataclasses.replace(self, tau=tau)

    def _eval(self, fn, t):
        arr = np.asarray(t, dtype=float)
        out = np.asarray(fn(np.atleast_1d(arr).ravel()))
        return out[0] if arr.ndim == 0 else out.reshape(arr.shape + out.shape[1:])

    def liouvillian(self, t):
        return self._eval(self.liouvillian_at, t)

    def hamiltonian(self, t):
        return self._eval(self.hamiltonian_at, t)

    def steady_state(self, t, check: bool = True):
        """Instantaneous steady state (analytic if supplied, else null vector).

        ``check=False`` skips the eigenvalue test of the kernel (the bordered
        solve still verifies its residual).
        """
        if self.steady_state_at is not None:
            return self._eval(self.steady_state_at, t)
        return steady_state(self.liouvillian(t), check=check)

    def steady_state_derivative(self, t, order: int = 1, method: str = "auto"):
        """``d^order rho_0 / dt'^order``; ``method`` is 'auto', 'analytic' or 'fd'."""
        if order < 1:
            raise ValueError("derivative order must be >= 1")
        analytic = self.steady_state_derivative_at is not None and order == 1
        if method == "analytic" and not analytic:
            raise ValueError("no analytic derivative of this order available")
        if method != "fd" and analytic:
            return self._eval(self.steady_state_derivative_at, t)
        arr = np.asarray(t, dtype=float)
        out = _fd.derivative(lambda s: self.steady_state(s, check=False), arr.ravel(),
                             _stepsize(order), order, richardson=True)
        # exact derivatives of unit-trace Hermitian states are traceless Hermitian;
        # project out the stencil roundoff
        out = 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))
        tr = np.trace(out, axis1=-2, axis2=-1) / self.dim
        out = out - tr[:, None, None] * np.eye(self.dim)
        return out[0] if arr.ndim == 0 else out.reshape(arr.shape + out.shape[1:])

    def hamiltonian_derivative(self, t):
        if self.hamiltonian_derivative_at is not None:
            return self._eval(self.hamiltonian_derivative_at, t)
        arr = np.asarray(t, dtype=float)
        out = _fd.derivative(self.hamiltonian, arr.ravel(), DERIVATIVE_STEP, 1,
                             richardson=True)
        return out[0] if arr.ndim == 0 else out.reshape(arr.shape + out.shape[1:])

    def check_relaxing(self, n: int = 50) -> float:
        """Verify a simple zero eigenvalue and strictly decaying modes on a grid.

        Returns the smallest relative gap ``min |Re lambda| / max|L|`` over
        the nonzero eigenvalues found on ``n`` equispaced times.
        """
        ts = np.linspace(0.0, 1.0, n)
        sups = self.liouvillian(ts)
        vals = np.linalg.eigvals(sups)
        idx = np.argsort(np.abs(vals), axis=-1)[..., 1:]
        rest = np.take_along_axis(vals, idx, axis=-1)
        scale = np.abs(sups).max(axis=(-1, -2))
        gap = np.min(-rest.real, axis=-1) / np.where(scale > 0, scale, 1.0)
        if np.any(kernel_gap(sups) <= 1e-8) or np.any(gap <= 1e-8):
            raise DegenerateKernelError(
                f"protocol {self.name!r} is not relaxing on [0, 1] "
                f"(smallest relative decay rate {gap.min():.3g})"
            )
        return float(gap.min())


def steady_state_derivative(p: Protocol, t, order: int = 1, method: str = "auto"):
    """Module-level alias of :meth:`Protocol.steady_state_derivative`."""
    return p.steady_state_derivative(t, order, method)


def reverse(p: Protocol) -> Protocol:
    """Time-reversed protocol ``t' -> 1 - t'``."""

    def flip(fn, sign=1.0):
        if fn is None:
            return None
        return lambda t: sign * np.asarray(fn(1.0 - np.asarray(t)))

    return dataclasses.replace(
        p,
        liouvillian_at=flip(p.liouvillian_at),
        hamiltonian_at=flip(p.hamiltonian_at),
        steady_state_at=flip(p.steady_state_at),
        steady_state_derivative_at=flip(p.steady_state_derivative_at, -1.0),
        hamiltonian_derivative_at=flip(p.hamiltonian_derivative_at, -1.0),
        name=p.name[8:-1] if p.name.startswith("reverse(") else f"reverse({p.name})",
    )


# -- qubit protocols -------------------------------------------------------------------

_D_MINUS = dissipator_super(SIGMA_MINUS)
_D_PLUS = dissipator_super(SIGMA_PLUS)
_COMM_X_HALF = hamiltonian_super(0.5 * SIGMA_X)
_EYE2 = np.eye(2, dtype=complex)


def _qubit_thermal(omega, bath: BathSpec):
    """Stacked qubit Liouvillians for frequencies ``omega`` (1-D)."""
    gamma = bath.rate(omega)
    n = bath.occupation(omega)
    return ((gamma * (n + 1.0))[:, None, None] * _D_MINUS
            + (gamma * n)[:, None, None] * _D_PLUS)


def driven_qubit_protocol(omega: float, delta0: float, bath: BathSpec,
                          tau: float | None = None) -> Protocol:
    """Thermal qubit with transverse drive ``(Delta/2) sigma_x``, ``Delta = delta0 cos(pi t')``.

    Interaction picture with respect to ``(omega/2) sigma_z``: the Liouvillian
    carries only the drive commutator and the two thermal jump channels.
    ``hamiltonian_at`` returns ``(omega/2) sigma_z + (Delta/2) sigma_x``.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    base = _qubit_thermal(np.array([omega]), bath)[0]

    def delta(t):
        return delta0 * np.cos(np.pi * t)

    def liouvillian_at(t):
        return base + delta(t)[:, None, None] * _COMM_X_HALF

    def hamiltonian_at(t):
        return 0.5 * omega * SIGMA_Z + 0.5 * delta(t)[:, None, None] * SIGMA_X

    def hamiltonian_derivative_at(t):
        return (-0.5 * np.pi * delta0 * np.sin(np.pi * t))[:, None, None] * SIGMA_X

    return Protocol(
        dim=2,
        liouvillian_at=liouvillian_at,
        hamiltonian_at=hamiltonian_at,
        bath=bath,
        tau=tau,
        hamiltonian_derivative_at=hamiltonian_derivative_at,
        name="appendixA-drive",
        params={"omega": omega, "delta0": delta0},
    )


def qubit_isotherm_protocol(omega_of: Callable, bath: BathSpec, tau: float | None = None,
                            omega_dot: Callable | None = None,
                            omega_min: float | None = None, name: str = "isotherm",
                            params: dict | None = None) -> Protocol:
    """Qubit ``H = (omega(t')/2) sigma_z`` in contact with one thermal bath.

    The rate ``gamma0 * omega**alpha`` and occupation ``N(beta*omega)`` follow
    the instantaneous frequency; the steady state is the Gibbs state with Bloch
    coordinate ``z = -tanh(beta*omega/2)``. The frequency is softly bounded
    below by ``omega_min`` (default 1e-6 of its maximum on [0, 1]) through
    ``sqrt(omega**2 + omega_min**2)``, which keeps the schedule smooth.
    """
    grid = np.linspace(0.0, 1.0, 1001)
    raw = np.asarray(omega_of(grid), dtype=float)
    if np.any(raw < 0.0):
        raise ValueError("qubit frequency must be non-negative")
    if omega_min is None:
        omega_min = OMEGA_MIN_FRACTION * float(raw.max())
    omega_min = float(omega_min)
    if raw.max() <= 0.0 and omega_min <= 0.0:
        raise ValueError("frequency vanishes identically")
    beta = bath.beta

    def omega_eff(t):
        w = np.asarray(omega_of(t), dtype=float)
        return np.sqrt(w * w + omega_min * omega_min) if omega_min else w

    def omega_eff_dot(t):
        w = np.asarray(omega_of(t), dtype=float)
        return omega_dot(t) * w / omega_eff(t)

    def bloch_z(t):
        return -np.tanh(0.5 * beta * omega_eff(t))

    def liouvillian_at(t):
        return _qubit_thermal(omega_eff(t), bath)

    def hamiltonian_at(t):
        return 0.5 * omega_eff(t)[:, None, None] * SIGMA_Z

    def steady_state_at(t):
        return 0.5 * (_EYE2 + bloch_z(t)[:, None, None] * SIGMA_Z)

    kwargs = {}
    if omega_dot is not None:
        def steady_state_derivative_at(t):
            zdot = -0.5 * beta * omega_eff_dot(t) / np.cosh(0.5 * beta * omega_eff(t)) ** 2
            return 0.5 * zdot[:, None, None] * SIGMA_Z

        def hamiltonian_derivative_at(t):
            return 0.5 * omega_eff_dot(t)[:, None, None] * SIGMA_Z

        kwargs = {
            "steady_state_derivative_at": steady_state_derivative_at,
            "hamiltonian_derivative_at": hamiltonian_derivative_at,
        }

    return Protocol(
        dim=2,
        liouvillian_at=liouvillian_at,
        hamiltonian_at=hamiltonian_at,
        bath=bath,
        tau=tau,
        steady_state_at=steady_state_at,
        name=name,
        params=dict(params or {}, omega_min=omega_min),
        **kwargs,
    )


def bloch_z(p: Protocol, t) -> np.ndarray:
    """Bloch z coordinate of the steady state of a qubit protocol."""
    rho = p.steady_state(t)
    return (rho[..., 0, 0] - rho[..., 1, 1]).real


# Dimensionless frequency profiles f(t') for isotherms; all have f'(0) = f'(1) = 0,
# so the Gibbs trajectory has a continuous derivative across cycle joints.
SHAPES = {
    "cosine": (lambda t: 1.0 + np.cos(np.pi * t),
               lambda t: -np.pi * np.sin(np.pi * t)),
    "raised-cosine": (lambda t: 1.5 + np.cos(np.pi * t),
                      lambda t: -np.pi * np.sin(np.pi * t)),
    "smoothstep": (lambda t: 2.0 - 1.5 * t * t * (3.0 - 2.0 * t),
                   lambda t: -9.0 * t * (1.0 - t)),
    "smootherstep": (lambda t: 2.0 - 1.5 * t**3 * (10.0 - 15.0 * t + 6.0 * t * t),
                     lambda t: -45.0 * t * t * (1.0 - t) ** 2),
}


def resolve_shape(shape):
    """``(f, fdot)`` for a named shape, or the pair itself if callables are given."""
    if isinstance(shape, str):
        try:
            return SHAPES[shape]
        except KeyError:
            raise ValueError(f"unknown isotherm shape {shape!r}; choose from {sorted(SHAPES)}")
    f, fdot = shape
    if not (callable(f) and callable(fdot)):
        raise ValueError("a custom shape must be a pair of callables (f, fdot)")
    return f, fdot


def shaped_isotherm(shape, omega0: float, bath: BathSpec, tau: float | None = None,
                    scale: float = 1.0, reversed_: bool = False,
                    omega_min: float | None = None) -> Protocol:
    """Qubit isotherm ``omega(t') = scale * omega0 * f(t')``.

    ``shape`` is a key of :data:`SHAPES` or a pair of vectorized callables
    ``(f, fdot)``.
    """
    f, fdot = resolve_shape(shape)
    label = shape if isinstance(shape, str) else "custom"
    if not omega0 > 0:
        raise ValueError("omega0 must be positive")
    amp = scale * omega0
    if reversed_:
        def omega_of(t):
            return amp * f(1.0 - np.asarray(t))

        def omega_dot(t):
            return -amp * fdot(1.0 - np.asarray(t))
    else:
        def omega_of(t):
            return amp * f(np.asarray(t))

        def omega_dot(t):
            return amp * fdot(np.asarray(t))

    if omega_min is None:
        omega_min = OMEGA_MIN_FRACTION * amp
    return qubit_isotherm_protocol(
        omega_of, bath, tau, omega_dot=omega_dot, omega_min=omega_min,
        name=f"{label}{'-reversed' if reversed_ else ''}",
        params={"shape": label, "omega0": omega0, "scale": scale},
    )


def cosine_ramp_protocol(omega_start: float, omega_end: float, bath: BathSpec,
                         tau: float | None = None) -> Protocol:
    """Qubit isotherm ``omega_start -> omega_end`` along a half cosine."""
    if omega_start < 0 or omega_end < 0:
        raise ValueError("frequencies must be non-negative")
    span = omega_end - omega_start

    def omega_of(t):
        return omega_start + 0.5 * span * (1.0 - np.cos(np.pi * np.asarray(t)))

    def omega_dot(t):
        return 0.5 * np.pi * span * np.sin(np.pi * np.asarray(t))

    return qubit_isotherm_protocol(
        omega_of, bath, tau, omega_dot=omega_dot, name="cosine-ramp",
        params={"omega_start": omega_start, "omega_end": omega_end},
    )


# -- general d-level isotherm ----------------------------------------------------------

def scaled_thermal_protocol(h_s, coupling, bath: BathSpec, scale_of: Callable,
                            scale_dot: Callable | None = None, tau: float | None = None,
                            gap_tol: float | None = None) -> Protocol:
    """Isotherm with ``H(t') = s(t') H_S`` and the secular thermal Liouvillian.

    Since only the overall scale changes, the eigenoperators of ``H_S`` are
    fixed and ``L(t')`` is assembled from precomputed dissipators.
    """
    h_s = np.asarray(h_s, dtype=complex)
    d = h_s.shape[0]
    channels = []
    for w, a_w in eigenoperator_decomposition(h_s, coupling, gap_tol):
        if w > 0.0 and np.any(np.abs(a_w) > 0.0):
            channels.append((w, dissipator_super(a_w), dissipator_super(a_w.conj().T)))
    if not channels:
        raise ValueError("dissipationless coupling: A couples no positive Bohr frequency")
    energies, vecs = np.linalg.eigh(h_s)
    beta = bath.beta

    def liouvillian_at(t):
        s = np.asarray(scale_of(t), dtype=float)
        if np.any(s <= 0.0):
            raise ValueError("Hamiltonian scale must stay positive")
        out = np.zeros(s.shape + (d * d, d * d), dtype=complex)
        for w, d_down, d_up in channels:
            gamma = bath.rate(s * w)
            n = bath.occupation(s * w)
            out += (gamma * (n + 1.0))[:, None, None] * d_down
            out += (gamma * n)[:, None, None] * d_up
        return out

    def hamiltonian_at(t):
        return np.asarray(scale_of(t), dtype=float)[:, None, None] * h_s

    def _populations(t):
        s = np.asarray(scale_of(t), dtype=float)
        logw = -beta * s[:, None] * (energies - energies.min())[None, :]
        w = np.exp(logw)
        return w / w.sum(axis=1, keepdims=True)

    def steady_state_at(t):
        p = _populations(t)
        return np.einsum("ij,nj,kj->nik", vecs, p, vecs.conj())

    kwargs = {}
    if scale_dot is not None:
        def steady_state_derivative_at(t):
            p = _populations(t)
            sd = np.asarray(scale_dot(t), dtype=float)
            mean = (p * energies[None, :]).sum(axis=1, keepdims=True)
            dp = -beta * sd[:, None] * (energies[None, :] - mean) * p
            return np.einsum("ij,nj,kj->nik", vecs, dp, vecs.conj())

        def hamiltonian_derivative_at(t):
            return np.asarray(scale_dot(t), dtype=float)[:, None, None] * h_s

        kwargs = {
            "steady_state_derivative_at": steady_state_derivative_at,
            "hamiltonian_derivative_at": hamiltonian_derivative_at,
        }

    return Protocol(
        dim=d,
        liouvillian_at=liouvillian_at,
        hamiltonian_at=hamiltonian_at,
        bath=bath,
        tau=tau,
        steady_state_at=steady_state_at,
        name="scaled-thermal",
        **kwargs,
    )


def from_scalar_functions(dim: int, liouvillian_of: Callable, hamiltonian_of: Callable,
                          bath: BathSpec | None = None, tau: float | None = None,
                          name: str = "custom") -> Protocol:
    """Wrap scalar ``t' -> matrix`` callables into a vectorized protocol."""

    def stack(fn):
        return lambda t: np.stack([np.asarray(fn(float(s)), dtype=complex) for s in t])

    return Protocol(dim=dim, liouvillian_at=stack(liouvillian_of),
                    hamiltonian_at=stack(hamiltonian_of), bath=bath, tau=tau, name=name)
