"""Dense operator and superoperator algebra.

Operators are ``(d, d)`` complex numpy arrays; superoperators are ``(d*d, d*d)``
arrays acting on row-major vectorized operators, i.e. for ``d = 2``::

    rho -> [rho11, rho12, rho21, rho22]

With this convention ``vec(A @ X @ B) == kron(A, B.T) @ vec(X)``.
Most helpers accept leading batch dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma_z = diag(1, -1): index 0 is the excited level
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()

# beta*omega above this gives N = 0 (exp overflow regime)
_OCCUPATION_OVERFLOW = 700.0
_OCCUPATION_UNDERFLOW = 1e-12


def dagger(op):
    return np.swapaxes(np.conj(op), -1, -2)


def vectorize(op):
    """Row-major stacking of the last two axes."""
    op = np.asarray(op)
    return op.reshape(op.shape[:-2] + (op.shape[-1] * op.shape[-2],))


def unvectorize(vec):
    vec = np.asarray(vec)
    d = int(round(np.sqrt(vec.shape[-1])))
    if d * d != vec.shape[-1]:
        raise ValueError(f"vector length {vec.shape[-1]} is not a square")
    return vec.reshape(vec.shape[:-1] + (d, d))


def apply_super(superop, op):
    """Apply a superoperator (batched) to an operator (batched)."""
    return unvectorize(np.einsum("...ij,...j->...i", superop, vectorize(op)))


def trace_row(d: int) -> np.ndarray:
    """Row vector ``t`` with ``t @ vectorize(X) == tr(X)``."""
    return vectorize(np.eye(d, dtype=complex))


def spre(a):
    """Superoperator of X -> a X."""
    a = np.asarray(a, dtype=complex)
    return np.kron(a, np.eye(a.shape[0]))


def spost(b):
    """Superoperator of X -> X b."""
    b = np.asarray(b, dtype=complex)
    return np.kron(np.eye(b.shape[0]), b.T)


def is_hermitian(op, atol: float = 1e-12) -> bool:
    op = np.asarray(op)
    return bool(np.allclose(op, dagger(op), rtol=0.0, atol=atol))


def is_density_matrix(op, atol: float = 1e-12, eig_tol: float = 1e-10) -> bool:
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        return False
    if not is_hermitian(op, atol) or abs(np.trace(op) - 1.0) > atol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (op + dagger(op))).min() >= -eig_tol)


def _check_square(op, name: str) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {op.shape}")
    return op


def dissipator_super(x) -> np.ndarray:
    """Matrix of rho -> x rho x^+ - (x^+ x rho + rho x^+ x)/2."""
    x = _check_square(x, "jump operator")
    xdx = x.conj().T @ x
    return np.kron(x, x.conj()) - 0.5 * spre(xdx) - 0.5 * spost(xdx)


def hamiltonian_super(v, atol: float = 1e-12) -> np.ndarray:
    """Matrix of rho -> -i [v, rho] (hbar = 1)."""
    v = _check_square(v, "Hamiltonian")
    if not is_hermitian(v, atol * max(1.0, np.abs(v).max())):
        raise ValueError("Hamiltonian must be Hermitian")
    return -1j * (spre(v) - spost(v))


def bose_occupation(beta_omega):
    """Mean excitation number 1/(exp(beta*omega) - 1), with overflow guard.

    Raises
    ------
    ValueError
        If ``beta*omega`` is below 1e-12, where the occupation diverges.
    """
    x = np.asarray(beta_omega, dtype=float)
    if np.any(x < _OCCUPATION_UNDERFLOW):
        raise ValueError(
            f"beta*omega = {np.min(x):.3g} too small: thermal occupation diverges"
        )
    safe = np.minimum(x, _OCCUPATION_OVERFLOW)
    n = np.where(x > _OCCUPATION_OVERFLOW, 0.0, 1.0 / np.expm1(safe))
    return n if n.ndim else float(n)


@dataclass(frozen=True)
class BathSpec:
    """Thermal bath with power-law spectral density ``J(w) ~ gamma0 * w**alpha``."""

    beta: float
    gamma0: float = 1.0
    alpha: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not (np.isfinite(self.gamma0) and self.gamma0 > 0):
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")
        if not np.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite, got {self.alpha}")

    def rate(self, omega):
        """Damping rate gamma0 * omega**alpha."""
        return self.gamma0 * np.asarray(omega, dtype=float) ** self.alpha

    def occupation(self, omega):
        return bose_occupation(self.beta * np.asarray(omega, dtype=float))


def _default_gap_tol(energies: np.ndarray) -> float:
    return 1e-9 * float(energies.max() - energies.min())


def eigenoperator_decomposition(h_s, a, gap_tol: float | None = None):
    """Split ``a`` into eigenoperators of ``h_s``.

    Returns a list of ``(omega, A(omega))`` sorted by Bohr frequency, where
    ``A(omega) = sum_{E_m - E_n = omega} |n><n| a |m><m|``. Frequencies closer
    than ``gap_tol`` (default: 1e-9 times the spectral range of ``h_s``) are
    merged. Components that vanish identically are still reported, so the
    frequency set depends only on ``h_s``.
    """
    h_s = _check_square(h_s, "H_S")
    a = _check_square(a, "A")
    if h_s.shape != a.shape:
        raise ValueError("H_S and A must have the same dimension")
    scale = max(1.0, float(np.abs(h_s).max()))
    if not is_hermitian(h_s, 1e-12 * scale):
        raise ValueError("H_S must be Hermitian")
    if not is_hermitian(a, 1e-12 * max(1.0, float(np.abs(a).max()))):
        raise ValueError("coupling operator A must be Hermitian")

    energies, vecs = np.linalg.eigh(h_s)
    tol = _default_gap_tol(energies) if gap_tol is None else float(gap_tol)
    # gaps[n, m] = E_m - E_n
    gaps = energies[None, :] - energies[:, None]
    a_eig = vecs.conj().T @ a @ vecs

    # cluster |gaps| so that the +omega / -omega groups mirror each other exactly
    mags = np.sort(np.unique(np.abs(gaps).ravel()))
    clusters: list[list[float]] = []
    for g in mags:
        if clusters and g - clusters[-1][-1] <= tol:
            clusters[-1].append(g)
        else:
            clusters.append([g])
    labels = np.empty(gaps.shape, dtype=int)
    freqs = []
    for k, members in enumerate(clusters):
        lo, hi = members[0], members[-1]
        sel = (np.abs(gaps) >= lo) & (np.abs(gaps) <= hi)
        labels[sel] = k
        freqs.append(0.0 if lo <= tol else float(np.mean(members)))

    out = []
    for k, w in enumerate(freqs):
        signs = (0,) if w == 0.0 else (-1, 1)
        for s in signs:
            mask = labels == k
            if s:
                mask &= np.sign(gaps) == s
            comp = vecs @ np.where(mask, a_eig, 0.0) @ vecs.conj().T
            out.append((s * w, comp))
    out.sort(key=lambda item: item[0])
    return out


def thermal_liouvillian(h_s, a, bath: BathSpec, gap_tol: float | None = None) -> np.ndarray:
    """Secular weak-coupling Liouvillian (interaction picture) for coupling ``a``.

    ``sum_{w>0} gamma0 w**alpha [(N(w)+1) D[A(w)] + N(w) D[A(w)^+]]``; the
    ``w = 0`` (pure dephasing) components are left out.
    """
    h_s = _check_square(h_s, "H_S")
    d = h_s.shape[0]
    sup = np.zeros((d * d, d * d), dtype=complex)
    active = False
    for omega, a_w in eigenoperator_decomposition(h_s, a, gap_tol):
        if omega <= 0.0 or not np.any(np.abs(a_w) > 0.0):
            continue
        active = True
        gamma = bath.rate(omega)
        n = bath.occupation(omega)
        sup += gamma * (n + 1.0) * dissipator_super(a_w)
        if n > 0.0:
            sup += gamma * n * dissipator_super(a_w.conj().T)
    if not active:
        raise ValueError("dissipationless coupling: A couples no positive Bohr frequency")
    return sup


def gibbs_state(h, beta: float) -> np.ndarray:
    """exp(-beta h)/Z, computed in the eigenbasis with a ground-energy shift."""
    h = _check_square(h, "H")
    energies, vecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    w = np.exp(-beta * (energies - energies.min()))
    w /= w.sum()
    return (vecs * w) @ vecs.conj().T
