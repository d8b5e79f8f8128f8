"""Adaptive integration of the time-dependent master equation.

Dormand-Prince 5(4) with PI step-size control and Shampine's 4th-order dense
output. The generator is linear in the state, so all stage Liouvillians of a
step are requested from the protocol in one vectorized call.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .exceptions import InvariantError, StepUnderflowError
from .superop import is_density_matrix, unvectorize, vectorize

DEFAULT_TOL = 1e-10

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_PI_ALPHA = 0.7 / 4.0
_PI_BETA = 0.4 / 4.0
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


@dataclass
class Trajectory:
    """Accepted steps of an integration together with their dense-output data.

    ``times`` are physical times in ``[0, tau]``; ``states`` the density
    matrices at those times.
    """

    times: np.ndarray
    states: np.ndarray
    tau: float
    _stages: np.ndarray = field(repr=False)
    stats: dict = field(default_factory=dict)

    def __call__(self, t) -> np.ndarray:
        """Dense-output state(s) at physical time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t).ravel()
        if np.any(flat < self.times[0] - 1e-12 * self.tau) or np.any(
            flat > self.times[-1] + 1e-12 * self.tau
        ):
            raise ValueError("requested time outside the integrated interval")
        idx = np.clip(np.searchsorted(self.times, flat, side="right") - 1,
                      0, len(self.times) - 2)
        t0 = self.times[idx]
        h = self.times[idx + 1] - t0
        sigma = (flat - t0) / h
        powers = sigma[:, None] ** np.arange(1, 5)[None, :]
        coeff = powers @ _P.T  # (n, 7)
        y0 = vectorize(self.states[idx])
        y = y0 + h[:, None] * np.einsum("ns,nsk->nk", coeff, self._stages[idx])
        rho = unvectorize(y)
        rho = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
        return rho[0] if t.ndim == 0 else rho.reshape(t.shape + rho.shape[-2:])

    def rescaled(self, t_prime) -> np.ndarray:
        return self(np.asarray(t_prime) * self.tau)


def _error_norm(err, y_old, y_new, tol):
    if not (np.all(np.isfinite(err)) and np.all(np.isfinite(y_new))):
        return np.inf  # non-finite generator: reject and shrink
    scale = tol + tol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def integrate(p, rho_init, tol: float = DEFAULT_TOL, t_end: float | None = None,
              first_step: float | None = None) -> Trajectory:
    """Integrate ``d rho/dt = L(t/tau)[rho]`` over ``[0, tau]``.

    Parameters
    ----------
    p : Protocol
        Must have ``tau`` set.
    rho_init : (d, d) array
        Initial density matrix.
    tol : float
        Local relative (and absolute) error target per step. The target is
        tightened to ``tol * min(1, h*max|L|)`` (error per unit step), so the
        accumulated error scales at least linearly with ``tol``.

    Raises
    ------
    StepUnderflowError
        If the step size drops below ``1e-14 * tau``.
    InvariantError
        If a state departs from the density-matrix set by more than ``10*tol``.
    """
    if p.tau is None:
        raise ValueError("protocol duration tau is not set")
    if not tol > 0:
        raise ValueError("tol must be positive")
    rho_init = np.asarray(rho_init, dtype=complex)
    if not is_density_matrix(rho_init, atol=1e-10, eig_tol=1e-10):
        raise ValueError("initial state is not a density matrix")
    tau = float(p.tau)
    t_end = tau if t_end is None else float(t_end)
    inv_tau = 1.0 / tau
    d = rho_init.shape[0]
    breach = max(10.0 * tol, 1e-12)

    y = vectorize(rho_init).copy()
    t = 0.0
    sup = p.liouvillian(np.array([0.0]))[0]
    k_first = sup @ y
    if first_step is None:
        rate = max(float(np.abs(sup).max()), 1e-300)
        h = min(0.01 * tol ** 0.2 / rate, t_end)
    else:
        h = float(first_step)

    times, states, stage_log = [0.0], [rho_init.copy()], []
    n_rejected = n_evals = 0
    err_prev = 1e-4
    max_err = 0.0
    while t < t_end:
        if h < 1e-14 * tau:
            raise StepUnderflowError(f"stiff or singular protocol: step {h:.3g} at t={t:.6g}")
        h = min(h, t_end - t)
        sups = p.liouvillian((t + _C * h) * inv_tau)
        n_evals += 6
        k = np.empty((7, y.size), dtype=complex)
        k[0] = k_first
        for i in range(1, 7):
            yi = y + h * (np.asarray(_A[i]) @ k[:i])
            k[i] = sups[i] @ yi
        y_new = y + h * (_B @ k)
        # error per unit step, the unit being the fastest relaxation time 1/max|L|;
        # keeps each step below tol and makes the global error proportional to tol
        unit = min(1.0, h * max(float(np.abs(sups[0]).max()), 1e-300))
        err = _error_norm(h * (_E @ k), y, y_new, tol) / unit
        if err <= 1.0:
            rho_new = unvectorize(y_new)
            rho_new = 0.5 * (rho_new + rho_new.conj().T)
            y_new = vectorize(rho_new)
            _check_state(rho_new, breach, t + h)
            stage_log.append(k.copy())
            t = t + h if t + h < t_end else t_end
            y = y_new
            k_first = sups[6] @ y
            times.append(t)
            states.append(rho_new)
            max_err = max(max_err, err)
            err = max(err, 1e-10)
            factor = _SAFETY * err ** -_PI_ALPHA * err_prev ** _PI_BETA
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            err_prev = err
        else:
            n_rejected += 1
            h *= max(_MIN_FACTOR, _SAFETY * err ** -0.25)

    stages = np.asarray(stage_log) if stage_log else np.zeros((0, 7, d * d), dtype=complex)
    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states),
        tau=tau,
        _stages=stages,
        stats={"steps": len(times) - 1, "rejected": n_rejected,
               "evaluations": n_evals, "max_error_estimate": max_err},
    )


def _check_state(rho, breach, t):
    tr_err = abs(np.trace(rho) - 1.0)
    low = np.linalg.eigvalsh(rho).min()
    if tr_err > breach or low < -breach:
        raise InvariantError(
            f"state left the density-matrix set at t={t:.6g}: "
            f"|tr-1|={tr_err:.3g}, min eigenvalue={low:.3g}"
        )


def _grid(traj: Trajectory, n_points: int) -> np.ndarray:
    n = max(int(n_points), 2001)
    if n % 2 == 0:
        n += 1
    return np.linspace(traj.times[0], traj.times[-1], n)


def exact_heat_work(traj: Trajectory, p, n_points: int = 2001):
    """Heat ``int tr[rho' H] dt`` and work ``int tr[rho H'] dt`` along a trajectory.

    Composite Simpson on at least ``n_points`` samples of the dense output;
    ``rho'`` is evaluated as ``L_t[rho(t)]``.
    """
    ts = _grid(traj, n_points)
    tp = ts / traj.tau
    rho = traj(ts)
    ham = p.hamiltonian(tp)
    hdot = p.hamiltonian_derivative(tp) / traj.tau
    rhodot = unvectorize(np.einsum("nij,nj->ni", p.liouvillian(tp), vectorize(rho)))
    heat_rate = np.einsum("nij,nji->n", rhodot, ham).real
    work_rate = np.einsum("nij,nji->n", rho, hdot).real
    return float(simpson(heat_rate, x=ts)), float(simpson(work_rate, x=ts))


def energy_change(traj: Trajectory, p) -> float:
    """``U(end) - U(start)`` with ``U = tr[rho H]``."""
    h0 = p.hamiltonian(traj.times[0] / traj.tau)
    h1 = p.hamiltonian(traj.times[-1] / traj.tau)
    return float(np.trace(traj.states[-1] @ h1).real - np.trace(traj.states[0] @ h0).real)
