"""Finite-time Carnot cycle of a qubit between two thermal baths.

The cycle is: a hot isotherm of duration ``tau_H`` along
``omega_H(t') = omega0 f(t')``, a sudden rescaling of the Hamiltonian by
``lam = T_C/T_H``, a cold isotherm of duration ``tau_C`` along the reversed
and rescaled schedule ``omega_C(t') = lam omega0 f(1 - t')`` and a sudden
rescaling back. With this construction the cold Gibbs trajectory is the hot
one played backwards, ``z_C(t') = z_H(1 - t')``.

Keeping first-order terms, the heats are ``Q = Q_0 + Q_1/tau`` on each
isotherm and the output power is

    P = (Q0H + Q1H/tau_H + Q0C + Q1C/tau_C) / (tau_H + tau_C).
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from . import exactprop
from .exceptions import ConvergenceError, NumericalError, OptimizationError
from .protocol import Protocol, resolve_shape, shaped_isotherm
from .superop import BathSpec
from .thermo import equilibrium_quantities, heat_coefficient

log = logging.getLogger(__name__)

#: optimizer box, in units of |Q1|/Q0 for each isotherm
TAU_BOX = (1e-3, 1e6)
GRID_POINTS = 64
LOG_XTOL = 1e-10
#: relative change of Q_H between consecutive cycles that counts as converged
CYCLE_RTOL = 1e-8
MAX_CYCLES = 200
ENGINE_TOL = 1e-9


@dataclass(frozen=True)
class CarnotSpec:
    """Parameters of a qubit Carnot engine.

    Units: hbar = k_B = 1; ``omega0`` sets the energy scale and ``gamma0`` the
    rate scale of the bath coupling ``gamma(omega) = gamma0 * omega**alpha``.
    ``hot_isotherm_shape`` names a profile of :data:`slowtherm.protocol.SHAPES`
    (or is a pair of callables ``(f, fdot)``) with ``f`` decreasing from
    ``f(0)`` to ``f(1)`` and ``f'(0) = f'(1) = 0``.
    """

    T_H: float = 0.5
    T_C: float = 0.25
    alpha: float = 0.0
    gamma0: float = 1.0
    omega0: float = 1.0
    hot_isotherm_shape: object = "cosine"
    omega_min: float | None = None

    def __post_init__(self):
        if not (self.T_H > self.T_C > 0.0):
            raise ValueError(f"need T_H > T_C > 0, got T_H={self.T_H}, T_C={self.T_C}")
        if not (self.gamma0 > 0.0 and self.omega0 > 0.0):
            raise ValueError("gamma0 and omega0 must be positive")
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")

    @classmethod
    def from_ratio(cls, ratio: float, alpha: float, beta_h_omega0: float = 2.0,
                   **kwargs) -> "CarnotSpec":
        """Spec with ``T_C/T_H = ratio`` and hot-bath ``beta_H * omega0`` fixed."""
        omega0 = kwargs.pop("omega0", 1.0)
        t_h = omega0 / beta_h_omega0
        return cls(T_H=t_h, T_C=ratio * t_h, alpha=alpha, omega0=omega0, **kwargs)

    @property
    def ratio(self) -> float:
        return self.T_C / self.T_H

    @property
    def eta_carnot(self) -> float:
        return 1.0 - self.ratio

    def bath(self, hot: bool) -> BathSpec:
        temp = self.T_H if hot else self.T_C
        return BathSpec(beta=1.0 / temp, gamma0=self.gamma0, alpha=self.alpha)


@dataclass(frozen=True)
class CarnotResult:
    Q0H: float
    Q0C: float
    Q1H: float
    Q1C: float
    tau_H_opt: float
    tau_C_opt: float
    P_max: float
    eta_star: float
    eta_star_analytic: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EngineResult:
    """Per-cycle heats of the converged periodic regime.

    ``W = -QH - QC`` is the work done on the system per cycle; the machine
    is an engine when ``W < 0``.
    """

    QH: float
    QC: float
    W: float
    eta: float
    is_engine: bool
    cycles: int

    @property
    def flag(self) -> str:
        return "engine" if self.is_engine else "not-engine"


def _validate_shape(shape) -> None:
    f, fdot = resolve_shape(shape)
    grid = np.linspace(0.0, 1.0, 2001)
    vals = np.asarray(f(grid), dtype=float)
    if np.any(vals < 0.0) or vals.max() <= 0.0:
        raise ValueError("isotherm shape must be non-negative and not identically zero")
    if not vals[0] > vals[-1]:
        raise ValueError("hot isotherm must lower the frequency (f(0) > f(1))")
    ends = np.abs(np.asarray(fdot(np.array([0.0, 1.0])), dtype=float))
    if np.any(ends > 1e-10 * vals.max()):
        raise ValueError(
            "shape must have vanishing slope at both ends, otherwise the Gibbs "
            "trajectory is not differentiable across the adiabatic joints"
        )


def build_cycle(spec: CarnotSpec, tau_H: float | None = None,
                tau_C: float | None = None) -> tuple[Protocol, Protocol]:
    """Hot and cold isotherm protocols of the cycle."""
    _validate_shape(spec.hot_isotherm_shape)
    lam = spec.ratio
    om_min = spec.omega_min
    hot = shaped_isotherm(spec.hot_isotherm_shape, spec.omega0, spec.bath(True), tau_H,
                          omega_min=om_min)
    cold = shaped_isotherm(spec.hot_isotherm_shape, spec.omega0, spec.bath(False), tau_C,
                           scale=lam, reversed_=True,
                           omega_min=None if om_min is None else lam * om_min)
    return hot, cold


def first_order_heats(spec: CarnotSpec) -> tuple[float, float, float, float]:
    """``(Q0H, Q0C, Q1H, Q1C)`` of the cycle."""
    hot, cold = build_cycle(spec)
    ends = np.array([0.0, 1.0])
    h_ends = hot.hamiltonian(ends)
    beta_h, beta_c = 1.0 / spec.T_H, 1.0 / spec.T_C
    s_start = equilibrium_quantities(h_ends[0], beta_h)[2]
    s_end = equilibrium_quantities(h_ends[1], beta_h)[2]
    d_s = s_end - s_start
    q0h, q0c = d_s / beta_h, -d_s / beta_c
    q1h, q1c = heat_coefficient(hot, 1), heat_coefficient(cold, 1)
    if not (q0h > 0.0 and q0c < 0.0 and q1h < 0.0 and q1c < 0.0):
        raise NumericalError(
            f"heat coefficients violate the engine sign pattern: "
            f"Q0H={q0h:.6g}, Q0C={q0c:.6g}, Q1H={q1h:.6g}, Q1C={q1c:.6g}"
        )
    return q0h, q0c, q1h, q1c


def first_order_power(q0h, q0c, q1h, q1c, tau_h, tau_c):
    return (q0h + q1h / tau_h + q0c + q1c / tau_c) / (tau_h + tau_c)


def first_order_efficiency(q0h, q0c, q1h, q1c, tau_h, tau_c):
    return 1.0 + (q0c + q1c / tau_c) / (q0h + q1h / tau_h)


def eta_star_from_heats(q0h, q0c, q1h, q1c) -> float:
    """Efficiency at maximum power from the heat coefficients (closed form)."""
    eta_c = 1.0 + q0c / q0h
    return 1.0 / (2.0 / eta_c - 1.0 / (1.0 + math.sqrt(q1c / q1h)))


def eta_star_analytic(eta_C: float, alpha: float) -> float:
    """Efficiency at maximum power for a bath exponent ``alpha``.

    ``[2/eta_C - 1/(1 + (1 - eta_C)**((1 - alpha)/2))]**-1``; it reduces to
    ``1 - sqrt(1 - eta_C)`` for ``alpha = 0`` and to ``2 eta_C/(4 - eta_C)``
    for ``alpha = 1``.
    """
    if not 0.0 < eta_C < 1.0:
        raise ValueError("eta_C must lie in (0, 1)")
    ratio = 1.0 - eta_C
    # ratio**x overflows for extreme alpha; the limit of 1/(1 + ratio**x) is 0 or 1
    expo = 0.5 * (1.0 - alpha) * math.log(ratio)
    frac = 1.0 / (1.0 + math.exp(expo)) if expo < 700.0 else 0.0
    return 1.0 / (2.0 / eta_C - frac)


def optimize_power(q0h: float, q0c: float, q1h: float, q1c: float):
    """Maximize the first-order power over ``(tau_H, tau_C)``.

    A 64 x 64 log-spaced grid locates the basin; nested bounded Brent
    searches in ``log tau`` refine it to ``LOG_XTOL``.

    Returns
    -------
    tau_H, tau_C, P_max, eta_star
    """
    if not (q0h > 0.0 and q0c < 0.0 and q1h < 0.0 and q1c < 0.0):
        raise ValueError("need Q0H > 0 and Q0C, Q1H, Q1C < 0")
    if q0h + q0c <= 0.0:
        raise OptimizationError("no positive work regime: Q0H + Q0C <= 0")
    scale_h, scale_c = abs(q1h) / q0h, abs(q1c) / abs(q0c)
    lo, hi = math.log(TAU_BOX[0]), math.log(TAU_BOX[1])
    uh = np.linspace(lo, hi, GRID_POINTS) + math.log(scale_h)
    uc = np.linspace(lo, hi, GRID_POINTS) + math.log(scale_c)

    def power(u, v):
        return first_order_power(q0h, q0c, q1h, q1c, np.exp(u), np.exp(v))

    table = power(uh[:, None], uc[None, :])
    i, j = np.unravel_index(int(np.argmax(table)), table.shape)  # first hit: smallest tau_H
    last = GRID_POINTS - 1
    if i in (0, last) or j in (0, last):
        raise OptimizationError(
            f"power maximum on the search box: tau_H={math.exp(uh[i]):.3g}, "
            f"tau_C={math.exp(uc[j]):.3g}, P={table[i, j]:.3g}"
        )
    bh = (uh[max(i - 2, 0)], uh[min(i + 2, last)])
    bc = (uc[max(j - 2, 0)], uc[min(j + 2, last)])
    opts = {"xatol": LOG_XTOL, "maxiter": 500}

    def inner(u):
        res = minimize_scalar(lambda v: -power(u, v), bounds=bc, method="bounded",
                              options=opts)
        return res.x, -res.fun

    outer = minimize_scalar(lambda u: -inner(u)[1], bounds=bh, method="bounded",
                            options=opts)
    u_opt = outer.x
    v_opt, p_max = inner(u_opt)
    for val, (a, b), name in ((u_opt, bh, "tau_H"), (v_opt, bc, "tau_C")):
        if min(val - a, b - val) < 1e3 * LOG_XTOL:
            raise OptimizationError(f"refined {name} stuck at its bracket edge ({math.exp(val):.6g})")
    tau_h, tau_c = math.exp(u_opt), math.exp(v_opt)
    eta = first_order_efficiency(q0h, q0c, q1h, q1c, tau_h, tau_c)
    return tau_h, tau_c, float(p_max), float(eta)


def analyze(spec: CarnotSpec) -> CarnotResult:
    """First-order heats, optimal durations and efficiencies of one engine."""
    q = first_order_heats(spec)
    tau_h, tau_c, p_max, eta = optimize_power(*q)
    return CarnotResult(*q, tau_h, tau_c, p_max, eta,
                        eta_star_analytic(spec.eta_carnot, spec.alpha))


def simulate_exact_engine(spec: CarnotSpec, tau_H: float, tau_C: float,
                          tol: float = ENGINE_TOL, max_cycles: int = MAX_CYCLES,
                          rtol: float = CYCLE_RTOL) -> EngineResult:
    """Run the cycle with the exact propagator until the hot heat converges.

    The adiabatic strokes rescale the Hamiltonian instantaneously and leave
    the state untouched. Starts from the hot Gibbs state at ``t' = 0``.

    Raises
    ------
    ConvergenceError
        If ``Q_H`` still changes by more than ``rtol`` after ``max_cycles``.
    """
    if not (tau_H > 0.0 and tau_C > 0.0):
        raise ValueError("stroke durations must be positive")
    hot, cold = build_cycle(spec, tau_H, tau_C)
    rho = hot.steady_state(0.0)
    q_prev = None
    for cycle in range(1, max_cycles + 1):
        traj_h = exactprop.integrate(hot, rho, tol=tol)
        q_h = exactprop.exact_heat_work(traj_h, hot)[0]
        traj_c = exactprop.integrate(cold, traj_h.states[-1], tol=tol)
        q_c = exactprop.exact_heat_work(traj_c, cold)[0]
        rho = traj_c.states[-1]
        log.debug("cycle %d: QH=%.15g QC=%.15g", cycle, q_h, q_c)
        if q_prev is not None and abs(q_h - q_prev) < rtol * abs(q_h):
            w = -q_h - q_c
            return EngineResult(q_h, q_c, w, 1.0 + q_c / q_h, bool(w < 0.0), cycle)
        q_prev = q_h
    raise ConvergenceError(f"hot heat not converged after {max_cycles} cycles")


SWEEP_COLUMNS = ("ratio", "alpha", "eta_analytic", "eta_exact", "engine_flag",
                 "tauH_opt", "tauC_opt", "error")


def _sweep_cell(args) -> dict:
    template, ratio, alpha, exact = args
    row = dict.fromkeys(SWEEP_COLUMNS)
    row.update(ratio=float(ratio), alpha=float(alpha), error="")
    if ratio == 1.0:
        row.update(eta_analytic=0.0, engine_flag="degenerate")
        return row
    try:
        spec = replace(template, T_C=ratio * template.T_H, alpha=float(alpha))
        res = analyze(spec)
        row.update(eta_analytic=res.eta_star_analytic, tauH_opt=res.tau_H_opt,
                   tauC_opt=res.tau_C_opt, engine_flag="")
        if exact:
            eng = simulate_exact_engine(spec, res.tau_H_opt, res.tau_C_opt)
            row.update(eta_exact=eng.eta if eng.is_engine else None, engine_flag=eng.flag)
    except (ValueError, NumericalError) as exc:
        row.update(engine_flag="error", error=f"{type(exc).__name__}: {exc}")
    return row


def sweep(spec_template: CarnotSpec, ratios, alphas, jobs: int | None = None,
          exact: bool = True) -> list[dict]:
    """Efficiencies over a grid of temperature ratios and bath exponents.

    Rows are ordered by ratio, then alpha. Failures are recorded in the
    row's ``error`` field and do not stop the sweep. Values that do not exist
    for a cell (e.g. ``eta_exact`` when no work is produced) are ``None``.
    """
    ratios, alphas = list(ratios), list(alphas)
    if not ratios or not alphas:
        raise ValueError("ratios and alphas must be non-empty")
    cells = [(spec_template, float(r), float(a), exact) for r in ratios for a in alphas]
    jobs = (os.cpu_count() or 1) if jobs is None else int(jobs)
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    if jobs == 1 or len(cells) == 1:
        return [_sweep_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=min(jobs, len(cells))) as pool:
        return list(pool.map(_sweep_cell, cells))
