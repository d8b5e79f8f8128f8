"""Slow-driving perturbation theory for Markovian master equations.

Submodules
----------
superop    operator/superoperator algebra and thermal Liouvillians
protocol   driving schedules in rescaled time
slowdrive  steady states, projected inverse and the 1/tau expansion
exactprop  adaptive propagator for the time-dependent master equation
thermo     heat, work and energy coefficients of the expansion
carnot     finite-time Carnot engine and efficiency at maximum power
cli        command-line front end
"""
from __future__ import annotations

from .carnot import (
    CarnotResult,
    CarnotSpec,
    EngineResult,
    analyze,
    build_cycle,
    eta_star_analytic,
    first_order_heats,
    optimize_power,
    simulate_exact_engine,
    sweep,
)
from .exactprop import Trajectory, exact_heat_work, integrate
from .exceptions import (
    ConvergenceError,
    DegenerateKernelError,
    InvariantError,
    NumericalError,
    OptimizationError,
    QuadratureError,
    StepUnderflowError,
    TracelessKernelError,
)
from .protocol import (
    Protocol,
    cosine_ramp_protocol,
    driven_qubit_protocol,
    qubit_isotherm_protocol,
    reverse,
    scaled_thermal_protocol,
    shaped_isotherm,
    steady_state_derivative,
)
from .slowdrive import (
    PerturbativeState,
    perturbation_series,
    perturbation_terms,
    projected_inverse_apply,
    projected_inverse_matrix,
    slow_solution,
    steady_state,
)
from .superop import (
    BathSpec,
    dissipator_super,
    eigenoperator_decomposition,
    gibbs_state,
    hamiltonian_super,
    thermal_liouvillian,
)
from .thermo import (
    ThermoExpansion,
    equilibrium_quantities,
    expand,
    first_order_entropy,
    heat_coefficient,
    work_coefficient,
)

__version__ = "0.1.0"
