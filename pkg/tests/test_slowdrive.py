from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_hermitian
from oracles import (
    QubitIsotherm,
    cosine_ramp_expr,
    driven_qubit_projected_inverse,
    driven_qubit_series,
    driven_qubit_steady_vector,
)
from slowtherm.exceptions import DegenerateKernelError, TracelessKernelError
from slowtherm.protocol import cosine_ramp_protocol, driven_qubit_protocol, scaled_thermal_protocol
from slowtherm.slowdrive import (
    PerturbativeState,
    PositivityWarning,
    perturbation_series,
    perturbation_terms,
    projected_inverse_apply,
    projected_inverse_matrix,
    recursion_residual,
    slow_solution,
    steady_state,
    traceless_projector,
)
from slowtherm.superop import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    BathSpec,
    gibbs_state,
    thermal_liouvillian,
    trace_row,
    vectorize,
)

N1 = 1 / np.expm1(1.0)


def qubit_thermal(omega, bath):
    return thermal_liouvillian(0.5 * omega * SIGMA_Z, SIGMA_X, bath)


def ramp(alpha=1.0, beta=1.0):
    return cosine_ramp_protocol(1.0, 3.0, BathSpec(beta=beta, alpha=alpha))


# -- steady state ------------------------------------------------------------------------

@pytest.mark.parametrize("t_prime", np.linspace(0.0, 1.0, 11))
def test_driven_steady_state_closed_form(t_prime):
    sup = driven_qubit_protocol(1.0, 1.0, BathSpec(beta=1.0)).liouvillian(t_prime)
    rho = steady_state(sup)
    np.testing.assert_allclose(vectorize(rho), driven_qubit_steady_vector(N1, np.cos(np.pi * t_prime)),
                               atol=1e-12)


def test_undriven_steady_state_is_gibbs():
    rho = steady_state(qubit_thermal(1.0, BathSpec(beta=1.0)))
    np.testing.assert_allclose(rho, gibbs_state(0.5 * SIGMA_Z, 1.0), atol=1e-14)
    assert (rho[0, 0] - rho[1, 1]).real == pytest.approx(-np.tanh(0.5), abs=1e-14)


@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 4), beta=st.floats(0.2, 3.0))
def test_thermal_steady_state_is_gibbs(seed, d, beta):
    rng = np.random.default_rng(seed)
    h, a = random_hermitian(rng, d), random_hermitian(rng, d)
    rho = steady_state(thermal_liouvillian(h, a, BathSpec(beta=beta, alpha=1.0)))
    np.testing.assert_allclose(rho, gibbs_state(h, beta), atol=1e-9)


def test_steady_state_batched():
    sups = driven_qubit_protocol(1.0, 1.0, BathSpec(beta=1.0)).liouvillian(np.linspace(0, 1, 5))
    rhos = steady_state(sups)
    assert rhos.shape == (5, 2, 2)
    np.testing.assert_allclose(np.trace(rhos, axis1=1, axis2=2), 1.0, atol=1e-14)


def test_zero_liouvillian_is_degenerate():
    with pytest.raises(DegenerateKernelError):
        steady_state(np.zeros((4, 4)))
    with pytest.raises(DegenerateKernelError):
        steady_state(np.zeros((4, 4)), check=False)


def test_traceless_kernel_detected():
    v = vectorize(SIGMA_Z)
    sup = -(np.eye(4) - np.outer(v, v.conj()) / np.vdot(v, v))
    with pytest.raises(TracelessKernelError):
        steady_state(sup)
    with pytest.raises(TracelessKernelError):
        steady_state(sup, check=False)


def test_bad_shape_rejected():
    with pytest.raises(ValueError):
        steady_state(np.zeros((3, 3)))


# -- projected inverse -------------------------------------------------------------------

def test_traceless_projector():
    p = traceless_projector(2)
    np.testing.assert_allclose(p @ vectorize(np.eye(2)), 0, atol=1e-15)
    np.testing.assert_allclose(p @ vectorize(SIGMA_Z), vectorize(SIGMA_Z), atol=1e-15)
    np.testing.assert_allclose(p @ vectorize(np.diag([1.0, 0.0])), vectorize(SIGMA_Z / 2),
                               atol=1e-15)
    for d in (2, 3, 4):
        q = traceless_projector(d)
        np.testing.assert_allclose(q @ q, q, atol=1e-14)
        np.testing.assert_allclose(trace_row(d) @ q, 0, atol=1e-14)
    with pytest.raises(ValueError):
        traceless_projector(1)


@pytest.mark.parametrize("t_prime", np.linspace(0.0, 1.0, 11))
def test_driven_projected_inverse_closed_form(t_prime):
    sup = driven_qubit_protocol(1.0, 1.0, BathSpec(beta=1.0)).liouvillian(t_prime)
    expected = driven_qubit_projected_inverse(N1, 1.0, np.cos(np.pi * t_prime))
    np.testing.assert_allclose(projected_inverse_matrix(sup), expected, atol=1e-12)


def test_projected_inverse_on_sigma_z():
    beta, omega, g0, alpha = 0.8, 1.4, 0.6, 1.0
    sup = qubit_thermal(omega, BathSpec(beta=beta, gamma0=g0, alpha=alpha))
    z = -np.tanh(0.5 * beta * omega)
    gamma = g0 * omega**alpha
    np.testing.assert_allclose(projected_inverse_apply(sup, SIGMA_Z), z / gamma * SIGMA_Z,
                               atol=1e-14)
    np.testing.assert_allclose(projected_inverse_apply(sup, np.zeros((2, 2))), 0, atol=0)
    with pytest.raises(ValueError):
        projected_inverse_apply(sup, np.eye(2))


@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 4))
def test_projected_inverse_solves_and_is_traceless(seed, d):
    rng = np.random.default_rng(seed)
    sup = thermal_liouvillian(random_hermitian(rng, d), random_hermitian(rng, d),
                              BathSpec(beta=1.0, alpha=1.0))
    y = random_hermitian(rng, d)
    y -= np.trace(y) / d * np.eye(d)
    x = projected_inverse_apply(sup, y)
    assert abs(np.trace(x)) < 1e-12
    np.testing.assert_allclose((sup @ vectorize(x)), vectorize(y), atol=1e-10)
    m = projected_inverse_matrix(sup)
    np.testing.assert_allclose(m @ vectorize(y), vectorize(x), atol=1e-10)
    np.testing.assert_allclose(trace_row(d) @ m, 0, atol=1e-10)


# -- perturbation series -----------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.0, 1.0, 2.0])
def test_first_and_second_order_match_symbolic(alpha):
    p = ramp(alpha)
    oracle = QubitIsotherm(cosine_ramp_expr(1, 3), beta=1.0, alpha=alpha,
                           omega_min=p.params["omega_min"])
    ts = np.linspace(0.0, 1.0, 21)
    series = perturbation_series(p, ts, 2)
    for j in (1, 2):
        expected = 0.5 * oracle.bloch_term(j)(ts)[:, None, None] * SIGMA_Z
        np.testing.assert_allclose(series[j], expected, atol=1e-8)


def test_driven_terms_match_closed_form():
    p = driven_qubit_protocol(1.0, 1.0, BathSpec(beta=1.0))
    ts = np.linspace(0.0, 1.0, 21)
    series = perturbation_series(p, ts, 2)
    for j, fn in enumerate(driven_qubit_series(N1, 1.0, 1.0)):
        expected = np.array([np.asarray(fn(t), dtype=complex) for t in ts])
        np.testing.assert_allclose(series[j].reshape(len(ts), 4), expected, atol=1e-8)


def test_zeroth_order_is_steady_state():
    p = ramp()
    ts = np.linspace(0, 1, 9)
    np.testing.assert_allclose(perturbation_series(p, ts, 0)[0], p.steady_state(ts), atol=0)
    rho = slow_solution(p, 0.4, order=0, tau=7.0)
    np.testing.assert_allclose(rho, p.steady_state(0.4), atol=1e-15)


def test_isotherm_never_generates_coherence():
    series = perturbation_series(ramp(), np.linspace(0, 1, 11), 4)
    for op in (SIGMA_X, SIGMA_Y):
        comp = np.einsum("ij,...ji->...", op, series)
        np.testing.assert_allclose(comp, 0, atol=1e-12)


def test_driven_terms_are_traceless_hermitian():
    series = perturbation_series(driven_qubit_protocol(1.0, 1.0, BathSpec(beta=1.0)),
                                 np.linspace(0, 1, 11), 3)
    np.testing.assert_allclose(np.trace(series[1:], axis1=-2, axis2=-1), 0, atol=1e-12)
    np.testing.assert_allclose(series, np.conj(np.swapaxes(series, -1, -2)), atol=1e-14)


@pytest.mark.parametrize("j", [0, 1, 2])
def test_recursion_residual(j):
    p = driven_qubit_protocol(1.0, 1.0, BathSpec(beta=1.0))
    assert recursion_residual(p, np.linspace(0, 1, 21), j).max() <= 1e-8


def test_positivity_warning():
    p = ramp(alpha=0.0)
    with pytest.warns(PositivityWarning):
        slow_solution(p, np.linspace(0, 1, 11), order=2, tau=0.05)


def test_slow_solution_requires_tau():
    with pytest.raises(ValueError):
        slow_solution(ramp(), 0.5)
    with pytest.raises(ValueError):
        slow_solution(ramp(), 0.5, tau=-1.0)
    with pytest.raises(ValueError):
        perturbation_series(ramp(), [1.5])
    with pytest.raises(ValueError):
        perturbation_series(ramp(), [0.5], -1)


def test_perturbative_state():
    p = driven_qubit_protocol(1.0, 1.0, BathSpec(beta=1.0))
    state = perturbation_terms(p, 0.3, 3)
    assert isinstance(state, PerturbativeState)
    assert state.order == 3 and state.t_prime == 0.3
    np.testing.assert_allclose(state.total(20.0), slow_solution(p, 0.3, 3, tau=20.0), atol=1e-14)
    np.testing.assert_allclose(np.trace(state.total(20.0)), 1.0, atol=1e-13)


@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 3), tau=st.floats(5.0, 1e4))
def test_slow_solution_unit_trace_hermitian(seed, d, tau):
    rng = np.random.default_rng(seed)
    p = scaled_thermal_protocol(random_hermitian(rng, d), random_hermitian(rng, d),
                                BathSpec(beta=0.6, alpha=1.0),
                                lambda t: 1.0 + 0.3 * t, lambda t: 0.3 + 0 * t)
    rho = slow_solution(p, np.array([0.2, 0.7]), order=2, tau=tau)
    np.testing.assert_allclose(np.trace(rho, axis1=1, axis2=2), 1.0, atol=1e-12)
    np.testing.assert_allclose(rho, np.conj(np.swapaxes(rho, 1, 2)), atol=1e-14)
