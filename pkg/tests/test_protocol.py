from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_hermitian
from oracles import driven_qubit_steady_vector
from slowtherm.exceptions import DegenerateKernelError
from slowtherm.protocol import (
    SHAPES,
    bloch_z,
    cosine_ramp_protocol,
    driven_qubit_protocol,
    from_scalar_functions,
    qubit_isotherm_protocol,
    reverse,
    scaled_thermal_protocol,
    shaped_isotherm,
    steady_state_derivative,
)
from slowtherm.superop import SIGMA_X, SIGMA_Z, BathSpec, thermal_liouvillian, vectorize

GRID = np.linspace(0.0, 1.0, 41)


def test_driven_protocol_midpoint_is_block_form():
    bath = BathSpec(beta=1.0)
    p = driven_qubit_protocol(1.0, 1.0, bath)
    np.testing.assert_allclose(p.liouvillian(0.5),
                               thermal_liouvillian(0.5 * SIGMA_Z, SIGMA_X, bath), atol=1e-15)


@pytest.mark.parametrize("t_prime", [0.0, 0.3, 1.0])
def test_driven_protocol_steady_state(t_prime):
    p = driven_qubit_protocol(1.0, 1.0, BathSpec(beta=1.0))
    n = 1 / np.expm1(1.0)
    expected = driven_qubit_steady_vector(n, np.cos(np.pi * t_prime))
    np.testing.assert_allclose(vectorize(p.steady_state(t_prime)), expected, atol=1e-12)


def test_driven_protocol_hamiltonian_derivative():
    p = driven_qubit_protocol(1.3, 0.7, BathSpec(beta=1.0))
    t = np.array([0.1, 0.5, 0.9])
    fd = (p.hamiltonian(t + 1e-6) - p.hamiltonian(t - 1e-6)) / 2e-6
    np.testing.assert_allclose(p.hamiltonian_derivative(t), fd, atol=1e-8)


def test_constant_isotherm_has_static_liouvillian():
    p = cosine_ramp_protocol(1.5, 1.5, BathSpec(beta=1.0, alpha=1.0))
    sups = p.liouvillian(GRID)
    np.testing.assert_allclose(sups, np.broadcast_to(sups[0], sups.shape), atol=0)
    np.testing.assert_allclose(p.steady_state_derivative(GRID), 0, atol=1e-15)


def test_cosine_shape_endpoints_are_flat():
    f, fdot = SHAPES["cosine"]
    np.testing.assert_allclose(fdot(np.array([0.0, 1.0])), 0, atol=1e-15)
    p = shaped_isotherm("cosine", 1.0, BathSpec(beta=2.0))
    zdot = p.steady_state_derivative(np.array([0.0, 1.0]))
    np.testing.assert_allclose(zdot, 0, atol=1e-12)


def test_bloch_z_of_gibbs_state():
    # beta*omega = 2 at t' = 0 for the cosine shape with omega0 = 1, beta = 1
    p = shaped_isotherm("cosine", 1.0, BathSpec(beta=1.0))
    assert bloch_z(p, 0.0) == pytest.approx(-np.tanh(1.0), abs=1e-12)
    assert bloch_z(p, 0.0) == pytest.approx(-0.7616, abs=1e-4)


def test_negative_frequency_rejected():
    with pytest.raises(ValueError):
        qubit_isotherm_protocol(lambda t: 0.5 - t, BathSpec(beta=1.0))
    with pytest.raises(ValueError):
        cosine_ramp_protocol(-1.0, 1.0, BathSpec(beta=1.0))
    with pytest.raises(ValueError):
        shaped_isotherm("triangle", 1.0, BathSpec(beta=1.0))


def test_frequency_clamp():
    p = shaped_isotherm("cosine", 1.0, BathSpec(beta=1.0))
    h_end = p.hamiltonian(1.0)
    assert h_end[0, 0].real == pytest.approx(0.5e-6, rel=1e-9)
    assert p.params["omega_min"] == pytest.approx(1e-6)


def test_reverse_is_involution():
    p = driven_qubit_protocol(1.0, 1.0, BathSpec(beta=1.0))
    rr = reverse(reverse(p))
    assert rr.name == p.name
    for fn in ("liouvillian", "hamiltonian", "steady_state", "hamiltonian_derivative"):
        np.testing.assert_allclose(getattr(rr, fn)(GRID), getattr(p, fn)(GRID), atol=0)


def test_reverse_of_cosine_shape():
    bath = BathSpec(beta=2.0, alpha=1.0)
    p = shaped_isotherm("cosine", 1.0, bath)
    q = shaped_isotherm("cosine", 1.0, bath, reversed_=True)
    r = reverse(p)
    for fn in ("liouvillian", "hamiltonian", "steady_state", "steady_state_derivative",
               "hamiltonian_derivative"):
        np.testing.assert_allclose(getattr(r, fn)(GRID), getattr(q, fn)(GRID), atol=1e-14)


@pytest.mark.parametrize("shape", sorted(SHAPES))
def test_steady_state_derivative_fd_matches_chain_rule(shape):
    beta = 1.7
    p = shaped_isotherm(shape, 1.0, BathSpec(beta=beta, alpha=1.0))
    f, fdot = SHAPES[shape]
    t = np.linspace(0.0, 1.0, 23)
    w = np.sqrt(f(t) ** 2 + 1e-12)
    zdot = -0.5 * beta * fdot(t) * f(t) / w / np.cosh(0.5 * beta * w) ** 2
    analytic = 0.5 * zdot[:, None, None] * SIGMA_Z
    # stay clear of the clamp where the frequency touches zero
    sel = w > 1e-2
    fd = steady_state_derivative(p, t[sel], 1, method="fd")
    np.testing.assert_allclose(fd, analytic[sel], atol=1e-8)
    np.testing.assert_allclose(p.steady_state_derivative(t, method="analytic"), analytic,
                               atol=1e-12)


def test_derivative_method_validation():
    p = driven_qubit_protocol(1.0, 1.0, BathSpec(beta=1.0))
    with pytest.raises(ValueError):
        p.steady_state_derivative(0.5, method="analytic")
    with pytest.raises(ValueError):
        p.steady_state_derivative(0.5, order=0)


@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 4), order=st.integers(1, 2))
def test_derivative_traceless_and_hermitian(seed, d, order):
    rng = np.random.default_rng(seed)
    h, a = random_hermitian(rng, d), random_hermitian(rng, d)
    p = scaled_thermal_protocol(h, a, BathSpec(beta=0.7, alpha=1.0),
                                lambda t: 1.0 + 0.4 * np.sin(2.0 * t))
    t = rng.uniform(0.0, 1.0, size=4)
    y = p.steady_state_derivative(t, order, method="fd")
    np.testing.assert_allclose(np.trace(y, axis1=1, axis2=2), 0, atol=1e-12)
    np.testing.assert_allclose(y, np.conj(np.swapaxes(y, 1, 2)), atol=1e-12)


def test_scaled_thermal_analytic_derivative(rng):
    h, a = random_hermitian(rng, 3), random_hermitian(rng, 3)
    p = scaled_thermal_protocol(h, a, BathSpec(beta=0.9, alpha=2.0),
                                lambda t: 1.0 + 0.5 * t * t, lambda t: t)
    t = np.linspace(0.05, 0.95, 7)
    np.testing.assert_allclose(p.steady_state_derivative(t, method="analytic"),
                               p.steady_state_derivative(t, method="fd"), atol=1e-9)


@pytest.mark.parametrize("make", [
    lambda: driven_qubit_protocol(1.0, 1.0, BathSpec(beta=1.0)),
    lambda: cosine_ramp_protocol(1.0, 3.0, BathSpec(beta=1.0, alpha=1.0)),
    lambda: shaped_isotherm("cosine", 1.0, BathSpec(beta=2.0, alpha=0.0)),
    lambda: shaped_isotherm("cosine", 1.0, BathSpec(beta=2.0, alpha=2.0)),
])
def test_shipped_protocols_are_relaxing(make):
    assert make().check_relaxing(50) > 1e-8


def test_non_relaxing_protocol_detected():
    zero = np.zeros((4, 4), dtype=complex)
    p = from_scalar_functions(2, lambda t: zero, lambda t: np.eye(2))
    with pytest.raises(DegenerateKernelError):
        p.check_relaxing()


def test_protocol_rejects_bad_tau():
    p = driven_qubit_protocol(1.0, 1.0, BathSpec(beta=1.0))
    with pytest.raises(ValueError):
        p.with_tau(-1.0)
    assert p.with_tau(3.0).tau == 3.0
