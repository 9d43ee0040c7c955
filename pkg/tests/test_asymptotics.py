"""
Tests for the Asymptotics module
"""
import math

import numpy as np
import pytest

from src.modules import asymptotics
from src.modules.gates import SequenceConfig, b_pulse, beam_splitter, optimal_phi
from src.modules.protocol import final_probabilities_batch, run_coherent, run_projective
from utils.errors import DomainError, ValidationError


def test_coefficients_at_five_slots():
    """theta = pi, N = 5 for both variants"""
    trig = asymptotics.approx_coefficients(5, math.pi, "trigonometric")
    assert (trig.c0, trig.c1, trig.c2) == pytest.approx((0.933, 0.254, 0.254), abs=1e-3)
    expanded = asymptotics.approx_coefficients(5, math.pi, "expanded")
    assert (expanded.c0, expanded.c1, expanded.c2) == pytest.approx((0.931, 0.262, 0.262), abs=1e-3)
    assert trig.in_validated_regime


def test_coefficients_at_twenty_five_slots():
    """theta = pi, N = 25 for both variants"""
    trig = asymptotics.approx_coefficients(25, math.pi, "trigonometric")
    assert (trig.c0, trig.c1, trig.c2) == pytest.approx((0.996, 0.0603, 0.0603), abs=1e-3)
    expanded = asymptotics.approx_coefficients(25, math.pi, "expanded")
    assert (expanded.c0, expanded.c1, expanded.c2) == pytest.approx((0.996, 0.0604, 0.0604), abs=1e-3)


def test_coefficient_arrays_match_scalar():
    """Vectorized amplitudes equal the per-theta ones"""
    thetas = np.linspace(1.0, 3.0, 5)
    stack = asymptotics.coefficient_arrays(12, thetas)
    assert stack.shape == (5, 3)
    c = asymptotics.approx_coefficients(12, thetas[2])
    np.testing.assert_allclose(stack[2], [c.c0, c.c1, c.c2])


def test_below_plateau_is_flagged():
    """Pulse areas under 4*phi_N are outside the validated regime"""
    c = asymptotics.approx_coefficients(25, 2 * optimal_phi(25))
    assert not c.in_validated_regime


def test_invalid_variant():
    with pytest.raises(ValidationError):
        asymptotics.approx_coefficients(5, math.pi, "textbook")


@pytest.mark.parametrize("n", [25, 50, 100])
def test_approximation_tracks_exact_success(n):
    """|p0_exact - c0^2| stays small across the upper half of the plateau"""
    thetas = np.linspace(math.pi / 2, math.pi, 25)
    exact = final_probabilities_batch("coherent", optimal_phi(n), np.repeat(thetas[:, None], n, axis=1), math.pi / 2)
    approx = asymptotics.coefficient_arrays(n, thetas)[:, 0] ** 2
    assert np.max(np.abs(exact[:, -1, 0] - approx)) <= 5e-3


def test_success_plateau_shape():
    """p0 >= 0.85 across [4 phi_N, 4 N phi_N] and vanishes at 4(N+1) phi_N"""
    n = 25
    phi = optimal_phi(n)
    lo, hi = asymptotics.plateau_bounds(n)
    thetas = np.linspace(lo, hi, 301)
    exact = final_probabilities_batch("coherent", phi, np.repeat(thetas[:, None], n, axis=1), math.pi / 2)
    assert np.min(exact[:, -1, 0]) >= 0.85

    edge = run_coherent(SequenceConfig.uniform(n, 4 * (n + 1) * phi))
    assert edge.final[0] < 0.01


def test_plateau_bounds():
    """[4 phi_N, 4 N phi_N], a single point for N = 1"""
    lo, hi = asymptotics.plateau_bounds(1)
    assert lo == pytest.approx(2 * math.pi) and hi == pytest.approx(2 * math.pi)
    lo, hi = asymptotics.plateau_bounds(25)
    assert hi / lo == pytest.approx(25)
    with pytest.raises(DomainError):
        asymptotics.plateau_bounds(0)


def test_efficiency_at_pi_reduction():
    """The general formula reduces to the sqrt(2) form at theta = pi"""
    for n in range(5, 13):
        assert asymptotics.approx_efficiency(n, math.pi) == pytest.approx(
            asymptotics.approx_efficiency_at_pi(n), abs=1e-12
        )


def test_spectral_fixed_vector_is_exact():
    """Column 1 of M is an eigenvector of S·B with eigenvalue 1"""
    n, theta = 8, 2.1
    approx = asymptotics.spectral_approx(n, theta)
    sb = (beam_splitter(optimal_phi(n)) @ b_pulse(theta, math.pi / 2)).elements
    np.testing.assert_allclose(sb @ approx.m[:, 0], approx.m[:, 0], atol=1e-12)
    np.testing.assert_allclose(np.abs(approx.eigenvalues), 1.0)


def test_spectral_power_identity():
    """power(0) is the identity"""
    approx = asymptotics.spectral_approx(10, math.pi, "expanded")
    np.testing.assert_allclose(approx.power(0).elements, np.eye(3), atol=1e-12)


def test_spectral_approx_undefined_at_zero():
    with pytest.raises(DomainError):
        asymptotics.spectral_approx(10, 0.0)


def test_asymptotic_unitary():
    """Block rotation by the total area N*theta"""
    assert asymptotics.asymptotic_unitary(4, 0.5).allclose(b_pulse(2.0, math.pi / 2))


@pytest.mark.parametrize("kind", ["coherent", "projective"])
def test_recursions_match_matrix_products(kind):
    """|c_j|^2 from the recursions equals the per-step protocol records"""
    rng = np.random.default_rng(23)
    n = 6
    cfg = SequenceConfig.from_arrays(
        optimal_phi(n), rng.uniform(0, 2 * math.pi, n), rng.uniform(0, 2 * math.pi, n)
    )
    chain = asymptotics.recursion_chain(cfg, kind)
    assert len(chain) == n + 1
    assert chain[0] == (1, 0, 0)

    if kind == "coherent":
        records = run_coherent(cfg).per_step
        for j in range(1, n + 1):
            np.testing.assert_allclose(np.abs(chain[j]) ** 2, records[j - 1], atol=1e-12)
    else:
        records = run_projective(cfg).per_step
        for j in range(1, n + 1):
            assert abs(chain[j][0]) ** 2 == pytest.approx(records[j - 1, 0], abs=1e-12)


@pytest.mark.slow
def test_recursions_over_random_configurations():
    """The recursions reproduce both protocols on 100 random sequences with empty slots"""
    rng = np.random.default_rng(101)
    for _ in range(100):
        n = int(rng.integers(1, 16))
        cfg = SequenceConfig.from_arrays(
            rng.uniform(0.05, math.pi),
            rng.uniform(0, 4 * math.pi, n),
            rng.uniform(0, 2 * math.pi, n),
            occupied=rng.random(n) < 0.7,
        )
        coherent = np.abs(np.array(asymptotics.recursion_chain(cfg, "coherent")[1:])) ** 2
        np.testing.assert_allclose(coherent, run_coherent(cfg).per_step, atol=1e-12)

        projective = np.abs(np.array(asymptotics.recursion_chain(cfg, "projective")[1:])) ** 2
        records = run_projective(cfg).per_step
        np.testing.assert_allclose(projective[:, 0], records[:, 0], atol=1e-12)
        np.testing.assert_allclose(1.0 - projective[:, 0] - projective[:, 1], records[:, 1], atol=1e-12)


def test_spectral_power_composes():
    """power(k) is the k-th matrix power of power(1) and inverse() inverts M"""
    approx = asymptotics.spectral_approx(12, 2.3)
    np.testing.assert_allclose(approx.m @ approx.inverse(), np.eye(3), atol=1e-12)
    one = approx.power(1).elements
    for k in (2, 5, 13):
        np.testing.assert_allclose(approx.power(k).elements, np.linalg.matrix_power(one, k), atol=1e-10)


@pytest.mark.parametrize("n,theta", [(25, math.pi), (50, math.pi), (25, 2.0), (100, 1.5)])
def test_spectral_propagator_tracks_exact_final(n, theta):
    """|first column of (S·B)^{N+1}|^2 from the approximation matches the exact final record"""
    column = asymptotics.spectral_approx(n, theta).propagator().elements[:, 0]
    exact = final_probabilities_batch("coherent", optimal_phi(n), np.full((1, n), theta), math.pi / 2)[0, -1]
    np.testing.assert_allclose(np.abs(column) ** 2, exact, atol=1e-3)


def test_recursions_reject_detuning():
    cfg = SequenceConfig.uniform(3, math.pi, chi=0.5)
    with pytest.raises(ValidationError):
        asymptotics.recursion_chain(cfg)
