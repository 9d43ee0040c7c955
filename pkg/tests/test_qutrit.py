"""
Tests for the core qutrit linear algebra
"""
import math

import numpy as np
import pytest

from src.modules.gates import b_pulse, beam_splitter
from src.modules.open_system import ThermalSpec, thermal_state
from src.qutrit import (
    DensityMatrix3,
    Operator3,
    PureState3,
    apply,
    clamp_probabilities,
    conjugate_by,
    matmul,
)
from utils.errors import NumericalError, ValidationError


def _random_unitary(rng: np.random.Generator) -> Operator3:
    z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    q, r = np.linalg.qr(z)
    return Operator3(q * (np.diag(r) / np.abs(np.diag(r))))


def test_identity_products():
    """I·I is I and U·U† is I"""
    eye = Operator3.identity()
    assert matmul(eye, eye).allclose(eye)

    u = _random_unitary(np.random.default_rng(7))
    assert (u @ u.dagger).allclose(eye)
    assert u.is_unitary()


def test_beam_splitter_group_property():
    """S(pi/2)·S(pi/2) = S(pi)"""
    assert matmul(beam_splitter(math.pi / 2), beam_splitter(math.pi / 2)).allclose(beam_splitter(math.pi))


def test_matmul_associative():
    """Associativity on random unitary triples"""
    rng = np.random.default_rng(11)
    for _ in range(20):
        a, b, c = (_random_unitary(rng) for _ in range(3))
        left = ((a @ b) @ c).elements
        right = (a @ (b @ c)).elements
        assert np.max(np.abs(left - right)) <= 1e-10


def test_apply_examples():
    """Direct evaluations of S and the single-step chain"""
    ground = PureState3.basis(0)
    assert np.allclose(apply(Operator3.identity(), ground).amplitudes, [1, 0, 0])

    half = apply(beam_splitter(math.pi / 2), ground)
    assert np.allclose(half.amplitudes, [1 / math.sqrt(2), 1 / math.sqrt(2), 0])

    psi = apply(beam_splitter(math.pi / 2), apply(b_pulse(math.pi, math.pi / 2), half))
    np.testing.assert_allclose(psi.probabilities(), [0.25, 0.25, 0.5], atol=1e-12)


def test_apply_preserves_norm():
    """Unitaries keep random kets normalized"""
    rng = np.random.default_rng(3)
    for _ in range(20):
        v = rng.normal(size=3) + 1j * rng.normal(size=3)
        psi = PureState3(v / np.linalg.norm(v))
        out = apply(_random_unitary(rng), psi)
        assert out.normalized
        assert out.norm_squared() == pytest.approx(1.0, abs=1e-12)


def test_apply_projector_gives_conditional_state():
    """A projector yields a sub-normalized conditional ket"""
    psi = PureState3(np.array([1, 1, 1]) / math.sqrt(3))
    out = apply(Operator3(np.diag([1.0, 1.0, 0.0])), psi)
    assert not out.normalized
    assert out.norm_squared() == pytest.approx(2 / 3)


def test_conjugate_by_examples():
    """Identity, beam splitter and purity invariance"""
    rho = DensityMatrix3.ground()
    assert np.allclose(conjugate_by(Operator3.identity(), rho).elements, rho.elements)

    out = conjugate_by(beam_splitter(math.pi / 2), rho)
    np.testing.assert_allclose(out.probabilities(), [0.5, 0.5, 0.0], atol=1e-12)

    cold = thermal_state(ThermalSpec(temperature_mk=0.0))
    rotated = conjugate_by(_random_unitary(np.random.default_rng(5)), cold)
    assert rotated.purity() == pytest.approx(1.0, abs=1e-10)


def test_conjugate_by_preserves_density_properties():
    """Trace, Hermiticity and positivity survive conjugation of mixed states"""
    rng = np.random.default_rng(19)
    for _ in range(20):
        pops = rng.dirichlet(np.ones(3))
        out = conjugate_by(_random_unitary(rng), DensityMatrix3.diagonal(pops))
        assert out.trace() == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(out.elements, out.elements.conj().T, atol=1e-12)
        assert np.min(out.eigenvalues()) >= -1e-10


def test_operator_shape_and_finiteness():
    """Wrong shape is a validation error, NaN a numerical one"""
    with pytest.raises(ValidationError):
        Operator3(np.eye(2))
    with pytest.raises(NumericalError):
        Operator3(np.full((3, 3), np.nan))


def test_pure_state_validation():
    """Normalization is enforced unless the ket is conditional"""
    with pytest.raises(NumericalError):
        PureState3(np.array([1.0, 1.0, 0.0]))
    assert PureState3(np.array([0.5, 0.0, 0.0]), normalized=False).norm_squared() == pytest.approx(0.25)
    with pytest.raises(NumericalError):
        PureState3(np.array([2.0, 0.0, 0.0]), normalized=False)
    with pytest.raises(ValidationError):
        PureState3.basis(3)


def test_density_matrix_validation():
    """Hermiticity, trace and positivity checks"""
    with pytest.raises(NumericalError):
        DensityMatrix3(np.array([[1.0, 0.5, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    with pytest.raises(NumericalError):
        DensityMatrix3(np.diag([0.5, 0.2, 0.1]))
    with pytest.raises(NumericalError):
        DensityMatrix3(np.diag([1.2, -0.2, 0.0]))
    conditional = DensityMatrix3(np.diag([0.5, 0.2, 0.0]), conditional=True)
    assert conditional.trace() == pytest.approx(0.7)


def test_clamp_probabilities():
    """Round-off is clipped, real excursions raise"""
    out = clamp_probabilities([-1e-17, 0.5, 1.0 + 1e-14])
    assert out[0] == 0.0 and out[2] == 1.0
    with pytest.raises(NumericalError):
        clamp_probabilities([-1e-6, 1.0])
    with pytest.raises(NumericalError):
        clamp_probabilities([np.inf])
