"""
Tests for the Gates module
"""
import math

import numpy as np
import pytest
from scipy.linalg import expm

from src.modules import gates
from src.modules.gates import PulseSlot, SequenceConfig
from src.qutrit import Operator3
from utils.errors import ValidationError


def test_optimal_phi():
    """phi_N = pi/(N+1)"""
    assert gates.optimal_phi(1) == pytest.approx(math.pi / 2)
    assert gates.optimal_phi(25) == pytest.approx(math.pi / 26)
    with pytest.raises(ValidationError):
        gates.optimal_phi(0)


def test_beam_splitter_examples():
    """Identity at zero, half rotation at pi/2, full transfer after N+1 splitters"""
    assert gates.beam_splitter(0.0).allclose(Operator3.identity())

    half = gates.beam_splitter(math.pi / 2).elements
    assert half[0, 0] == pytest.approx(1 / math.sqrt(2))
    assert half[1, 1] == pytest.approx(1 / math.sqrt(2))

    chain = np.linalg.matrix_power(gates.beam_splitter(gates.optimal_phi(3)).elements, 4)
    np.testing.assert_allclose(chain @ [1, 0, 0], [0, 1, 0], atol=1e-14)


def test_b_pulse_examples():
    """theta = 0, 2 pi and pi at phase pi/2"""
    assert gates.b_pulse(0.0, 1.3).allclose(Operator3.identity())
    for phase in (0.0, 0.7, math.pi / 2, 2.5):
        assert gates.b_pulse(2 * math.pi, phase).allclose(Operator3(np.diag([1.0, -1.0, -1.0])))

    block = gates.b_pulse(math.pi, math.pi / 2).elements[1:, 1:]
    np.testing.assert_allclose(block, [[0, -1], [1, 0]], atol=1e-15)


def test_gates_are_unitary_on_grid():
    """Every gate is unitary and B leaves |0> alone"""
    for theta in np.linspace(0.0, 4 * math.pi, 9):
        for phase in np.linspace(0.0, 2 * math.pi, 5):
            b = gates.b_pulse(theta, phase)
            assert b.is_unitary()
            assert b[0, 0] == 1.0
            assert gates.b_pulse_detuned(theta, phase, 0.8).is_unitary()
        assert gates.beam_splitter(theta / 4).is_unitary()


def test_b_pulse_four_pi_periodicity():
    """B(theta + 4 pi) = B(theta)"""
    for theta in (0.3, 1.0, math.pi, 5.5):
        assert gates.b_pulse(theta + 4 * math.pi, 0.4).allclose(gates.b_pulse(theta, 0.4))


def test_detuned_resonant_limit():
    """chi = 0 reproduces the resonant pulse"""
    for theta, phase in ((math.pi, math.pi / 2), (0.4, 1.9), (3.0, 0.0)):
        assert gates.b_pulse_detuned(theta, phase, 0.0).allclose(gates.b_pulse(theta, phase))


def test_detuned_matches_matrix_exponential():
    """Constant drive of area theta with detuning phase chi over one pulse"""
    theta, phase, chi = math.pi / 2, 0.6, math.pi
    h = np.array(
        [
            [0.0, 0.5 * theta * np.exp(-1j * phase)],
            [0.5 * theta * np.exp(1j * phase), -chi],
        ]
    )
    block = gates.b_pulse_detuned(theta, phase, chi).elements[1:, 1:]
    np.testing.assert_allclose(block, expm(-1j * h), atol=1e-12)


def test_detuned_transition_probability():
    """|B12|^2 = theta^2/(theta^2 + chi^2) sin^2(Omega'/2)"""
    theta = chi = math.pi / 2
    omega = math.hypot(theta, chi)
    expected = theta**2 / omega**2 * math.sin(omega / 2) ** 2
    assert abs(gates.b_pulse_detuned(theta, 0.3, chi)[1, 2]) ** 2 == pytest.approx(expected, abs=1e-14)


def test_projectors():
    """Completeness, idempotence and the non-absorption action"""
    p_abs, p_non = gates.projector_abs().elements, gates.projector_nonabs().elements
    np.testing.assert_array_equal(p_abs + p_non, np.eye(3))
    np.testing.assert_array_equal(p_abs @ p_abs, p_abs)
    np.testing.assert_allclose(p_non @ [0.3, 0.4, 0.5], [0.3, 0.4, 0.0])


def test_povm_completeness_on_grid():
    """M_abs†M_abs + M_nonabs†M_nonabs = I"""
    p_abs, p_non = gates.projector_abs().elements, gates.projector_nonabs().elements
    for theta in np.linspace(0.0, 4 * math.pi, 20):
        for phase in np.linspace(0.0, 2 * math.pi, 20):
            b = gates.b_pulse(theta, phase).elements
            m_abs, m_non = p_abs @ b, p_non @ b
            total = m_abs.conj().T @ m_abs + m_non.conj().T @ m_non
            assert np.max(np.abs(total - np.eye(3))) <= 1e-12


def test_batched_builders_match_scalar():
    """Stacked matrices equal the per-angle operators"""
    thetas = np.array([[0.1, 2.0], [3.0, 7.0]])
    stack = gates.b_pulse_matrix(thetas, 0.5)
    assert stack.shape == (2, 2, 3, 3)
    assert Operator3(stack[1, 0]).allclose(gates.b_pulse(3.0, 0.5))
    assert gates.beam_splitter_matrix(np.array([0.2, 0.4])).shape == (2, 3, 3)


def test_pulse_slot_reduction_and_validation():
    """Resonant areas above 4 pi are reduced, negative areas rejected"""
    slot = PulseSlot(theta=5 * math.pi)
    assert slot.theta == pytest.approx(math.pi)
    detuned = PulseSlot(theta=5 * math.pi, chi=0.5)
    assert detuned.theta == pytest.approx(5 * math.pi)
    with pytest.raises(ValidationError):
        PulseSlot(theta=-0.1)
    with pytest.raises(ValidationError):
        PulseSlot(theta=1.0, phase=math.inf)


def test_unoccupied_slot_is_identity():
    """An empty slot contributes the identity"""
    slot = PulseSlot(theta=math.pi, occupied=False)
    assert slot.effective_theta == 0.0
    assert slot.operator().allclose(Operator3.identity())


def test_sequence_config_validation():
    """Slot count must equal N and phi must lie in (0, pi]"""
    slot = PulseSlot(theta=math.pi)
    with pytest.raises(ValidationError):
        SequenceConfig(n=3, phi=0.5, slots=(slot, slot))
    with pytest.raises(ValidationError):
        SequenceConfig(n=1, phi=0.0, slots=(slot,))
    with pytest.raises(ValidationError):
        SequenceConfig(n=0, phi=0.5, slots=())


def test_sequence_builders():
    """uniform, phase_ramp, dark and slot_arrays"""
    cfg = SequenceConfig.uniform(4, math.pi)
    assert cfg.phi == pytest.approx(math.pi / 5)
    thetas, phases, chis, occupied = cfg.slot_arrays()
    np.testing.assert_allclose(thetas, math.pi)
    np.testing.assert_allclose(phases, math.pi / 2)
    assert occupied.all() and not chis.any()

    ramp = SequenceConfig.phase_ramp(3, math.pi, 0.25)
    np.testing.assert_allclose(ramp.slot_arrays()[1], [0.0, 0.25, 0.5])

    assert not cfg.dark().slot_arrays()[0].any()
    assert cfg.b_operators().shape == (4, 3, 3)
