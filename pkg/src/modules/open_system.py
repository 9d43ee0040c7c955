"""
Module 5: Open System
Lindblad propagation of the protocol under relaxation, physical pulse
schedules, thermal initial states and detuned drives

Units: time in microseconds, rates in MHz (1/us, taken as 1/e rates, no 2*pi),
Hamiltonians in rad/us. Pulse durations are configured in nanoseconds.
"""
import math
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic import ValidationError as PydanticValidationError
from scipy import constants

from src.modules.gates import FOUR_PI, PulseSlot, SequenceConfig, optimal_phi
from src.modules.protocol import (
    InitialState,
    ProtocolKind,
    ProtocolTrace,
    coerce_kind,
    final_probabilities_batch,
    initial_density,
    run_chain,
)
from src.qutrit import DensityMatrix3
from utils.errors import NumericalError, ValidationError
from utils.logger import get_logger

logger = get_logger(__name__)

MIN_STEPS_PER_PULSE = 10
TRACE_TOL = 1e-9
NS_PER_US = 1000.0

_EYE3 = np.eye(3, dtype=np.complex128)


class NoiseModel(BaseModel):
    """Relaxation rates and the rectangular pulse schedule"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    gamma10_mhz: float = Field(default=0.1, ge=0)
    gamma21_mhz: float = Field(default=10.0, ge=0)
    bs_duration_ns: float = Field(default=56.0, gt=0)
    b_duration_ns: float = Field(default=112.0, gt=0)
    envelope: Literal["rectangular"] = "rectangular"
    steps_per_pulse: int = Field(default=200, ge=MIN_STEPS_PER_PULSE)

    @classmethod
    def from_settings(cls, noise_defaults, **overrides) -> "NoiseModel":
        """Build from config.settings.NoiseDefaults; None overrides are ignored"""
        values = noise_defaults.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**values)
        except PydanticValidationError as e:
            raise ValidationError(
                "Invalid noise model",
                details={"errors": [err["msg"] for err in e.errors()]},
                original_error=e,
            )

    @property
    def bs_duration_us(self) -> float:
        return self.bs_duration_ns / NS_PER_US

    @property
    def b_duration_us(self) -> float:
        return self.b_duration_ns / NS_PER_US

    def total_duration_us(self, n: int) -> float:
        """Back-to-back schedule: N + 1 beam splitters and N B-slots"""
        return (n + 1) * self.bs_duration_us + n * self.b_duration_us


def transmon_noise(gamma10_mhz: float, **schedule) -> NoiseModel:
    """Noise on the transmon line Gamma21 = 2 * Gamma10"""
    return NoiseModel(gamma10_mhz=gamma10_mhz, gamma21_mhz=2.0 * gamma10_mhz, **schedule)


class Drive(BaseModel):
    """
    One rectangular pulse

    transition "01" is a beam splitter of rotation angle `angle`; "12" is a
    B-pulse of area `angle`, phase `phase` and accumulated detuning `chi`.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    transition: Literal["01", "12"]
    angle: float
    phase: float = 0.0
    chi: float = 0.0

    @model_validator(mode="after")
    def _check(self) -> "Drive":
        if not all(math.isfinite(v) for v in (self.angle, self.phase, self.chi)):
            raise ValidationError("Drive parameters must be finite", details=self.model_dump())
        if self.transition == "01" and self.chi != 0.0:
            raise ValidationError("Detuning applies to 1-2 pulses only")
        return self


class ThermalSpec(BaseModel):
    """Equilibrium temperature and transition frequencies (f = omega / 2 pi)"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    temperature_mk: float = Field(default=0.0, ge=0)
    omega01_ghz: float = Field(default=7.20, gt=0)
    omega12_ghz: float = Field(default=6.85, gt=0)

    @property
    def omega01(self) -> float:
        """Angular frequency in rad/s"""
        return 2 * math.pi * self.omega01_ghz * 1e9

    @property
    def omega12(self) -> float:
        return 2 * math.pi * self.omega12_ghz * 1e9

    @property
    def omega02(self) -> float:
        return self.omega01 + self.omega12


def thermal_populations(spec: ThermalSpec) -> np.ndarray:
    """Boltzmann populations (p0, p1, p2); T = 0 is the exact ground state"""
    if spec.temperature_mk == 0.0:
        return np.array([1.0, 0.0, 0.0])
    kt = constants.k * spec.temperature_mk * 1e-3
    energies = constants.hbar * np.array([0.0, spec.omega01, spec.omega02])
    weights = np.exp(-energies / kt)
    return weights / weights.sum()


def thermal_state(spec: ThermalSpec) -> DensityMatrix3:
    """Diagonal Gibbs state of the three lowest levels"""
    pops = thermal_populations(spec)
    logger.debug(f"Thermal populations at {spec.temperature_mk} mK: {pops}")
    return DensityMatrix3.diagonal(pops)


def _kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched Kronecker product of (..., 3, 3) stacks"""
    out = np.einsum("...ij,...kl->...ikjl", a, b)
    return out.reshape(out.shape[:-4] + (9, 9))


def _dissipator(jump: np.ndarray) -> np.ndarray:
    """Row-major superoperator of L rho L^dag - 1/2 {L^dag L, rho}"""
    ldl = jump.conj().T @ jump
    return _kron(jump, jump.conj()) - 0.5 * _kron(ldl, _EYE3) - 0.5 * _kron(_EYE3, ldl.T)


def _lowering(low: int, high: int) -> np.ndarray:
    op = np.zeros((3, 3), dtype=np.complex128)
    op[low, high] = 1.0
    return op


# |0><1| and |1><2|; 2 -> 0 is dipole forbidden
DISSIPATOR_10 = _dissipator(_lowering(0, 1))
DISSIPATOR_21 = _dissipator(_lowering(1, 2))


def drive_hamiltonian(
    transition: str,
    angle: np.ndarray,
    phase: np.ndarray,
    chi: np.ndarray,
    duration_us: float,
) -> np.ndarray:
    """
    Rotating-frame Hamiltonian(s) of rectangular pulses, rad/us

    01: (Omega/2) sigma_y on the 0-1 subspace
    12: (Omega/2)(e^{-i phase}|1><2| + h.c.) - delta |2><2|
    with Omega = angle / duration and delta = chi / duration.
    """
    angle, phase, chi = np.broadcast_arrays(
        np.asarray(angle, dtype=float), np.asarray(phase, dtype=float), np.asarray(chi, dtype=float)
    )
    rabi = angle / duration_us
    h = np.zeros(angle.shape + (3, 3), dtype=np.complex128)
    if transition == "01":
        h[..., 0, 1] = -0.5j * rabi
        h[..., 1, 0] = 0.5j * rabi
    else:
        h[..., 1, 2] = 0.5 * rabi * np.exp(-1j * phase)
        h[..., 2, 1] = 0.5 * rabi * np.exp(1j * phase)
        h[..., 2, 2] = -chi / duration_us
    return h


def liouvillian(hamiltonian: np.ndarray, gamma10: np.ndarray, gamma21: np.ndarray) -> np.ndarray:
    """
    Row-major Lindblad generator -i(H x I - I x H^T) + sum Gamma D[L]

    Args:
        hamiltonian: (..., 3, 3)
        gamma10: Rate(s) of |1> -> |0> in MHz, broadcastable to the batch
        gamma21: Rate(s) of |2> -> |1> in MHz

    Returns:
        (..., 9, 9) generator acting on row-major vec(rho)
    """
    h = np.asarray(hamiltonian, dtype=np.complex128)
    eye = np.broadcast_to(_EYE3, h.shape)
    gen = -1j * (_kron(h, eye) - _kron(eye, np.swapaxes(h, -1, -2)))
    g10 = np.asarray(gamma10, dtype=float)[..., None, None]
    g21 = np.asarray(gamma21, dtype=float)[..., None, None]
    return gen + g10 * DISSIPATOR_10 + g21 * DISSIPATOR_21


def rk4_step_matrix(generator: np.ndarray, h: float) -> np.ndarray:
    """Classic RK4 step for a constant linear generator, as a matrix"""
    eye = np.broadcast_to(np.eye(9), generator.shape)
    hl = h * generator
    inner = eye + hl / 4.0
    inner = eye + hl @ inner / 3.0
    inner = eye + hl @ inner / 2.0
    return eye + hl @ inner


def propagate_batch(rho: np.ndarray, generator: np.ndarray, duration_us: float, steps: int) -> np.ndarray:
    """
    Integrate d vec(rho)/dt = L vec(rho) over one pulse with fixed RK4 steps

    Hermiticity is restored after every step.

    Args:
        rho: (..., 3, 3) states
        generator: (..., 9, 9) or (9, 9) generator
        duration_us: Pulse duration
        steps: Number of RK4 steps

    Returns:
        (..., 3, 3) propagated states
    """
    return _apply_steps(rk4_step_matrix(generator, duration_us / steps), rho, steps)


def _apply_steps(step: np.ndarray, rho: np.ndarray, steps: int) -> np.ndarray:
    vec = np.array(rho, dtype=np.complex128).reshape(np.shape(rho)[:-2] + (9,))
    for _ in range(steps):
        vec = np.einsum("...ij,...j->...i", step, vec)
        r = vec.reshape(vec.shape[:-1] + (3, 3))
        vec = (0.5 * (r + np.conj(np.swapaxes(r, -1, -2)))).reshape(vec.shape)
    return vec.reshape(vec.shape[:-1] + (3, 3))


def _check_steps(steps: int) -> None:
    if steps < MIN_STEPS_PER_PULSE:
        raise ValidationError(
            f"Lindblad propagation needs at least {MIN_STEPS_PER_PULSE} steps per pulse",
            details={"steps_per_pulse": steps},
        )


def lindblad_propagate(
    rho: DensityMatrix3,
    drive: Optional[Drive],
    noise: NoiseModel,
    duration_ns: Optional[float] = None,
) -> DensityMatrix3:
    """
    Evolve one state through a rectangular pulse (or free decay) with relaxation

    Args:
        rho: Initial state
        drive: Pulse, or None for free evolution
        noise: Rates, default durations and step count
        duration_ns: Overrides the schedule duration (required when drive is None)

    Returns:
        Propagated state

    Raises:
        ValidationError: steps_per_pulse below the minimum, or no duration
        NumericalError: trace drift beyond tolerance
    """
    _check_steps(noise.steps_per_pulse)
    if duration_ns is None:
        if drive is None:
            raise ValidationError("Free evolution needs an explicit duration")
        duration_ns = noise.bs_duration_ns if drive.transition == "01" else noise.b_duration_ns
    if not duration_ns > 0:
        raise ValidationError("Duration must be positive", details={"duration_ns": duration_ns})
    duration_us = duration_ns / NS_PER_US

    if drive is None:
        h = np.zeros((3, 3), dtype=np.complex128)
    else:
        h = drive_hamiltonian(drive.transition, drive.angle, drive.phase, drive.chi, duration_us)
    gen = liouvillian(h, noise.gamma10_mhz, noise.gamma21_mhz)
    out = propagate_batch(rho.elements, gen, duration_us, noise.steps_per_pulse)

    drift = abs(float(np.trace(out).real) - rho.trace())
    if drift > TRACE_TOL:
        raise NumericalError("Lindblad step changed the trace", details={"drift": drift})
    return DensityMatrix3(out, conditional=rho.conditional)


def noisy_final_batch(
    kind: Union[str, ProtocolKind],
    cfg: SequenceConfig,
    gamma10: np.ndarray,
    gamma21: np.ndarray,
    noise: NoiseModel,
    init: InitialState = None,
) -> np.ndarray:
    """
    Noisy protocol records for a batch of relaxation-rate pairs

    Every slot lasts b_duration even when empty or at theta = 0.

    Args:
        kind: Protocol kind
        cfg: Sequence configuration
        gamma10: Rates |1> -> |0> in MHz, shape (B,) or scalar
        gamma21: Rates |2> -> |1> in MHz, broadcast with gamma10
        noise: Schedule and step count (its own rates are ignored here)
        init: Initial state

    Returns:
        Records of shape gamma.shape + (N, 3)
    """
    kind = coerce_kind(kind)
    _check_steps(noise.steps_per_pulse)
    g10, g21 = np.broadcast_arrays(np.asarray(gamma10, dtype=float), np.asarray(gamma21, dtype=float))
    if np.any(g10 < 0) or np.any(g21 < 0):
        raise ValidationError("Relaxation rates must be non-negative")

    thetas, phases, chis, occupied = cfg.slot_arrays()
    thetas = np.where(occupied, thetas, 0.0)
    chis = np.where(occupied, chis, 0.0)

    bs_h = drive_hamiltonian("01", cfg.phi, 0.0, 0.0, noise.bs_duration_us)
    bs_gen = liouvillian(np.broadcast_to(bs_h, g10.shape + (3, 3)), g10, g21)
    bs_step = rk4_step_matrix(bs_gen, noise.bs_duration_us / noise.steps_per_pulse)

    b_h = drive_hamiltonian("12", thetas, phases, chis, noise.b_duration_us)
    # one generator per slot, broadcast over the rate batch
    b_gen = liouvillian(
        b_h.reshape((cfg.n,) + (1,) * g10.ndim + (3, 3)),
        g10,
        g21,
    )

    h_b = noise.b_duration_us / noise.steps_per_pulse
    b_steps = [rk4_step_matrix(b_gen[j], h_b) for j in range(cfg.n)]
    rho0 = np.broadcast_to(initial_density(init), g10.shape + (3, 3)).astype(np.complex128)

    logger.debug(
        f"Noisy {kind.value} chain: N={cfg.n}, batch={g10.shape}, "
        f"{noise.steps_per_pulse} RK4 steps per pulse"
    )
    records = run_chain(
        kind,
        cfg.n,
        splitter=lambda rho: _apply_steps(bs_step, rho, noise.steps_per_pulse),
        pulse=lambda rho, j: _apply_steps(b_steps[j], rho, noise.steps_per_pulse),
        rho0=rho0,
    )

    if kind is ProtocolKind.COHERENT:
        drift = float(np.max(np.abs(records.sum(axis=-1) - np.trace(rho0, axis1=-2, axis2=-1).real[..., None])))
        if drift > TRACE_TOL * (2 * cfg.n + 1):
            raise NumericalError("Noisy chain drifted from unit trace", details={"drift": drift})
    return records


def run_noisy(
    kind: Union[str, ProtocolKind],
    cfg: SequenceConfig,
    noise: NoiseModel,
    init: InitialState = None,
) -> ProtocolTrace:
    """Single noisy run with the rates of `noise`"""
    kind = coerce_kind(kind)
    records = noisy_final_batch(kind, cfg, noise.gamma10_mhz, noise.gamma21_mhz, noise, init)
    return ProtocolTrace(kind=kind, per_step=records)


def run_coherent_noisy(cfg: SequenceConfig, noise: NoiseModel, init: InitialState = None) -> ProtocolTrace:
    """
    Coherent protocol with relaxation during every pulse

    Returns:
        Trace with the same layout as protocol.run_coherent
    """
    return run_noisy(ProtocolKind.COHERENT, cfg, noise, init)


def run_projective_noisy(cfg: SequenceConfig, noise: NoiseModel, init: InitialState = None) -> ProtocolTrace:
    """
    Projective protocol with relaxation; rho -> P rho P after every B-pulse

    Returns:
        Trace with the same layout as protocol.run_projective
    """
    return run_noisy(ProtocolKind.PROJECTIVE, cfg, noise, init)


def detuned_schedule(theta: float, phase: float, delta_mhz: float, tau_ns: float) -> PulseSlot:
    """
    Pulse slot of a detuned B-pulse, chi = delta * tau

    Args:
        theta: Pulse area in radians
        phase: Pulse phase in radians
        delta_mhz: Detuning as an angular frequency in rad/us
        tau_ns: Pulse duration in nanoseconds
    """
    if not tau_ns > 0:
        raise ValidationError("Pulse duration must be positive", details={"tau_ns": tau_ns})
    return PulseSlot(theta=theta, phase=phase, chi=delta_mhz * tau_ns / NS_PER_US)


def two_level_detuned_signal(
    theta: Union[float, np.ndarray],
    chi: Union[float, np.ndarray],
    n: int,
) -> np.ndarray:
    """Two-level excitation after N detuned pulses: theta^2/(theta^2+chi^2) sin^2(N Omega'/2)"""
    theta = np.asarray(theta, dtype=float)
    chi = np.asarray(chi, dtype=float)
    omega2 = theta**2 + chi**2
    with np.errstate(divide="ignore", invalid="ignore"):
        envelope = np.where(omega2 > 0, theta**2 / np.where(omega2 > 0, omega2, 1.0), 0.0)
    return envelope * np.sin(n * np.sqrt(omega2) / 2.0) ** 2


def half_max_bandwidth(chis: np.ndarray, signal: np.ndarray) -> float:
    """
    Width of the contiguous region around the peak where signal >= peak/2

    Crossings are linearly interpolated; a region reaching the grid edge is
    cut at the edge.
    """
    chis = np.asarray(chis, dtype=float)
    signal = np.asarray(signal, dtype=float)
    if chis.ndim != 1 or chis.shape != signal.shape or chis.size < 3:
        raise ValidationError("Bandwidth needs matching 1-D grids of at least 3 points")
    peak = int(np.argmax(signal))
    half = 0.5 * signal[peak]

    lo = peak
    while lo > 0 and signal[lo - 1] >= half:
        lo -= 1
    hi = peak
    while hi < chis.size - 1 and signal[hi + 1] >= half:
        hi += 1

    def crossing(inside: int, outside: int) -> float:
        s_in, s_out = signal[inside], signal[outside]
        frac = (s_in - half) / (s_in - s_out) if s_in != s_out else 0.0
        return float(chis[inside] + frac * (chis[outside] - chis[inside]))

    left = crossing(lo, lo - 1) if lo > 0 else float(chis[0])
    right = crossing(hi, hi + 1) if hi < chis.size - 1 else float(chis[-1])
    if lo == 0 or hi == chis.size - 1:
        logger.warning("Half-maximum region reaches the edge of the detuning grid")
    return right - left


def detuning_map(
    n: int,
    theta: float,
    chis: np.ndarray,
    phase: float = math.pi / 2,
    kind: Union[str, ProtocolKind] = ProtocolKind.COHERENT,
) -> np.ndarray:
    """Noiseless final success probability for identical detuned pulses, one value per chi"""
    chis = np.asarray(chis, dtype=float)
    if not 0.0 <= theta <= FOUR_PI:
        raise ValidationError("Pulse area must lie in [0, 4 pi]", details={"theta": theta})
    slot_thetas = np.full(chis.shape + (n,), float(theta))
    slot_chis = np.repeat(chis[..., None], n, axis=-1)
    records = final_probabilities_batch(kind, optimal_phi(n), slot_thetas, phase, slot_chis)
    return records[..., -1, 0]
