"""
Module 1: Gates
Beam-splitter, B-pulse (resonant and detuned) and projection operators,
plus the pulse-slot and Ramsey-sequence configuration models
"""
import math
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from src.qutrit import Operator3
from utils.errors import ValidationError
from utils.logger import get_logger

logger = get_logger(__name__)

FOUR_PI = 4.0 * math.pi


def optimal_phi(n: int) -> float:
    """Beam-splitter angle pi/(N+1) giving full |0> -> |1> transfer without B-pulses"""
    if n < 1:
        raise ValidationError("N must be positive", details={"n": n})
    return math.pi / (n + 1)


def reduce_theta(theta: np.ndarray, chi: np.ndarray) -> np.ndarray:
    """Reduce resonant pulse areas modulo 4*pi; detuned areas are left alone"""
    theta = np.asarray(theta, dtype=float)
    chi = np.asarray(chi, dtype=float)
    return np.where(chi == 0.0, np.mod(theta, FOUR_PI), theta)


def beam_splitter_matrix(phi: Union[np.ndarray, float]) -> np.ndarray:
    """
    Stacked beam-splitter matrices S(phi), a rotation in the 0-1 subspace

    Args:
        phi: Angle(s) in radians, any shape

    Returns:
        Complex array of shape phi.shape + (3, 3)
    """
    phi = np.asarray(phi, dtype=float)
    c = np.cos(phi / 2.0)
    s = np.sin(phi / 2.0)
    out = np.zeros(phi.shape + (3, 3), dtype=np.complex128)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    out[..., 2, 2] = 1.0
    return out


def b_pulse_matrix(
    theta: Union[np.ndarray, float],
    phase: Union[np.ndarray, float],
    chi: Union[np.ndarray, float] = 0.0,
) -> np.ndarray:
    """
    Stacked B-pulse matrices 1 (+) e^{i chi/2} B, acting on the 1-2 subspace

    The detuned block has Omega' = sqrt(theta^2 + chi^2):
        B11 = cos(Omega'/2) - i chi/Omega' sin(Omega'/2),   B22 = B11*
        B12 = -i theta e^{-i phase}/Omega' sin(Omega'/2),   B21 = -B12*
    For chi = 0 this is the resonant pulse with B11 = cos(theta/2) and
    B12 = -i e^{-i phase} sin(theta/2).

    Args:
        theta: Pulse area(s) in radians
        phase: Pulse phase(s) in radians
        chi: Accumulated detuning phase(s) delta*tau in radians

    Returns:
        Complex array of the broadcast shape + (3, 3)
    """
    theta, phase, chi = np.broadcast_arrays(
        np.asarray(theta, dtype=float),
        np.asarray(phase, dtype=float),
        np.asarray(chi, dtype=float),
    )
    theta = reduce_theta(theta, chi)

    omega = np.hypot(theta, chi)
    half = omega / 2.0
    # sin(Omega'/2)/Omega', continuous at Omega' = 0
    safe = np.where(omega > 0.0, omega, 1.0)
    sinc_half = np.where(omega > 0.0, np.sin(half) / safe, 0.5)

    b11 = np.cos(half) - 1j * chi * sinc_half
    b12 = -1j * theta * np.exp(-1j * phase) * sinc_half
    global_phase = np.exp(0.5j * chi)

    out = np.zeros(theta.shape + (3, 3), dtype=np.complex128)
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = global_phase * b11
    out[..., 1, 2] = global_phase * b12
    out[..., 2, 1] = global_phase * (-np.conj(b12))
    out[..., 2, 2] = global_phase * np.conj(b11)
    return out


def beam_splitter(phi: float) -> Operator3:
    """S(phi) as an Operator3"""
    return Operator3(beam_splitter_matrix(phi))


def b_pulse(theta: float, phase: float) -> Operator3:
    """Resonant B(theta, phase) as an Operator3"""
    return Operator3(b_pulse_matrix(theta, phase))


def b_pulse_detuned(theta: float, phase: float, chi: float) -> Operator3:
    """Detuned B(theta, phase, chi) as an Operator3"""
    return Operator3(b_pulse_matrix(theta, phase, chi))


def projector_abs() -> Operator3:
    """|2><2|, the absorption projector"""
    return Operator3(np.diag([0.0, 0.0, 1.0]))


def projector_nonabs() -> Operator3:
    """|0><0| + |1><1|, the non-absorption projector"""
    return Operator3(np.diag([1.0, 1.0, 0.0]))


class PulseSlot(BaseModel):
    """One Ramsey B-slot: pulse area, phase, occupancy and detuning phase"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    theta: float
    phase: float = math.pi / 2
    occupied: bool = True
    chi: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def _reduce(cls, data):
        if isinstance(data, dict) and "theta" in data:
            theta = float(data["theta"])
            if not math.isfinite(theta) or theta < 0.0:
                raise ValidationError(
                    "Pulse area must be finite and non-negative",
                    details={"theta": data["theta"]},
                )
            if theta > FOUR_PI and float(data.get("chi", 0.0)) == 0.0:
                data = {**data, "theta": math.fmod(theta, FOUR_PI)}
        return data

    @model_validator(mode="after")
    def _check(self) -> "PulseSlot":
        if not (math.isfinite(self.phase) and math.isfinite(self.chi)):
            raise ValidationError(
                "Pulse phase and detuning must be finite",
                details={"phase": self.phase, "chi": self.chi},
            )
        return self

    @property
    def effective_theta(self) -> float:
        return self.theta if self.occupied else 0.0

    def operator(self) -> Operator3:
        """Operator of this slot; an unoccupied slot is the identity"""
        if not self.occupied:
            return Operator3.identity()
        return b_pulse_detuned(self.theta, self.phase, self.chi)


class SequenceConfig(BaseModel):
    """N Ramsey sequences: beam-splitter angle phi and N pulse slots"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n: int
    phi: float
    slots: tuple[PulseSlot, ...]

    @model_validator(mode="after")
    def _check(self) -> "SequenceConfig":
        if self.n < 1:
            raise ValidationError("N must be positive", details={"n": self.n})
        if len(self.slots) != self.n:
            raise ValidationError(
                "Number of pulse slots must equal N",
                details={"n": self.n, "slots": len(self.slots)},
            )
        if not (0.0 < self.phi <= math.pi):
            raise ValidationError(
                "Beam-splitter angle must lie in (0, pi]",
                details={"phi": self.phi},
            )
        return self

    @classmethod
    def uniform(
        cls,
        n: int,
        theta: float,
        phase: float = math.pi / 2,
        phi: Optional[float] = None,
        chi: float = 0.0,
    ) -> "SequenceConfig":
        """Identical pulses in every slot; phi defaults to pi/(N+1)"""
        slot = PulseSlot(theta=theta, phase=phase, chi=chi)
        return cls(n=n, phi=optimal_phi(n) if phi is None else phi, slots=(slot,) * n)

    @classmethod
    def phase_ramp(
        cls,
        n: int,
        theta: float,
        delta_phase: float,
        phi: Optional[float] = None,
    ) -> "SequenceConfig":
        """Pulses of equal area with phases (j-1)*delta_phase"""
        slots = tuple(PulseSlot(theta=theta, phase=j * delta_phase) for j in range(n))
        return cls(n=n, phi=optimal_phi(n) if phi is None else phi, slots=slots)

    @classmethod
    def from_arrays(
        cls,
        phi: float,
        thetas: Sequence[float],
        phases: Sequence[float],
        occupied: Optional[Sequence[bool]] = None,
        chis: Optional[Sequence[float]] = None,
    ) -> "SequenceConfig":
        n = len(thetas)
        occupied = [True] * n if occupied is None else list(occupied)
        chis = [0.0] * n if chis is None else list(chis)
        slots = tuple(
            PulseSlot(theta=float(t), phase=float(p), occupied=bool(o), chi=float(c))
            for t, p, o, c in zip(thetas, phases, occupied, chis)
        )
        return cls(n=n, phi=phi, slots=slots)

    def with_theta(self, theta: float) -> "SequenceConfig":
        """Same sequence with every occupied slot set to area theta"""
        slots = tuple(s.model_copy(update={"theta": theta}) for s in self.slots)
        return self.model_copy(update={"slots": slots})

    def dark(self) -> "SequenceConfig":
        """The same sequence with no pulses (theta = 0 everywhere)"""
        return self.with_theta(0.0)

    def slot_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(thetas, phases, chis, occupied) as numpy arrays of length N"""
        thetas = np.array([s.theta for s in self.slots], dtype=float)
        phases = np.array([s.phase for s in self.slots], dtype=float)
        chis = np.array([s.chi for s in self.slots], dtype=float)
        occupied = np.array([s.occupied for s in self.slots], dtype=bool)
        return thetas, phases, chis, occupied

    def b_operators(self) -> np.ndarray:
        """Stacked slot operators, shape (N, 3, 3)"""
        thetas, phases, chis, occupied = self.slot_arrays()
        return b_pulse_matrix(
            np.where(occupied, thetas, 0.0), phases, np.where(occupied, chis, 0.0)
        )
