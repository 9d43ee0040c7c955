"""
Module 3: Asymptotics
Large-N closed forms for uniform pulses: spectral approximation of S·B,
approximate final amplitudes, efficiency, the block-rotation limit, plateau
bounds and the amplitude recursions used as an independent oracle
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from src.modules.gates import SequenceConfig, b_pulse_matrix, optimal_phi
from src.modules.protocol import ProtocolKind, coerce_kind
from src.qutrit import Operator3
from utils.errors import DomainError, NumericalError, ValidationError
from utils.logger import get_logger

logger = get_logger(__name__)

DET_GUARD = 1e-14


class ApproxVariant(str, Enum):
    EXPANDED = "expanded"
    TRIGONOMETRIC = "trigonometric"


def coerce_variant(variant: Union[str, ApproxVariant]) -> ApproxVariant:
    try:
        return ApproxVariant(variant)
    except ValueError:
        raise ValidationError(
            "Invalid approximation variant",
            details={"value": variant, "valid_values": [v.value for v in ApproxVariant]},
        )


@dataclass(frozen=True)
class SpectralApprox:
    """
    Approximate eigen-decomposition S·B = M diag(lambda) M^-1

    Eigenvalues are (1, e^{-i theta/2}, e^{+i theta/2}); column 1 of M is
    the exact fixed vector, columns 2 and 3 are complex conjugates.
    """

    n: int
    theta: float
    variant: ApproxVariant
    eigenvalues: np.ndarray
    m: np.ndarray
    a: float
    b: float
    norm_n: float

    def inverse(self) -> np.ndarray:
        """
        M^-1 via np.linalg.inv

        Raises:
            NumericalError: If |det M| is below DET_GUARD
        """
        det = complex(np.linalg.det(self.m))
        if abs(det) < DET_GUARD:
            raise NumericalError(
                "Diagonalizing matrix is singular; approximation degenerates near theta = 0",
                details={"det": abs(det), "theta": self.theta, "n": self.n},
            )
        return np.linalg.inv(self.m)

    def power(self, k: int) -> Operator3:
        """M diag(lambda)^k M^-1"""
        return Operator3(self.m @ np.diag(self.eigenvalues**k) @ self.inverse())

    def propagator(self) -> Operator3:
        """Approximation of (S·B)^{N+1}, whose first column is the final state"""
        return self.power(self.n + 1)


@dataclass(frozen=True)
class ApproxCoefficients:
    """Approximate final amplitudes (c0, c1, c2)"""

    n: int
    theta: float
    variant: ApproxVariant
    c0: float
    c1: float
    c2: float
    in_validated_regime: bool

    def probabilities(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.c2]) ** 2

    def normalization_error(self) -> float:
        return abs(self.c0**2 + self.c1**2 + self.c2**2 - 1.0)


def _ab(n: int, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    half_phi = optimal_phi(n) / 2.0
    a = np.cos(theta / 2.0) * math.cos(half_phi) - 1.0
    b = np.sin(theta / 2.0) * math.cos(half_phi)
    return a, b


def _norm_n(n: int, theta: np.ndarray) -> np.ndarray:
    phi = optimal_phi(n)
    a, b = _ab(n, theta)
    q = theta / 4.0
    t = math.tan(phi / 4.0) * math.sin(phi / 2.0)
    return (a**2 + b**2) * np.sin(q) - t * (a * np.sin(q) - b * np.cos(q))


def coefficient_arrays(
    n: int,
    thetas: np.ndarray,
    variant: Union[str, ApproxVariant] = ApproxVariant.TRIGONOMETRIC,
) -> np.ndarray:
    """
    Approximate amplitudes for many pulse areas at once

    Args:
        n: Number of Ramsey slots (phi = pi/(N+1))
        thetas: Pulse areas in radians
        variant: expanded (small-angle series) or trigonometric (exact eigenvector entries)

    Returns:
        Array of shape thetas.shape + (3,)
    """
    variant = coerce_variant(variant)
    theta = np.asarray(thetas, dtype=float)
    phi = optimal_phi(n)
    q = theta / 4.0
    grow = np.sin((n + 1) * q)

    with np.errstate(divide="ignore", invalid="ignore"):
        if variant is ApproxVariant.EXPANDED:
            ratio = (phi / 2.0) / np.sin(q)
            c0 = 1.0 - 0.5 * ratio**2 * grow**2
            c1 = ratio * np.cos(n * q) * grow
            c2 = ratio * np.sin(n * q) * grow
        else:
            a, b = _ab(n, theta)
            r2 = a**2 + b**2
            t = math.tan(phi / 4.0)
            big_n = _norm_n(n, theta)
            wave = (2 * n + 1) * q
            c0 = (r2 * np.sin(q) + t * math.sin(phi / 2.0) * (a * np.sin(wave) + b * np.cos(wave))) / big_n
            amp = 2.0 * r2 / big_n * t * grow
            c1 = amp * np.cos(n * q)
            c2 = amp * np.sin(n * q)

    return np.stack([c0, c1, c2], axis=-1)


def approx_coefficients(
    n: int,
    theta: float,
    variant: Union[str, ApproxVariant] = ApproxVariant.TRIGONOMETRIC,
) -> ApproxCoefficients:
    """
    Approximate final amplitudes for identical pulses of area theta

    Args:
        n: Number of Ramsey slots
        theta: Pulse area in radians
        variant: Approximation variant

    Returns:
        ApproxCoefficients; in_validated_regime is False below theta = 4*phi_N
    """
    variant = coerce_variant(variant)
    c0, c1, c2 = coefficient_arrays(n, np.asarray(theta, dtype=float), variant)
    in_regime = theta >= 4.0 * optimal_phi(n) * (1.0 - 1e-12)
    if not in_regime:
        logger.warning(f"Approximation requested below the plateau (N={n}, theta={theta:.4g})")
    if not np.all(np.isfinite([c0, c1, c2])):
        raise NumericalError(
            "Approximate coefficients are not finite",
            details={"n": n, "theta": theta, "variant": variant.value},
        )
    return ApproxCoefficients(
        n=n,
        theta=float(theta),
        variant=variant,
        c0=float(c0),
        c1=float(c1),
        c2=float(c2),
        in_validated_regime=bool(in_regime),
    )


def spectral_approx(
    n: int,
    theta: float,
    variant: Union[str, ApproxVariant] = ApproxVariant.TRIGONOMETRIC,
) -> SpectralApprox:
    """Approximate eigenvalues and eigenvectors of S(phi_N)·B(theta, pi/2)"""
    variant = coerce_variant(variant)
    phi = optimal_phi(n)
    q = theta / 4.0
    cot_q = math.cos(q) / math.sin(q) if math.sin(q) != 0.0 else math.inf
    if not math.isfinite(cot_q):
        raise DomainError("Spectral approximation undefined at theta = 0 mod 4*pi", details={"theta": theta})

    a, b = (float(x) for x in _ab(n, np.asarray(theta)))
    if variant is ApproxVariant.TRIGONOMETRIC:
        t = math.tan(phi / 4.0)
        v0 = [1.0, t, t * cot_q]
        v_minus = [math.sin(phi / 2.0), complex(a, b), complex(-b, a)]
    else:
        t = phi / 4.0
        v0 = [1.0, t, t * cot_q]
        rot = 2.0 * math.sin(q) * np.exp(1j * q)
        v_minus = [phi / 2.0, 1j * rot, -rot]

    v_minus_arr = np.array(v_minus, dtype=np.complex128)
    m = np.column_stack([np.array(v0, dtype=np.complex128), v_minus_arr, v_minus_arr.conj()])
    eigenvalues = np.array([1.0, np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    return SpectralApprox(
        n=n,
        theta=float(theta),
        variant=variant,
        eigenvalues=eigenvalues,
        m=m,
        a=a,
        b=b,
        norm_n=float(_norm_n(n, np.asarray(theta))),
    )


def approx_efficiency(n: int, theta: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    Large-N coherent efficiency

    eta_c ~ 1 - phi^2/(16 sin^2(theta/4)) [cos(theta/4) - cos((2N+1) theta/4)]^2
    """
    phi = optimal_phi(n)
    q = np.asarray(theta, dtype=float) / 4.0
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = 1.0 - phi**2 / (16.0 * np.sin(q) ** 2) * (np.cos(q) - np.cos((2 * n + 1) * q)) ** 2
    return float(eta) if np.ndim(eta) == 0 else eta


def approx_efficiency_at_pi(n: int) -> float:
    """theta = pi reduction: 1 - phi^2/16 [1 - sqrt(2) cos(N pi/2 + pi/4)]^2"""
    phi = optimal_phi(n)
    return 1.0 - phi**2 / 16.0 * (1.0 - math.sqrt(2.0) * math.cos(n * math.pi / 2 + math.pi / 4)) ** 2


def asymptotic_unitary(n: int, theta: float) -> Operator3:
    """Block-rotation limit 1 (+) B(N*theta) at phase pi/2"""
    return Operator3(b_pulse_matrix(n * theta, math.pi / 2))


def plateau_bounds(n: int) -> tuple[float, float]:
    """
    Pulse-area interval [4*phi_N, 4*N*phi_N] of near-unit success probability

    For N = 1 the interval collapses to the single point 2*pi.
    """
    if n < 1:
        raise DomainError("Plateau requires N >= 1", details={"n": n})
    phi = optimal_phi(n)
    return 4.0 * phi, 4.0 * n * phi


def recursion_chain(
    cfg: SequenceConfig,
    kind: Union[str, ProtocolKind] = ProtocolKind.COHERENT,
) -> list[tuple[complex, complex, complex]]:
    """
    Amplitude trajectory from the step-to-step recursions, starting at |0>

    Entry 0 is the prepared state (1, 0, 0); entry j is the (possibly
    unnormalized) state after Ramsey step j. The leading beam splitter is
    folded into step 1 as a zero-area step.

    Args:
        cfg: Sequence configuration (resonant pulses only)
        kind: coherent, or projective (c2 zeroed after every pulse)

    Returns:
        N + 1 amplitude triples
    """
    kind = coerce_kind(kind)
    thetas, phases, chis, occupied = cfg.slot_arrays()
    if np.any(chis[occupied] != 0.0):
        raise ValidationError("Amplitude recursions cover resonant pulses only")

    cos_s = math.cos(cfg.phi / 2.0)
    sin_s = math.sin(cfg.phi / 2.0)
    projective = kind is ProtocolKind.PROJECTIVE

    def step(c: tuple[complex, complex, complex], theta: float, phase: float):
        c0, c1, c2 = c
        ct, st = math.cos(theta / 2.0), math.sin(theta / 2.0)
        b1 = ct * c1 - 1j * np.exp(-1j * phase) * st * c2
        b2 = 0j if projective else -1j * np.exp(1j * phase) * st * c1 + ct * c2
        return (
            complex(cos_s * c0 - sin_s * b1),
            complex(sin_s * c0 + cos_s * b1),
            complex(b2),
        )

    start = (1 + 0j, 0j, 0j)
    chain = [start]
    c = step(start, 0.0, 0.0)
    for theta, phase, occ in zip(thetas, phases, occupied):
        c = step(c, float(theta) if occ else 0.0, float(phase))
        chain.append(c)
    return chain
