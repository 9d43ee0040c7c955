"""
Core qutrit linear algebra
Immutable 3-vector / 3x3 containers over numpy complex128 and the few
operations every protocol module builds on
"""
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from utils.errors import NumericalError, ValidationError

UNITARY_TOL = 1e-12
DENSITY_TOL = 1e-10
PSD_TOL = 1e-10
NORM_TOL = 1e-12

ArrayLike = Union[np.ndarray, Sequence]


def _frozen_array(values: ArrayLike, shape: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128)
    if arr.shape != shape:
        raise ValidationError(
            f"{what} must have shape {shape}",
            details={"shape": list(arr.shape)},
        )
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def clamp_probabilities(values: ArrayLike, tol: float = DENSITY_TOL) -> np.ndarray:
    """
    Clip probabilities into [0, 1] after checking the overshoot is round-off

    Args:
        values: Raw probabilities (any shape)
        tol: Largest admissible excursion outside [0, 1]

    Returns:
        Clipped float array

    Raises:
        NumericalError: If any value lies further than tol outside [0, 1]
    """
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericalError("Probabilities contain non-finite entries")
    low = float(np.min(arr, initial=0.0))
    high = float(np.max(arr, initial=1.0))
    if low < -tol or high > 1.0 + tol:
        raise NumericalError(
            "Probability outside [0, 1] beyond tolerance",
            details={"min": low, "max": high, "tol": tol},
        )
    return np.clip(arr, 0.0, 1.0)


@dataclass(frozen=True)
class Operator3:
    """3x3 complex matrix: a gate, projector or propagator block"""

    elements: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", _frozen_array(self.elements, (3, 3), "Operator3"))

    @classmethod
    def identity(cls) -> "Operator3":
        return cls(np.eye(3))

    @property
    def dagger(self) -> "Operator3":
        return Operator3(self.elements.conj().T)

    def __matmul__(self, other: "Operator3") -> "Operator3":
        return matmul(self, other)

    def __getitem__(self, index: tuple[int, int]) -> complex:
        return complex(self.elements[index])

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        """U^dagger U = I elementwise within tol"""
        product = self.elements.conj().T @ self.elements
        return bool(np.max(np.abs(product - np.eye(3))) <= tol)

    def allclose(self, other: "Operator3", atol: float = UNITARY_TOL) -> bool:
        return bool(np.allclose(self.elements, other.elements, rtol=0.0, atol=atol))


@dataclass(frozen=True)
class PureState3:
    """
    Qutrit ket c0|0> + c1|1> + c2|2>

    normalized=False admits the sub-normalized conditional kets of the
    projective chain (norm <= 1 + 1e-12).
    """

    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self) -> None:
        arr = _frozen_array(self.amplitudes, (3,), "PureState3")
        norm2 = float(np.vdot(arr, arr).real)
        if self.normalized and abs(norm2 - 1.0) > NORM_TOL:
            raise NumericalError(
                "PureState3 is not normalized",
                details={"norm_squared": norm2},
            )
        if not self.normalized and norm2 > 1.0 + NORM_TOL:
            raise NumericalError(
                "Conditional state norm exceeds one",
                details={"norm_squared": norm2},
            )
        object.__setattr__(self, "amplitudes", arr)

    @classmethod
    def basis(cls, k: int) -> "PureState3":
        if k not in (0, 1, 2):
            raise ValidationError("Basis index must be 0, 1 or 2", details={"k": k})
        vec = np.zeros(3, dtype=np.complex128)
        vec[k] = 1.0
        return cls(vec)

    @property
    def c0(self) -> complex:
        return complex(self.amplitudes[0])

    @property
    def c1(self) -> complex:
        return complex(self.amplitudes[1])

    @property
    def c2(self) -> complex:
        return complex(self.amplitudes[2])

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        """|c_k|^2, clamped to [0, 1]"""
        return clamp_probabilities(np.abs(self.amplitudes) ** 2)

    def to_density(self) -> "DensityMatrix3":
        rho = np.outer(self.amplitudes, self.amplitudes.conj())
        return DensityMatrix3(rho, conditional=not self.normalized)


@dataclass(frozen=True)
class DensityMatrix3:
    """
    Hermitian, positive semidefinite 3x3 state

    conditional=True admits trace <= 1 (unnormalized conditional states).
    """

    elements: np.ndarray
    conditional: bool = False

    def __post_init__(self) -> None:
        rho = _frozen_array(self.elements, (3, 3), "DensityMatrix3")
        herm_err = float(np.max(np.abs(rho - rho.conj().T)))
        if herm_err > UNITARY_TOL:
            raise NumericalError(
                "DensityMatrix3 is not Hermitian",
                details={"max_deviation": herm_err},
            )
        tr = float(np.trace(rho).real)
        if not self.conditional and abs(tr - 1.0) > DENSITY_TOL:
            raise NumericalError("DensityMatrix3 trace differs from one", details={"trace": tr})
        if self.conditional and tr > 1.0 + DENSITY_TOL:
            raise NumericalError("Conditional state trace exceeds one", details={"trace": tr})
        min_eig = float(np.min(np.linalg.eigvalsh(rho)))
        if min_eig < -PSD_TOL:
            raise NumericalError(
                "DensityMatrix3 has a negative eigenvalue",
                details={"min_eigenvalue": min_eig},
            )
        object.__setattr__(self, "elements", rho)

    @classmethod
    def ground(cls) -> "DensityMatrix3":
        return PureState3.basis(0).to_density()

    @classmethod
    def diagonal(cls, populations: ArrayLike) -> "DensityMatrix3":
        pops = np.asarray(populations, dtype=float)
        return cls(np.diag(pops).astype(np.complex128))

    def trace(self) -> float:
        return float(np.trace(self.elements).real)

    def purity(self) -> float:
        return float(np.trace(self.elements @ self.elements).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.elements)

    def probabilities(self) -> np.ndarray:
        """Diagonal populations, clamped to [0, 1]"""
        return clamp_probabilities(np.diag(self.elements).real)


def matmul(a: Operator3, b: Operator3) -> Operator3:
    """Matrix product a·b"""
    return Operator3(a.elements @ b.elements)


def apply(u: Operator3, psi: PureState3) -> PureState3:
    """
    Apply an operator to a ket

    Norm is preserved for unitary u; for non-unitary u (projectors) the
    result is returned as a conditional ket.
    """
    out = u.elements @ psi.amplitudes
    norm2 = float(np.vdot(out, out).real)
    normalized = psi.normalized and abs(norm2 - 1.0) <= NORM_TOL
    return PureState3(out, normalized=normalized)


def conjugate_by(u: Operator3, rho: DensityMatrix3) -> DensityMatrix3:
    """U rho U^dagger with Hermiticity restored against round-off"""
    out = u.elements @ rho.elements @ u.elements.conj().T
    out = 0.5 * (out + out.conj().T)
    conditional = rho.conditional or abs(float(np.trace(out).real) - 1.0) > DENSITY_TOL
    return DensityMatrix3(out, conditional=conditional)
