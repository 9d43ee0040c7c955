"""
Module 4: Metrology
Fisher information of the outcome distributions of both protocols and of
their efficiencies, the closed-form large-N QFI_eta_c, threshold pulse areas
and scaling fits
"""
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.optimize import curve_fit

from src.modules.asymptotics import ApproxVariant, coefficient_arrays
from src.modules.gates import FOUR_PI, optimal_phi
from src.modules.protocol import ZERO_DENOMINATOR, ProtocolKind, coerce_kind, final_probabilities_batch
from utils.errors import DomainError, NumericalError, ValidationError
from utils.logger import get_logger
from utils.validators import validate_positive_integer, validate_probability

logger = get_logger(__name__)

# Components below this are treated as zeros of the distribution
PROBABILITY_FLOOR = 1e-14
# Fitted constant terms below this mark a component that vanishes in the limit
LIMIT_ZERO = 1e-9
# or below this fraction of the largest limit-fit sample
LIMIT_RELATIVE = 0.1
NEGATIVE_TOL = 1e-9
MIN_FIT_POINTS = 4
# Rows per batched chain evaluation (theta points x offsets)
CHUNK_ROWS = 4096

DISTRIBUTIONS = {
    "coherent": ProtocolKind.COHERENT,
    "eta_c": ProtocolKind.COHERENT,
    "projective": ProtocolKind.PROJECTIVE,
    "eta": ProtocolKind.PROJECTIVE,
}

# Sample layout along the offset axis
_CENTER, _MINUS_H, _PLUS_H, _MINUS_H2, _PLUS_H2, _MINUS_2H, _PLUS_2H = range(7)
_LIMIT = slice(7, 10)


@dataclass(frozen=True)
class QfiReport:
    """
    Fisher information of the four measured distributions at one pulse area

    Values the caller did not request are None. limit is True when theta is
    a multiple of 4*pi and the values are the theta -> 0 extrapolation.
    """

    theta: float
    n: int
    qfi_coherent: Optional[float]
    qfi_projective: Optional[float]
    qfi_eta_c: Optional[float]
    qfi_eta: Optional[float]
    derivative_step: float
    limit: bool = False
    unreliable: bool = False


@dataclass(frozen=True)
class FitResult:
    """
    Least-squares scaling fit

    power law: value = coefficient * n**exponent (fitted in log-log space)
    affine law: value = coefficient * n + intercept
    """

    law: str
    coefficient: float
    exponent: float
    intercept: float
    residual: float
    points: int

    def predict(self, n: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        n = np.asarray(n, dtype=float)
        if self.law == "affine":
            out = self.coefficient * n + self.intercept
        else:
            out = self.coefficient * n**self.exponent
        return float(out) if out.ndim == 0 else out


def fisher_information(
    probabilities: np.ndarray,
    derivatives: np.ndarray,
    floor: float = PROBABILITY_FLOOR,
) -> np.ndarray:
    """
    Sum over outcomes of (dp/dtheta)^2 / p

    Args:
        probabilities: Outcome probabilities, outcomes on the last axis
        derivatives: Their derivatives with respect to theta, same shape
        floor: Outcomes with p <= floor are left out of the sum

    Returns:
        Fisher information with the outcome axis reduced
    """
    p = np.asarray(probabilities, dtype=float)
    d = np.asarray(derivatives, dtype=float)
    keep = p > floor
    terms = np.where(keep, d**2 / np.where(keep, p, 1.0), 0.0)
    return terms.sum(axis=-1)


def efficiency_fisher_compact(eta: np.ndarray, d_eta: np.ndarray) -> np.ndarray:
    """Two-outcome form (d eta/d theta)^2 / (eta (1 - eta))"""
    eta = np.asarray(eta, dtype=float)
    return np.asarray(d_eta, dtype=float) ** 2 / (eta * (1.0 - eta))


def _offsets(step: float, epsilon: float) -> np.ndarray:
    h = step
    return np.array([0.0, -h, h, -h / 2, h / 2, -2 * h, 2 * h, epsilon, 2 * epsilon, 3 * epsilon])


def _efficiency_pair(success: np.ndarray, loss: np.ndarray) -> np.ndarray:
    """(eta, 1 - eta) with both entries computed from their own numerators"""
    total = success + loss
    defined = total > ZERO_DENOMINATOR
    den = np.where(defined, total, 1.0)
    eta = np.where(defined, success / den, np.nan)
    rest = np.where(defined, loss / den, np.nan)
    return np.stack([eta, rest], axis=-1)


def _distribution(name: str, finals: np.ndarray) -> np.ndarray:
    if name in ("coherent", "projective"):
        return finals
    # eta_c from (p0, p1, p2); eta from (p_det, p_abs, p_other)
    loss = finals[..., 2] if name == "eta_c" else finals[..., 1]
    return _efficiency_pair(finals[..., 0], loss)


def _fisher_from_samples(
    samples: np.ndarray,
    is_limit: np.ndarray,
    step: float,
    epsilon: float,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Fisher information from probabilities sampled at the offset stencil

    Args:
        samples: Shape (M, 10, K): M pulse areas, stencil offsets, K outcomes
        is_limit: Shape (M,); rows evaluated as the theta -> 0 limit
        step: Central-difference step h
        epsilon: Spacing of the limit fit points

    Returns:
        (values, unreliable) each of shape (M,)
    """
    m, _, k = samples.shape
    h = step

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        center = samples[:, _CENTER]
        d_h = (samples[:, _PLUS_H] - samples[:, _MINUS_H]) / (2 * h)
        d_h2 = (samples[:, _PLUS_H2] - samples[:, _MINUS_H2]) / h
        deriv = (4.0 * d_h2 - d_h) / 3.0
        regular = fisher_information(center, deriv)

        # zeros of a component: p ~ c (theta - theta*)^2 gives 4c
        tiny = center <= PROBABILITY_FLOOR
        x = np.array([-2 * h, -h, 0.0, h, 2 * h])
        stencil = samples[:, [_MINUS_2H, _MINUS_H, _CENTER, _PLUS_H, _PLUS_2H]]
        quad = np.polyfit(x, np.nan_to_num(stencil.reshape(m, 5, k).transpose(1, 0, 2).reshape(5, m * k)), 2)[0]
        quad = quad.reshape(m, k)
        quad_ok = np.isfinite(quad) & (quad > 0.0)
        regular = regular + np.where(tiny & quad_ok, 4.0 * quad, 0.0).sum(axis=-1)
        regular_bad = np.any(tiny & ~quad_ok, axis=-1)

        # theta -> 0: f = f0 + alpha theta^2 + beta theta^4 through eps, 2 eps, 3 eps
        grid = epsilon * np.array([1.0, 2.0, 3.0])
        vander = np.stack([np.ones(3), grid**2, grid**4], axis=1)
        limit_samples = samples[:, _LIMIT].transpose(1, 0, 2).reshape(3, m * k)
        limit_samples = np.nan_to_num(limit_samples)
        coef = np.linalg.solve(vander, limit_samples)
        f0 = coef[0].reshape(m, k)
        alpha = coef[1].reshape(m, k)
        scale = np.abs(limit_samples).max(axis=0).reshape(m, k)
        vanishing = (np.abs(f0) <= LIMIT_ZERO) | (np.abs(f0) <= LIMIT_RELATIVE * scale)
        limit_values = np.where(vanishing, 4.0 * alpha, 0.0).sum(axis=-1)

    undefined = np.any(~np.isfinite(samples[:, _LIMIT]), axis=(1, 2))
    values = np.where(is_limit, limit_values, regular)
    unreliable = np.where(
        is_limit,
        undefined,
        regular_bad | np.any(~np.isfinite(samples[:, :_LIMIT.start]), axis=(1, 2)),
    )
    values = np.where(np.isfinite(values), values, np.nan)

    finite = values[np.isfinite(values)]
    worst = float(finite.min()) if finite.size else 0.0
    if worst < -NEGATIVE_TOL:
        raise NumericalError(
            "Fisher information is negative beyond tolerance",
            details={"min_value": worst},
        )
    return np.where(values < 0.0, 0.0, values), unreliable


def _limit_mask(thetas: np.ndarray) -> np.ndarray:
    r = np.mod(thetas, FOUR_PI)
    return (r < 1e-12) | (FOUR_PI - r < 1e-12)


def _resolve_names(kind: Union[None, str, ProtocolKind]) -> list[str]:
    if kind is None:
        return list(DISTRIBUTIONS)
    kind = coerce_kind(kind)
    return [name for name, k in DISTRIBUTIONS.items() if k is kind]


def _qfi_arrays(
    n: int,
    thetas: np.ndarray,
    names: list[str],
    step: float,
    epsilon: float,
    phi: float,
    phase: float,
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    offsets = _offsets(step, epsilon)
    is_limit = _limit_mask(thetas)
    chunk = max(1, CHUNK_ROWS // (offsets.size * max(1, n // 25)))
    kinds = {DISTRIBUTIONS[name] for name in names}
    out: dict[str, list[tuple[np.ndarray, np.ndarray]]] = {name: [] for name in names}

    for start in range(0, thetas.size, chunk):
        part = thetas[start : start + chunk]
        grid = part[:, None] + offsets[None, :]
        slot_thetas = np.repeat(grid[..., None], n, axis=-1)
        finals = {
            kind: final_probabilities_batch(kind, phi, slot_thetas, phase)[..., -1, :] for kind in kinds
        }
        for name in names:
            samples = _distribution(name, finals[DISTRIBUTIONS[name]])
            out[name].append(_fisher_from_samples(samples, is_limit[start : start + chunk], step, epsilon))

    return {
        name: (np.concatenate([v for v, _ in parts]), np.concatenate([u for _, u in parts]))
        for name, parts in out.items()
    }


def _check_step(step: float, epsilon: float) -> None:
    if not (step > 0 and math.isfinite(step)) or not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValidationError(
            "Derivative step and limit spacing must be positive",
            details={"step": step, "epsilon": epsilon},
        )


def qfi(
    n: int,
    theta: float,
    kind: Union[None, str, ProtocolKind] = None,
    step: float = 1e-4,
    epsilon: float = 1e-3,
    phi: Optional[float] = None,
    phase: float = math.pi / 2,
) -> QfiReport:
    """
    Fisher information of the measured distributions with respect to theta

    Derivatives are central differences at step and step/2 combined by one
    Richardson level. At theta = 0 (mod 4*pi) the value is the theta -> 0
    limit taken from a fit through epsilon, 2*epsilon, 3*epsilon.

    Args:
        n: Number of Ramsey slots
        theta: Pulse area in radians
        kind: coherent (QFI_c and QFI_eta_c), projective (QFI_proj and
            QFI_eta) or None for all four
        step: Central-difference step in radians
        epsilon: Spacing of the limit fit in radians
        phi: Beam-splitter angle (defaults to pi/(N+1))
        phase: Common pulse phase

    Returns:
        QfiReport
    """
    n = validate_positive_integer(n, "n")
    _check_step(step, epsilon)
    names = _resolve_names(kind)
    phi = optimal_phi(n) if phi is None else phi
    values = _qfi_arrays(n, np.array([float(theta)]), names, step, epsilon, phi, phase)

    def pick(name: str) -> Optional[float]:
        if name not in values:
            return None
        v = float(values[name][0][0])
        return None if math.isnan(v) else v

    unreliable = any(bool(u[0]) for _, u in values.values())
    if unreliable:
        logger.warning(f"Fisher information unreliable at N={n}, theta={theta:.6g}")

    return QfiReport(
        theta=float(theta),
        n=n,
        qfi_coherent=pick("coherent"),
        qfi_projective=pick("projective"),
        qfi_eta_c=pick("eta_c"),
        qfi_eta=pick("eta"),
        derivative_step=step,
        limit=bool(_limit_mask(np.array([float(theta)]))[0]),
        unreliable=unreliable,
    )


def qfi_scan(
    n: int,
    thetas: Iterable[float],
    kind: Union[None, str, ProtocolKind] = None,
    step: float = 1e-4,
    epsilon: float = 1e-3,
    phi: Optional[float] = None,
    phase: float = math.pi / 2,
) -> pd.DataFrame:
    """
    Fisher information over a pulse-area grid

    Returns:
        Frame with n, theta, theta_over_pi, one column per requested
        distribution and an unreliable flag
    """
    n = validate_positive_integer(n, "n")
    _check_step(step, epsilon)
    names = _resolve_names(kind)
    thetas = np.asarray(list(thetas), dtype=float)
    phi = optimal_phi(n) if phi is None else phi
    logger.debug(f"QFI scan: N={n}, {thetas.size} points, distributions={names}")
    values = _qfi_arrays(n, thetas, names, step, epsilon, phi, phase)

    frame = pd.DataFrame({"n": n, "theta": thetas, "theta_over_pi": thetas / math.pi})
    unreliable = np.zeros(thetas.shape, dtype=bool)
    for name in names:
        frame[f"qfi_{name}"] = values[name][0]
        unreliable |= values[name][1]
    frame["unreliable"] = unreliable
    if unreliable.any():
        logger.warning(f"{int(unreliable.sum())} unreliable QFI points in scan (N={n})")
    return frame


def qfi_from_approx(
    n: int,
    theta: float,
    variant: Union[str, ApproxVariant] = ApproxVariant.TRIGONOMETRIC,
    step: float = 1e-4,
) -> dict[str, float]:
    """
    Fisher information of the large-N approximate amplitudes

    Returns:
        {"qfi_coherent": ..., "qfi_eta_c": ...}

    Raises:
        DomainError: At theta = 0 (mod 4*pi), where the approximation degenerates
    """
    if _limit_mask(np.array([float(theta)]))[0]:
        raise DomainError("Approximate amplitudes are undefined at theta = 0", details={"theta": theta})
    _check_step(step, step)
    offsets = _offsets(step, step)
    probs = coefficient_arrays(n, float(theta) + offsets, variant) ** 2
    no_limit = np.array([False])
    out = {}
    for name in ("coherent", "eta_c"):
        samples = _distribution(name, probs)[None, ...]
        values, _ = _fisher_from_samples(samples, no_limit, step, step)
        out[f"qfi_{name}"] = float(values[0])
    return out


def qfi_eta_c_closed_form(n: int, theta_over_phi: float) -> float:
    """
    Large-N Fisher information of the coherent efficiency

    4N^2/(pi r^2) * K^2 / (r^2 - K^2) with r = theta/phi_N and
    K = 1 - cos(N pi/2 + pi/4)

    Raises:
        DomainError: If r <= 0 or r <= K (non-positive denominator)
    """
    n = validate_positive_integer(n, "n")
    r = float(theta_over_phi)
    k = 1.0 - math.cos(n * math.pi / 2 + math.pi / 4)
    den = r**2 - k**2
    if r <= 0.0 or den <= 0.0:
        raise DomainError(
            "Closed-form QFI_eta_c requires theta/phi_N > 1 - cos(N pi/2 + pi/4)",
            details={"n": n, "theta_over_phi": r, "bound": k},
        )
    return 4.0 * n**2 / (math.pi * r**2) * k**2 / den


def threshold_theta(
    n: int,
    p_target: float,
    kind: Union[str, ProtocolKind] = ProtocolKind.COHERENT,
    step: float = math.pi / 2000,
    phi: Optional[float] = None,
    phase: float = math.pi / 2,
    chunk: int = 512,
) -> Optional[float]:
    """
    Smallest pulse area on the grid k*step reaching p_success >= p_target

    Args:
        n: Number of Ramsey slots
        p_target: Target success probability in (0, 1)
        kind: Protocol kind (p0 for coherent, p_det for projective)
        step: Grid spacing in radians
        phi: Beam-splitter angle (defaults to pi/(N+1))
        phase: Common pulse phase
        chunk: Grid points per batched evaluation

    Returns:
        Threshold in radians, or None if no grid point in (0, 4*pi] reaches it
    """
    n = validate_positive_integer(n, "n")
    p_target = validate_probability(p_target, "p_target", open_interval=True)
    kind = coerce_kind(kind)
    if not step > 0:
        raise ValidationError("Threshold grid step must be positive", details={"step": step})
    phi = optimal_phi(n) if phi is None else phi

    count = int(math.ceil(FOUR_PI / step))
    for start in range(1, count + 1, chunk):
        ks = np.arange(start, min(start + chunk, count + 1))
        grid = ks * step
        success = final_probabilities_batch(kind, phi, np.repeat(grid[:, None], n, axis=1), phase)[:, -1, 0]
        hits = np.nonzero(success >= p_target)[0]
        if hits.size:
            return float(grid[hits[0]])

    logger.debug(f"Threshold {p_target} never reached ({kind.value}, N={n})")
    return None


def _power(log_n: np.ndarray, log_a: float, k: float) -> np.ndarray:
    return log_a + k * log_n


def _affine(n: np.ndarray, slope: float, intercept: float) -> np.ndarray:
    return slope * n + intercept


def scaling_fit(
    series: Sequence[tuple[float, float]],
    law: str = "power",
    exponent: Optional[float] = None,
) -> FitResult:
    """
    Fit value(n) by a power law (log-log least squares) or an affine law

    Args:
        series: (n, value) pairs with strictly increasing positive n
        law: "power" or "affine"
        exponent: Fixes the power-law exponent; only the coefficient is fitted

    Returns:
        FitResult with the RMS residual (in log space for power laws)

    Raises:
        ValidationError: Fewer than 4 points, non-increasing n, non-positive
            values for a power law, or an unknown law
    """
    if law not in ("power", "affine"):
        raise ValidationError("Invalid fit law", details={"value": law, "valid_values": ["power", "affine"]})
    pairs = np.asarray(list(series), dtype=float)
    if pairs.ndim != 2 or pairs.shape[0] < MIN_FIT_POINTS or pairs.shape[1] != 2:
        raise ValidationError(
            f"Scaling fit needs at least {MIN_FIT_POINTS} (n, value) points",
            details={"points": int(pairs.shape[0]) if pairs.ndim == 2 else 0},
        )
    n, values = pairs[:, 0], pairs[:, 1]
    if not np.all(np.isfinite(pairs)) or np.any(n <= 0) or np.any(np.diff(n) <= 0):
        raise ValidationError("Fit abscissae must be positive, finite and strictly increasing")

    if law == "affine":
        guess = np.polyfit(n, values, 1)
        (slope, intercept), _ = curve_fit(_affine, n, values, p0=guess)
        residual = float(np.sqrt(np.mean((_affine(n, slope, intercept) - values) ** 2)))
        return FitResult("affine", float(slope), 1.0, float(intercept), residual, int(n.size))

    if np.any(values <= 0):
        raise ValidationError("Power-law fit needs positive values")
    log_n, log_v = np.log(n), np.log(values)
    if exponent is None:
        k_guess, a_guess = np.polyfit(log_n, log_v, 1)
        (log_a, k), _ = curve_fit(_power, log_n, log_v, p0=(a_guess, k_guess))
    else:
        k = float(exponent)
        (log_a,), _ = curve_fit(lambda x, c: _power(x, c, k), log_n, log_v, p0=(float(np.mean(log_v - k * log_n)),))
    residual = float(np.sqrt(np.mean((_power(log_n, log_a, k) - log_v) ** 2)))
    if not math.isfinite(residual):
        raise NumericalError("Scaling fit residual is not finite")
    return FitResult("power", float(math.exp(log_a)), float(k), 0.0, residual, int(n.size))
