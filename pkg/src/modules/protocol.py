"""
Module 2: Protocol
Coherent and projective interrogation chains, per-step traces, figures of
merit (efficiency, PR/NR/FPR) and row-major surface sweeps
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd

from src.modules.gates import (
    SequenceConfig,
    b_pulse_matrix,
    beam_splitter_matrix,
    optimal_phi,
)
from src.qutrit import DensityMatrix3, PureState3, clamp_probabilities
from utils.errors import NumericalError, ValidationError
from utils.logger import get_logger

logger = get_logger(__name__)

# Denominators below this make a ratio undefined rather than noise-dominated
ZERO_DENOMINATOR = 1e-14
SUM_TOL = 1e-10


class ProtocolKind(str, Enum):
    COHERENT = "coherent"
    PROJECTIVE = "projective"


PROBABILITY_COLUMNS = {
    ProtocolKind.COHERENT: ("p0", "p1", "p2"),
    ProtocolKind.PROJECTIVE: ("p_det", "p_abs", "p_other"),
}

InitialState = Union[None, PureState3, DensityMatrix3]
ChainOp = Callable[[np.ndarray], np.ndarray]
SlotOp = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class ProtocolTrace:
    """
    Per-step probability record of one protocol run

    per_step has shape (N, 3): coherent rows are (p_j0, p_j1, p_j2), projective
    rows are (p_j_det, p_j_abs, p_j_other), each sampled after the beam
    splitter that closes Ramsey step j.
    """

    kind: ProtocolKind
    per_step: np.ndarray

    @property
    def n(self) -> int:
        return int(self.per_step.shape[0])

    @property
    def final(self) -> np.ndarray:
        return self.per_step[-1]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.per_step, columns=list(PROBABILITY_COLUMNS[self.kind]))
        frame.insert(0, "step", np.arange(1, self.n + 1))
        return frame


@dataclass(frozen=True)
class MeritReport:
    """
    Confusion-matrix figures of merit

    efficiency is None when its denominator vanishes; the same holds for the
    ratios. positive_ratio + negative_ratio = 1 whenever both are defined.
    """

    kind: ProtocolKind
    efficiency: Optional[float]
    positive_ratio: Optional[float]
    negative_ratio: Optional[float]
    fpr: Optional[float]
    p_success: float
    p_absorbed: float

    @property
    def efficiency_defined(self) -> bool:
        return self.efficiency is not None


def coerce_kind(kind: Union[str, ProtocolKind]) -> ProtocolKind:
    try:
        return ProtocolKind(kind)
    except ValueError:
        raise ValidationError(
            "Invalid protocol kind",
            details={"value": kind, "valid_values": [k.value for k in ProtocolKind]},
        )


def initial_density(init: InitialState) -> np.ndarray:
    """3x3 array for an initial state; None means the ground state"""
    if init is None:
        return DensityMatrix3.ground().elements.copy()
    if isinstance(init, PureState3):
        return init.to_density().elements.copy()
    if isinstance(init, DensityMatrix3):
        return init.elements.copy()
    raise ValidationError(
        "Initial state must be a PureState3 or DensityMatrix3",
        details={"type": type(init).__name__},
    )


def _sandwich(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return u @ rho @ np.conj(np.swapaxes(u, -1, -2))


def run_chain(
    kind: ProtocolKind,
    n: int,
    splitter: ChainOp,
    pulse: SlotOp,
    rho0: np.ndarray,
) -> np.ndarray:
    """
    Drive S, (B_j, S) x N over a batch of density matrices

    Args:
        kind: Coherent (unitary) or projective (P_nonabs after every pulse)
        n: Number of Ramsey slots
        splitter: Maps a (batch, 3, 3) state through one beam splitter
        pulse: Maps a (batch, 3, 3) state through slot j (0-based)
        rho0: Initial states, shape (batch, 3, 3)

    Returns:
        Per-step records of shape (batch, N, 3)
    """
    rho = splitter(rho0)
    records = np.empty(rho.shape[:-2] + (n, 3), dtype=float)
    p_abs = np.zeros(rho.shape[:-2], dtype=float)

    for j in range(n):
        rho = pulse(rho, j)
        if kind is ProtocolKind.PROJECTIVE:
            # the conditional state stays unnormalized; its trace is the survival weight
            p_abs = p_abs + rho[..., 2, 2].real
            rho = rho.copy()
            rho[..., 2, :] = 0.0
            rho[..., :, 2] = 0.0
        rho = splitter(rho)

        if kind is ProtocolKind.COHERENT:
            records[..., j, :] = np.diagonal(rho, axis1=-2, axis2=-1).real
        else:
            p_det = rho[..., 0, 0].real
            records[..., j, 0] = p_det
            records[..., j, 1] = p_abs
            records[..., j, 2] = 1.0 - p_det - p_abs

    return clamp_probabilities(records)


def final_probabilities_batch(
    kind: Union[str, ProtocolKind],
    phi: Union[float, np.ndarray],
    thetas: np.ndarray,
    phases: Union[float, np.ndarray],
    chis: Union[float, np.ndarray] = 0.0,
    occupied: Optional[np.ndarray] = None,
    init: InitialState = None,
) -> np.ndarray:
    """
    Vectorized protocol engine over any number of leading batch axes

    Args:
        kind: Protocol kind
        phi: Beam-splitter angle, scalar or batch-shaped
        thetas: Pulse areas of shape (..., N)
        phases: Pulse phases broadcastable to thetas
        chis: Detuning phases broadcastable to thetas
        occupied: Optional occupancy mask broadcastable to thetas
        init: Initial state shared by the batch

    Returns:
        Per-step records of shape (..., N, 3)
    """
    kind = coerce_kind(kind)
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    phases = np.broadcast_to(np.asarray(phases, dtype=float), thetas.shape)
    chis = np.broadcast_to(np.asarray(chis, dtype=float), thetas.shape)
    if occupied is not None:
        mask = np.broadcast_to(np.asarray(occupied, dtype=bool), thetas.shape)
        thetas = np.where(mask, thetas, 0.0)
        chis = np.where(mask, chis, 0.0)

    batch_shape = thetas.shape[:-1]
    n = thetas.shape[-1]
    b_ops = b_pulse_matrix(thetas, phases, chis)
    s_op = beam_splitter_matrix(np.broadcast_to(np.asarray(phi, dtype=float), batch_shape))
    rho0 = np.broadcast_to(initial_density(init), batch_shape + (3, 3))

    logger.debug(f"Batched {kind.value} chain: batch={batch_shape}, N={n}")
    return run_chain(
        kind,
        n,
        splitter=lambda rho: _sandwich(s_op, rho),
        pulse=lambda rho, j: _sandwich(b_ops[..., j, :, :], rho),
        rho0=rho0,
    )


def _run(kind: ProtocolKind, cfg: SequenceConfig, init: InitialState) -> ProtocolTrace:
    thetas, phases, chis, occupied = cfg.slot_arrays()
    records = final_probabilities_batch(kind, cfg.phi, thetas, phases, chis, occupied, init)
    trace = ProtocolTrace(kind=kind, per_step=records)

    if kind is ProtocolKind.COHERENT:
        expected = float(np.trace(initial_density(init)).real)
        worst = float(np.max(np.abs(records.sum(axis=-1) - expected)))
        if worst > SUM_TOL:
            raise NumericalError(
                "Coherent step probabilities do not sum to one",
                details={"max_deviation": worst},
            )
    else:
        if np.any(np.diff(records[:, 1]) < -SUM_TOL):
            raise NumericalError("Accumulated absorption decreased between steps")
    return trace


def run_coherent(cfg: SequenceConfig, init: InitialState = None) -> ProtocolTrace:
    """
    Run the all-unitary chain S, (B_j, S) x N

    Args:
        cfg: Sequence configuration
        init: Initial state (defaults to |0>)

    Returns:
        Trace with (p_j0, p_j1, p_j2) per step; the last row is (p0, p1, p2)
    """
    return _run(ProtocolKind.COHERENT, cfg, init)


def run_projective(cfg: SequenceConfig, init: InitialState = None) -> ProtocolTrace:
    """
    Run the chain with the non-absorption projection after every B-pulse

    Args:
        cfg: Sequence configuration
        init: Initial state (defaults to |0>)

    Returns:
        Trace with (p_j_det, p_j_abs, p_j_other) per step
    """
    return _run(ProtocolKind.PROJECTIVE, cfg, init)


def run(kind: Union[str, ProtocolKind], cfg: SequenceConfig, init: InitialState = None) -> ProtocolTrace:
    return _run(coerce_kind(kind), cfg, init)


def closed_form_projective(n: int, phi: float) -> tuple[float, float]:
    """
    Projective detection and absorption probabilities for theta = pi

    p_det = cos^{2(N+1)}(phi/2), p_abs = 1 - cos^{2N}(phi/2).
    """
    c2 = math.cos(phi / 2.0) ** 2
    return c2 ** (n + 1), 1.0 - c2**n


def closed_form_projective_asymptotic(n: int) -> tuple[float, float]:
    """Large-N limit at phi = pi/(N+1): (1 - pi^2/(4N), pi^2/(4N))"""
    loss = math.pi**2 / (4.0 * n)
    return 1.0 - loss, loss


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    defined = den > ZERO_DENOMINATOR
    return np.where(defined, num / np.where(defined, den, 1.0), np.nan)


def merit_arrays(
    kind: Union[str, ProtocolKind],
    final: np.ndarray,
    dark_final: Optional[np.ndarray] = None,
) -> dict[str, np.ndarray]:
    """
    Figures of merit for stacked final records (..., 3)

    Undefined ratios are NaN here; callers turn them into explicit flags.
    """
    kind = coerce_kind(kind)
    final = np.asarray(final, dtype=float)
    success, middle, absorbed = final[..., 0], final[..., 1], final[..., 2]
    if kind is ProtocolKind.PROJECTIVE:
        # record is (p_det, p_abs, p_other)
        absorbed, middle = final[..., 1], final[..., 2]

    out = {
        "efficiency": _ratio(success, success + absorbed),
        "pr": _ratio(success, success + middle),
        "nr": _ratio(middle, success + middle),
    }
    if dark_final is not None:
        dark = np.asarray(dark_final, dtype=float)
        dark_other = dark[..., 2] if kind is ProtocolKind.PROJECTIVE else dark[..., 1]
        out["fpr"] = _ratio(dark[..., 0], dark[..., 0] + dark_other)
    return out


def _optional(value: np.ndarray) -> Optional[float]:
    v = float(value)
    return None if math.isnan(v) else v


def merits(trace: ProtocolTrace, dark_trace: Optional[ProtocolTrace] = None) -> MeritReport:
    """
    Efficiency, PR, NR and FPR of a run

    Args:
        trace: Run at the pulse area of interest
        dark_trace: Same configuration at theta = 0 (for the FPR)

    Returns:
        MeritReport with None for undefined ratios
    """
    if dark_trace is not None and dark_trace.kind is not trace.kind:
        raise ValidationError(
            "Dark trace must come from the same protocol kind",
            details={"trace": trace.kind.value, "dark_trace": dark_trace.kind.value},
        )
    values = merit_arrays(trace.kind, trace.final, None if dark_trace is None else dark_trace.final)
    absorbed = trace.final[1] if trace.kind is ProtocolKind.PROJECTIVE else trace.final[2]
    report = MeritReport(
        kind=trace.kind,
        efficiency=_optional(values["efficiency"]),
        positive_ratio=_optional(values["pr"]),
        negative_ratio=_optional(values["nr"]),
        fpr=_optional(values["fpr"]) if "fpr" in values else None,
        p_success=float(trace.final[0]),
        p_absorbed=float(absorbed),
    )
    if report.efficiency is None:
        logger.debug(f"Efficiency undefined for {trace.kind.value} run (zero denominator)")
    return report


def merits_frame(
    kind: Union[str, ProtocolKind],
    final: np.ndarray,
    dark_final: Optional[np.ndarray] = None,
) -> pd.DataFrame:
    """
    Merit columns for a sweep: nullable floats plus an efficiency_defined flag
    """
    values = merit_arrays(kind, final, dark_final)
    # NaN becomes <NA> in the nullable dtype and an empty CSV cell
    frame = pd.DataFrame({k: pd.array(np.ravel(v), dtype="Float64") for k, v in values.items()})
    frame.insert(1, "efficiency_defined", ~frame["efficiency"].isna().to_numpy())
    return frame


def phi_sensitivity(n: int, delta_phis: np.ndarray) -> pd.DataFrame:
    """
    Dark-run p1 at beam-splitter angles phi_N +/- delta

    Args:
        n: Number of Ramsey slots
        delta_phis: Angle offsets in radians

    Returns:
        Frame with delta_phi, p1_plus and p1_minus columns
    """
    delta_phis = np.asarray(delta_phis, dtype=float)
    phi_n = optimal_phi(n)
    zeros = np.zeros(delta_phis.shape + (n,))
    plus = final_probabilities_batch(ProtocolKind.COHERENT, phi_n + delta_phis, zeros, 0.0)
    minus = final_probabilities_batch(ProtocolKind.COHERENT, phi_n - delta_phis, zeros, 0.0)
    return pd.DataFrame(
        {
            "n": n,
            "delta_phi": delta_phis,
            "p1_plus": plus[:, -1, 1],
            "p1_minus": minus[:, -1, 1],
        }
    )


@dataclass(frozen=True)
class SurfaceGrid:
    """Row-major sweep output: final records per (n, theta) and optional per-step rows"""

    kind: ProtocolKind
    final: pd.DataFrame
    per_step: Optional[pd.DataFrame] = None


def _surface_rows(
    kind: ProtocolKind,
    n: int,
    phi: float,
    thetas: np.ndarray,
    phase: float,
    per_step: bool,
) -> tuple[pd.DataFrame, Optional[pd.DataFrame]]:
    slot_thetas = np.repeat(thetas[:, None], n, axis=1)
    records = final_probabilities_batch(kind, phi, slot_thetas, phase)
    dark = final_probabilities_batch(kind, phi, np.zeros((1, n)), phase)[0, -1]
    columns = PROBABILITY_COLUMNS[kind]

    final = pd.DataFrame(
        {
            "n": n,
            "phi": phi,
            "theta": thetas,
            "theta_over_phi": thetas / phi,
            columns[0]: records[:, -1, 0],
            columns[1]: records[:, -1, 1],
            columns[2]: records[:, -1, 2],
        }
    )
    merit = merits_frame(kind, records[:, -1, :], np.broadcast_to(dark, (len(thetas), 3)))
    final = pd.concat([final, merit], axis=1)

    steps = None
    if per_step:
        steps = pd.DataFrame(
            {
                "n": n,
                "theta": np.repeat(thetas, n),
                "step": np.tile(np.arange(1, n + 1), len(thetas)),
                columns[0]: records[:, :, 0].ravel(),
                columns[1]: records[:, :, 1].ravel(),
                columns[2]: records[:, :, 2].ravel(),
            }
        )
    return final, steps


def surface_sweep(
    n_values: list[int],
    theta_values: np.ndarray,
    kind: Union[str, ProtocolKind],
    phi_rule: Callable[[int], float] = optimal_phi,
    phase: float = math.pi / 2,
    per_step: bool = False,
    workers: int = 1,
) -> SurfaceGrid:
    """
    Final (and optionally per-step) probabilities over an (N, theta) grid

    Rows are ordered by N, then theta, whatever the worker count.

    Args:
        n_values: Increasing N values
        theta_values: Increasing pulse areas (uniform pulses)
        kind: Protocol kind
        phi_rule: Beam-splitter angle as a function of N
        phase: Common pulse phase
        per_step: Also return every step's record
        workers: Process count for the N axis

    Returns:
        SurfaceGrid
    """
    kind = coerce_kind(kind)
    n_values = [int(n) for n in n_values]
    if any(b <= a for a, b in zip(n_values, n_values[1:])) or not n_values:
        raise ValidationError("N values must be a non-empty increasing list", details={"n": n_values})
    thetas = np.asarray(theta_values, dtype=float)
    if thetas.ndim != 1 or thetas.size == 0 or np.any(np.diff(thetas) < 0):
        raise ValidationError("Theta values must be a non-empty monotone series")

    args = [(kind, n, phi_rule(n), thetas, phase, per_step) for n in n_values]
    logger.info(f"Surface sweep ({kind.value}): {len(n_values)} N values x {thetas.size} theta values")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_surface_rows, *zip(*args)))
    else:
        parts = [_surface_rows(*a) for a in args]

    final = pd.concat([p[0] for p in parts], ignore_index=True)
    steps = pd.concat([p[1] for p in parts], ignore_index=True) if per_step else None
    return SurfaceGrid(kind=kind, final=final, per_step=steps)
