"""
Module 6: Ensembles
Seeded Monte Carlo over random pulse strengths and phases and over random
B-pulse placement, with aggregate figures of merit
"""
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.modules.gates import FOUR_PI, optimal_phi
from src.modules.protocol import ProtocolKind, coerce_kind, final_probabilities_batch, merit_arrays
from utils.errors import ValidationError
from utils.logger import get_logger
from utils.validators import validate_range

logger = get_logger(__name__)

# Reps per batched chain evaluation
CHUNK_REPS = 1000


class EnsembleSpec(BaseModel):
    """
    Random-sequence ensemble

    A range with equal ends is a fixed value. Each slot is occupied with
    probability occupancy_prob, unless occupancy_count fixes the number of
    occupied slots exactly.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    n: int = Field(ge=1)
    reps: int = Field(ge=1)
    theta_range: tuple[float, float] = (math.pi, math.pi)
    phase_range: tuple[float, float] = (math.pi / 2, math.pi / 2)
    occupancy_prob: float = Field(default=1.0, ge=0.0, le=1.0)
    occupancy_count: Optional[int] = None
    seed: int = Field(default=20240917, ge=0, lt=2**64)
    kind: ProtocolKind = ProtocolKind.COHERENT
    phi: Optional[float] = None

    @field_validator("theta_range")
    @classmethod
    def _check_theta(cls, value: tuple[float, float]) -> tuple[float, float]:
        return validate_range(value, "theta_range", lower=0.0, upper=FOUR_PI)

    @field_validator("phase_range")
    @classmethod
    def _check_phase(cls, value: tuple[float, float]) -> tuple[float, float]:
        return validate_range(value, "phase_range")

    @model_validator(mode="after")
    def _check_count(self) -> "EnsembleSpec":
        if self.occupancy_count is not None and not 0 <= self.occupancy_count <= self.n:
            raise ValidationError(
                "occupancy_count must lie in [0, N]",
                details={"occupancy_count": self.occupancy_count, "n": self.n},
            )
        return self

    @property
    def beam_splitter_angle(self) -> float:
        return optimal_phi(self.n) if self.phi is None else self.phi


@dataclass(frozen=True)
class EnsembleStats:
    """
    Means over reps and their standard errors

    Reps with an undefined efficiency are left out of the efficiency mean and
    counted in reps_excluded.
    """

    mean_efficiency: Optional[float]
    mean_pr: Optional[float]
    mean_nr: Optional[float]
    mean_absorption: float
    std_err_efficiency: Optional[float]
    std_err_pr: Optional[float]
    std_err_nr: Optional[float]
    reps_used: int
    reps_excluded: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def rep_generator(seed: int, rep: int) -> np.random.Generator:
    """Independent stream of one rep, keyed by (seed, rep) only"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def _draw(rng: np.random.Generator, lo_hi: tuple[float, float], n: int) -> np.ndarray:
    lo, hi = lo_hi
    values = rng.uniform(lo, hi, size=n)
    return np.full(n, lo) if lo == hi else values


def draw_sequence(spec: EnsembleSpec, rep: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (thetas, phases, occupied) of one rep

    Draw order is fixed (areas, phases, occupancy) so a rep's sequence does
    not depend on which other reps run or where.
    """
    rng = rep_generator(spec.seed, rep)
    thetas = _draw(rng, spec.theta_range, spec.n)
    phases = _draw(rng, spec.phase_range, spec.n)
    if spec.occupancy_count is not None:
        occupied = np.zeros(spec.n, dtype=bool)
        occupied[rng.choice(spec.n, size=spec.occupancy_count, replace=False)] = True
    else:
        occupied = rng.random(spec.n) < spec.occupancy_prob
    return thetas, phases, occupied


def _chunk_finals(spec: EnsembleSpec, start: int, stop: int) -> np.ndarray:
    draws = [draw_sequence(spec, rep) for rep in range(start, stop)]
    thetas = np.stack([d[0] for d in draws])
    phases = np.stack([d[1] for d in draws])
    occupied = np.stack([d[2] for d in draws])
    records = final_probabilities_batch(spec.kind, spec.beam_splitter_angle, thetas, phases, occupied=occupied)
    return records[:, -1, :]


def ensemble_finals(spec: EnsembleSpec, workers: int = 1) -> np.ndarray:
    """
    Final records of every rep, shape (reps, 3), in rep order

    Args:
        spec: Ensemble specification
        workers: Process count; results are identical for any value
    """
    bounds = [(s, min(s + CHUNK_REPS, spec.reps)) for s in range(0, spec.reps, CHUNK_REPS)]
    if workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_finals, [spec] * len(bounds), *zip(*bounds)))
    else:
        parts = [_chunk_finals(spec, s, e) for s, e in bounds]
    return np.concatenate(parts, axis=0)


def _mean_and_error(values: np.ndarray) -> tuple[Optional[float], Optional[float], int]:
    defined = values[~np.isnan(values)]
    if defined.size == 0:
        return None, None, 0
    err = float(np.std(defined, ddof=1) / math.sqrt(defined.size)) if defined.size > 1 else 0.0
    return float(np.mean(defined)), err, int(defined.size)


def summarize(kind: Union[str, ProtocolKind], finals: np.ndarray) -> EnsembleStats:
    """
    Aggregate per-rep final records into EnsembleStats

    finals is in rep order and every rep is seeded by (seed, rep), so the
    result is deterministic for a given spec. The statistics are np.mean and
    np.std over that array and depend on the order of the reps only through
    rounding.
    """
    kind = coerce_kind(kind)
    values = merit_arrays(kind, finals)
    mean_eta, se_eta, used = _mean_and_error(values["efficiency"])
    mean_pr, se_pr, _ = _mean_and_error(values["pr"])
    mean_nr, se_nr, _ = _mean_and_error(values["nr"])
    absorbed = finals[:, 1] if kind is ProtocolKind.PROJECTIVE else finals[:, 2]

    excluded = int(finals.shape[0] - used)
    if excluded:
        logger.warning(f"{excluded} reps excluded from the mean efficiency (zero denominator)")
    return EnsembleStats(
        mean_efficiency=mean_eta,
        mean_pr=mean_pr,
        mean_nr=mean_nr,
        mean_absorption=float(np.mean(absorbed)),
        std_err_efficiency=se_eta,
        std_err_pr=se_pr,
        std_err_nr=se_nr,
        reps_used=used,
        reps_excluded=excluded,
    )


def random_pulse_ensemble(spec: EnsembleSpec, workers: int = 1) -> EnsembleStats:
    """
    Random pulse areas and phases, drawn independently per slot and per rep

    Args:
        spec: Ensemble specification
        workers: Process count

    Returns:
        EnsembleStats
    """
    logger.debug(
        f"Random-pulse ensemble: N={spec.n}, reps={spec.reps}, theta in {spec.theta_range}, "
        f"phase in {spec.phase_range}, {spec.kind.value}"
    )
    return summarize(spec.kind, ensemble_finals(spec, workers))


def random_placement_ensemble(spec: EnsembleSpec, workers: int = 1) -> EnsembleStats:
    """
    Fixed-strength pulses placed at random in the N slots

    Raises:
        ValidationError: If the pulse area is not fixed
    """
    if spec.theta_range[0] != spec.theta_range[1]:
        raise ValidationError(
            "Random placement needs a fixed pulse area",
            details={"theta_range": list(spec.theta_range)},
        )
    mode = f"count={spec.occupancy_count}" if spec.occupancy_count is not None else f"p={spec.occupancy_prob}"
    logger.debug(f"Random-placement ensemble: N={spec.n}, reps={spec.reps}, {mode}, {spec.kind.value}")
    return summarize(spec.kind, ensemble_finals(spec, workers))
