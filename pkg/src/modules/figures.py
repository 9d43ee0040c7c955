"""
Module 7: Figure Data
Per-artifact data builders for the command line. Every builder returns a
mapping of artifact name to DataFrame, axes first, rows in a fixed order.
"""
import math
from functools import partial
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from src.modules import asymptotics, ensembles, metrology, open_system, protocol
from src.modules.gates import FOUR_PI, SequenceConfig, optimal_phi
from src.modules.protocol import PROBABILITY_COLUMNS, ProtocolKind
from utils.errors import ValidationError
from utils.logger import get_logger
from utils.validators import validate_increasing, validate_positive_integer

logger = get_logger(__name__)

Artifacts = dict[str, pd.DataFrame]

KINDS = (ProtocolKind.COHERENT, ProtocolKind.PROJECTIVE)
THRESHOLD_TARGETS = (0.25, 0.5, 0.85, 0.95)
OCCUPANCY_PROBS = (1.0, 0.5, 0.25, 0.125)

# (label, kind, theta_range, phase_range) of the mean-efficiency curves
ENSEMBLE_SCENARIOS = (
    ("fixed", ProtocolKind.COHERENT, (math.pi, math.pi), (0.0, 0.0)),
    ("r_theta", ProtocolKind.COHERENT, (0.0, math.pi), (0.0, 0.0)),
    ("r_phase_quarter", ProtocolKind.COHERENT, (math.pi, math.pi), (0.0, math.pi / 4)),
    ("r_phase", ProtocolKind.COHERENT, (math.pi, math.pi), (0.0, math.pi)),
    ("r_theta_r_phase", ProtocolKind.COHERENT, (0.0, math.pi), (0.0, math.pi)),
    ("fixed", ProtocolKind.PROJECTIVE, (math.pi, math.pi), (0.0, 0.0)),
    ("r_theta", ProtocolKind.PROJECTIVE, (0.0, math.pi), (0.0, 0.0)),
)


def _n_range(n_max: int, n_min: int = 1, stride: int = 1) -> list[int]:
    n_max = validate_positive_integer(n_max, "n_max")
    n_min = validate_positive_integer(n_min, "n_min")
    if n_min > n_max:
        raise ValidationError("n_min must not exceed n_max", details={"n_min": n_min, "n_max": n_max})
    return list(range(n_min, n_max + 1, validate_positive_integer(stride, "stride")))


def _nullable(values: np.ndarray) -> pd.api.extensions.ExtensionArray:
    return pd.array(np.ravel(np.asarray(values, dtype=float)), dtype="Float64")


def _fixed_phi(phi: float, n: int) -> float:
    return phi


def phi_rule_for(phi: Optional[float] = None) -> Callable[[int], float]:
    """pi/(N+1) when phi is None, otherwise the same angle for every N"""
    if phi is None:
        return optimal_phi
    if not (math.isfinite(phi) and 0.0 < phi <= math.pi):
        raise ValidationError("Beam-splitter angle must lie in (0, pi]", details={"phi": phi})
    return partial(_fixed_phi, float(phi))


def build_tables(
    n_max: int = 4,
    theta: float = math.pi,
    phase: float = math.pi / 2,
    phi: Optional[float] = None,
) -> Artifacts:
    """Final probabilities and figures of merit for N = 1..n_max, at phi_N unless phi is given"""
    n_values = _n_range(n_max)
    rule = phi_rule_for(phi)
    return {
        f"tables_{kind.value}": protocol.surface_sweep(
            n_values, np.array([theta]), kind, phi_rule=rule, phase=phase
        ).final
        for kind in KINDS
    }


def build_large_n(n: int = 25, points: int = 401, variant: str = "trigonometric") -> Artifacts:
    """
    Exact and approximate coherent probabilities against theta/phi_N

    The grid spans theta/phi_N in [0, 4(N+1)], i.e. theta in [0, 4*pi].
    Approximate columns are empty where the approximation is undefined.
    """
    n = validate_positive_integer(n, "n")
    phi = optimal_phi(n)
    ratios = np.linspace(0.0, 4.0 * (n + 1), validate_positive_integer(points, "points"))
    thetas = ratios * phi
    exact = protocol.final_probabilities_batch(
        ProtocolKind.COHERENT, phi, np.repeat(thetas[:, None], n, axis=1), math.pi / 2
    )[:, -1, :]
    approx = asymptotics.coefficient_arrays(n, thetas, variant) ** 2
    approx = np.where(np.isfinite(approx), approx, np.nan)
    lo, hi = asymptotics.plateau_bounds(n)

    frame = pd.DataFrame(
        {
            "n": n,
            "theta_over_phi": ratios,
            "theta": thetas,
            "p0": exact[:, 0],
            "p1": exact[:, 1],
            "p2": exact[:, 2],
            "p0_approx": _nullable(approx[:, 0]),
            "p1_approx": _nullable(approx[:, 1]),
            "p2_approx": _nullable(approx[:, 2]),
            "on_plateau": (thetas >= lo * (1 - 1e-12)) & (thetas <= hi * (1 + 1e-12)),
        }
    )
    return {"large_n": frame}


def threshold_table(
    n_values: Iterable[int],
    targets: Sequence[float] = THRESHOLD_TARGETS,
    kinds: Sequence[ProtocolKind] = KINDS,
    step: float = math.pi / 2000,
) -> pd.DataFrame:
    """Threshold pulse areas per (kind, target, N); missing thresholds are empty cells"""
    rows = []
    for kind in kinds:
        for target in targets:
            for n in n_values:
                theta = metrology.threshold_theta(n, target, kind, step=step)
                rows.append(
                    {
                        "kind": kind.value,
                        "target": target,
                        "n": n,
                        "theta": np.nan if theta is None else theta,
                        "theta_over_pi": np.nan if theta is None else theta / math.pi,
                        "reached": theta is not None,
                    }
                )
    frame = pd.DataFrame(rows)
    frame["theta"] = _nullable(frame["theta"].to_numpy())
    frame["theta_over_pi"] = _nullable(frame["theta_over_pi"].to_numpy())
    return frame


def threshold_fits(table: pd.DataFrame, kind: ProtocolKind = ProtocolKind.COHERENT) -> pd.DataFrame:
    """theta_th/pi = a/N fits, one row per target"""
    rows = []
    part = table[(table["kind"] == kind.value) & table["reached"]]
    for target, group in part.groupby("target", sort=True):
        series = list(zip(group["n"].astype(float), group["theta_over_pi"].astype(float)))
        fit = metrology.scaling_fit(series, law="power", exponent=-1.0)
        rows.append(
            {
                "kind": kind.value,
                "target": target,
                "coefficient": fit.coefficient,
                "exponent": fit.exponent,
                "residual": fit.residual,
                "points": fit.points,
            }
        )
    return pd.DataFrame(rows)


def build_threshold(
    n_max: int = 25,
    theta_points: int = 201,
    fit_n_min: int = 25,
    fit_n_max: int = 100,
    fit_stride: int = 5,
    step: float = math.pi / 2000,
    workers: int = 1,
) -> Artifacts:
    """Success-probability surfaces over (N, theta in [0, 2 pi]), thresholds and a/N fits"""
    thetas = np.linspace(0.0, 2.0 * math.pi, validate_positive_integer(theta_points, "theta_points"))
    out: Artifacts = {}
    for kind in KINDS:
        out[f"threshold_surface_{kind.value}"] = protocol.surface_sweep(
            _n_range(n_max), thetas, kind, workers=workers
        ).final

    table = threshold_table(_n_range(n_max), step=step)
    out["threshold_points"] = table
    fit_table = threshold_table(
        _n_range(fit_n_max, fit_n_min, fit_stride), kinds=(ProtocolKind.COHERENT,), step=step
    )
    out["threshold_fits"] = threshold_fits(fit_table)
    return out


def build_successive(
    n_max: int = 25,
    theta: float = math.pi,
    phi: Optional[float] = None,
    workers: int = 1,
) -> Artifacts:
    """Per-step probability maps for j in [1, N], N in [1, n_max]"""
    rule = phi_rule_for(phi)
    return {
        f"successive_{kind.value}": protocol.surface_sweep(
            _n_range(n_max), np.array([theta]), kind, phi_rule=rule, per_step=True, workers=workers
        ).per_step
        for kind in KINDS
    }


def build_qfi(
    panel_n: Sequence[int] = (2, 5, 25),
    theta_points: int = 401,
    fit_n_min: int = 25,
    fit_n_max: int = 100,
    fit_stride: int = 5,
    pi_n_values: Sequence[int] = (200, 400, 600, 800, 1000),
    step: float = 1e-4,
    epsilon: float = 1e-3,
) -> Artifacts:
    """
    Fisher-information curves, scaling data and fits

    Artifacts:
        qfi_curves: all four quantities over theta in [0, 4 pi] per panel N
        qfi_scaling: theta -> 0 limits and values at 4 phi_N and pi per N
        qfi_fits: N^2 fits of QFI_c and QFI_eta_c, affine QFI_eta, 1/N QFI_proj(pi)
    """
    panel_n = [int(v) for v in validate_increasing(panel_n, "panel_n")]
    thetas = np.linspace(0.0, FOUR_PI, validate_positive_integer(theta_points, "theta_points"))
    curves = pd.concat(
        [metrology.qfi_scan(n, thetas, step=step, epsilon=epsilon) for n in panel_n],
        ignore_index=True,
    )

    rows = []
    for n in _n_range(fit_n_max, fit_n_min, fit_stride):
        limit = metrology.qfi(n, 0.0, step=step, epsilon=epsilon)
        low = metrology.qfi(n, 4.0 * optimal_phi(n), kind=ProtocolKind.COHERENT, step=step)
        at_pi = metrology.qfi(n, math.pi, step=step)
        rows.append(
            {
                "n": n,
                "qfi_coherent_limit": limit.qfi_coherent,
                "qfi_eta_c_limit": limit.qfi_eta_c,
                "qfi_eta_limit": limit.qfi_eta,
                "qfi_projective_limit": limit.qfi_projective,
                "qfi_coherent_4phi": low.qfi_coherent,
                "qfi_coherent_pi": at_pi.qfi_coherent,
                "qfi_eta_c_pi": at_pi.qfi_eta_c,
                "qfi_projective_pi": at_pi.qfi_projective,
            }
        )
    scaling = pd.DataFrame(rows)

    def fit_row(quantity: str, frame: pd.DataFrame, law: str, exponent: Optional[float] = None) -> dict:
        series = list(zip(frame["n"].astype(float), frame[quantity].astype(float)))
        fit = metrology.scaling_fit(series, law=law, exponent=exponent)
        return {
            "quantity": quantity,
            "law": fit.law,
            "coefficient": fit.coefficient,
            "exponent": fit.exponent,
            "intercept": fit.intercept,
            "residual": fit.residual,
            "points": fit.points,
        }

    fits = [
        fit_row("qfi_coherent_limit", scaling, "power"),
        fit_row("qfi_eta_c_limit", scaling[scaling["n"] > 35], "power"),
        fit_row("qfi_eta_limit", scaling, "affine"),
        fit_row("qfi_coherent_4phi", scaling, "power"),
    ]
    if pi_n_values:
        pi_rows = pd.DataFrame(
            {
                "n": [int(n) for n in pi_n_values],
                "qfi_projective_pi": [
                    metrology.qfi(int(n), math.pi, kind=ProtocolKind.PROJECTIVE, step=step).qfi_projective
                    for n in pi_n_values
                ],
            }
        )
        fits.append(fit_row("qfi_projective_pi", pi_rows, "power"))

    return {"qfi_curves": curves, "qfi_scaling": scaling, "qfi_fits": pd.DataFrame(fits)}


def build_phi_scan(n_max: int = 25, phi_points: int = 200, delta_points: int = 51) -> Artifacts:
    """
    Beam-splitter angle scans

    Artifacts:
        phi_scan: dark p1 and FPR, and both efficiencies at theta = pi, over (N, phi)
        efficiency_at_pi: both efficiencies at phi_N per N
        phi_sensitivity: dark p1 at phi_N +/- delta for N = n_max
    """
    phis = np.linspace(math.pi / phi_points, math.pi, validate_positive_integer(phi_points, "phi_points"))
    parts, optimal = [], []
    for n in _n_range(n_max):
        zeros = np.zeros((phis.size, n))
        pis = np.full((phis.size, n), math.pi)
        frame = pd.DataFrame({"n": n, "phi": phis, "phi_over_phi_n": phis / optimal_phi(n)})
        for kind in KINDS:
            dark = protocol.final_probabilities_batch(kind, phis, zeros, math.pi / 2)[:, -1, :]
            lit = protocol.final_probabilities_batch(kind, phis, pis, math.pi / 2)[:, -1, :]
            values = protocol.merit_arrays(kind, lit, dark)
            if kind is ProtocolKind.COHERENT:
                frame["p1_dark"] = dark[:, 1]
                frame["fpr"] = _nullable(values["fpr"])
            frame[f"efficiency_{kind.value}"] = _nullable(values["efficiency"])

        best = {"n": n, "phi": optimal_phi(n)}
        for kind in KINDS:
            report = protocol.merits(protocol.run(kind, SequenceConfig.uniform(n, math.pi)))
            best[f"efficiency_{kind.value}"] = report.efficiency
        parts.append(frame)
        optimal.append(best)

    deltas = np.linspace(0.0, optimal_phi(n_max) / 2, validate_positive_integer(delta_points, "delta_points"))
    return {
        "phi_scan": pd.concat(parts, ignore_index=True),
        "efficiency_at_pi": pd.DataFrame(optimal),
        "phi_sensitivity": protocol.phi_sensitivity(n_max, deltas),
    }


def build_phase_scan(
    panel_n: Sequence[int] = (2, 5, 25),
    theta_points: int = 101,
    delta_points: int = 101,
    n_max: int = 25,
    reps: int = 10_000,
    seed: int = 20240917,
    workers: int = 1,
) -> Artifacts:
    """
    Consecutive-phase-difference surfaces and random-pulse mean efficiencies

    Artifacts:
        phase_scan_surface: eta_c over (N, delta_phase, theta in [0, 4 pi])
        phase_scan_sections: eta_c at delta_phase = 0 and projective eta against theta
        phase_scan_ensembles: mean efficiency per scenario and N
    """
    panel_n = [int(v) for v in validate_increasing(panel_n, "panel_n")]
    thetas = np.linspace(0.0, FOUR_PI, validate_positive_integer(theta_points, "theta_points"))
    deltas = np.linspace(0.0, math.pi, validate_positive_integer(delta_points, "delta_points"))

    surfaces, sections = [], []
    for n in panel_n:
        phi = optimal_phi(n)
        slot_thetas = np.broadcast_to(thetas[None, :, None], (deltas.size, thetas.size, n))
        phases = deltas[:, None, None] * np.arange(n)[None, None, :]
        final = protocol.final_probabilities_batch(ProtocolKind.COHERENT, phi, slot_thetas, phases)[..., -1, :]
        eta_c = protocol.merit_arrays(ProtocolKind.COHERENT, final)["efficiency"]
        surfaces.append(
            pd.DataFrame(
                {
                    "n": n,
                    "delta_phase": np.repeat(deltas, thetas.size),
                    "theta": np.tile(thetas, deltas.size),
                    "efficiency": _nullable(eta_c),
                }
            )
        )

        section = pd.DataFrame({"n": n, "theta": thetas})
        for kind in KINDS:
            records = protocol.final_probabilities_batch(kind, phi, slot_thetas[0], 0.0)[:, -1, :]
            section[f"efficiency_{kind.value}"] = _nullable(protocol.merit_arrays(kind, records)["efficiency"])
        sections.append(section)

    rows = []
    for label, kind, theta_range, phase_range in ENSEMBLE_SCENARIOS:
        fixed = theta_range[0] == theta_range[1] and phase_range[0] == phase_range[1]
        for n in _n_range(n_max):
            spec = ensembles.EnsembleSpec(
                n=n,
                reps=1 if fixed else reps,
                theta_range=theta_range,
                phase_range=phase_range,
                seed=seed,
                kind=kind,
            )
            stats = ensembles.random_pulse_ensemble(spec, workers=workers)
            rows.append(
                {
                    "scenario": label,
                    "kind": kind.value,
                    "n": n,
                    "mean_efficiency": stats.mean_efficiency,
                    "std_err_efficiency": stats.std_err_efficiency,
                    "reps_used": stats.reps_used,
                    "reps_excluded": stats.reps_excluded,
                }
            )
    ensemble_frame = pd.DataFrame(rows)
    for column in ("mean_efficiency", "std_err_efficiency"):
        ensemble_frame[column] = _nullable(ensemble_frame[column].to_numpy(dtype=float, na_value=np.nan))

    return {
        "phase_scan_surface": pd.concat(surfaces, ignore_index=True),
        "phase_scan_sections": pd.concat(sections, ignore_index=True),
        "phase_scan_ensembles": ensemble_frame,
    }


def build_random_placement(
    n_max: int = 25,
    occupancy_probs: Sequence[float] = OCCUPANCY_PROBS,
    reps: int = 400,
    theta: float = math.pi,
    seed: int = 20240917,
    workers: int = 1,
) -> Artifacts:
    """Mean PR and NR against N for pulses placed at random slots"""
    rows = []
    for kind in KINDS:
        for prob in occupancy_probs:
            for n in _n_range(n_max):
                spec = ensembles.EnsembleSpec(
                    n=n,
                    reps=reps,
                    theta_range=(theta, theta),
                    occupancy_prob=prob,
                    seed=seed,
                    kind=kind,
                )
                stats = ensembles.random_placement_ensemble(spec, workers=workers)
                rows.append({"kind": kind.value, "occupancy_prob": prob, "n": n, **stats.to_dict()})
    frame = pd.DataFrame(rows)
    for column in ("mean_efficiency", "mean_pr", "mean_nr", "std_err_efficiency", "std_err_pr", "std_err_nr"):
        frame[column] = _nullable(frame[column].to_numpy(dtype=float, na_value=np.nan))
    return {"random_placement": frame}


def build_thermal(
    n_values: Sequence[int] = (25, 250),
    t_max_mk: float = 100.0,
    points: int = 101,
    omega01_ghz: float = 7.20,
    omega12_ghz: float = 6.85,
) -> Artifacts:
    """Efficiencies at theta = pi and dark counts for thermal initial states"""
    temperatures = np.linspace(0.0, t_max_mk, validate_positive_integer(points, "points"))
    rows = []
    for t_mk in temperatures:
        spec = open_system.ThermalSpec(temperature_mk=t_mk, omega01_ghz=omega01_ghz, omega12_ghz=omega12_ghz)
        init = open_system.thermal_state(spec)
        for n in n_values:
            slot_thetas = np.array([[math.pi] * n, [0.0] * n])
            for kind in KINDS:
                lit, dark = protocol.final_probabilities_batch(kind, optimal_phi(n), slot_thetas, math.pi / 2, init=init)[
                    :, -1, :
                ]
                values = protocol.merit_arrays(kind, lit)
                rows.append(
                    {
                        "temperature_mk": t_mk,
                        "n": int(n),
                        "kind": kind.value,
                        "efficiency": float(values["efficiency"]),
                        "p_success": lit[0],
                        "dark_count": dark[0],
                    }
                )
    return {"thermal": pd.DataFrame(rows)}


def build_decoherence(
    noise: open_system.NoiseModel,
    n: int = 25,
    gamma_max_mhz: float = 0.2,
    grid_points: int = 21,
    trace_n_max: int = 50,
    temperature_mk: float = 0.0,
    omega01_ghz: float = 7.20,
    omega12_ghz: float = 6.85,
) -> Artifacts:
    """
    Relaxation-rate grids at theta = pi, the transmon line and per-N traces

    Every run starts from the thermal state at temperature_mk (the ground
    state at 0).

    Artifacts:
        decoherence_grid: eta_c and eta over (Gamma10, Gamma21) for N = n
        decoherence_transmon: both efficiencies and dark-count FPRs on Gamma21 = 2 Gamma10
        decoherence_traces: p0(pi), p1(0), p_det(pi), p_det(0) for N = 1..trace_n_max
            at the rates of `noise`
    """
    init = open_system.thermal_state(
        open_system.ThermalSpec(temperature_mk=temperature_mk, omega01_ghz=omega01_ghz, omega12_ghz=omega12_ghz)
    )
    rates = np.linspace(0.0, gamma_max_mhz, validate_positive_integer(grid_points, "grid_points"))
    g10, g21 = np.meshgrid(rates, rates, indexing="ij")
    cfg = SequenceConfig.uniform(n, math.pi)
    grid = pd.DataFrame({"gamma10_mhz": g10.ravel(), "gamma21_mhz": g21.ravel()})
    transmon = pd.DataFrame({"gamma10_mhz": rates, "gamma21_mhz": 2.0 * rates})

    for kind in KINDS:
        lit = open_system.noisy_final_batch(kind, cfg, g10.ravel(), g21.ravel(), noise, init)[:, -1, :]
        grid[f"efficiency_{kind.value}"] = _nullable(protocol.merit_arrays(kind, lit)["efficiency"])

        line_lit = open_system.noisy_final_batch(kind, cfg, rates, 2.0 * rates, noise, init)[:, -1, :]
        line_dark = open_system.noisy_final_batch(kind, cfg.dark(), rates, 2.0 * rates, noise, init)[:, -1, :]
        values = protocol.merit_arrays(kind, line_lit, line_dark)
        transmon[f"efficiency_{kind.value}"] = _nullable(values["efficiency"])
        transmon[f"fpr_{kind.value}"] = _nullable(values["fpr"])
    logger.info(
        f"Decoherence grid means: eta_c={grid['efficiency_coherent'].mean():.4f}, "
        f"eta={grid['efficiency_projective'].mean():.4f}"
    )

    rows = []
    for m in _n_range(trace_n_max):
        trace_cfg = SequenceConfig.uniform(m, math.pi)
        coherent = open_system.run_coherent_noisy(trace_cfg, noise, init).final
        coherent_dark = open_system.run_coherent_noisy(trace_cfg.dark(), noise, init).final
        projective = open_system.run_projective_noisy(trace_cfg, noise, init).final
        projective_dark = open_system.run_projective_noisy(trace_cfg.dark(), noise, init).final
        rows.append(
            {
                "n": m,
                "p0_pi": coherent[0],
                "p1_dark": coherent_dark[1],
                "dark_count": coherent_dark[0],
                "p_det_pi": projective[0],
                "p_det_dark": projective_dark[0],
            }
        )
    return {
        "decoherence_grid": grid,
        "decoherence_transmon": transmon,
        "decoherence_traces": pd.DataFrame(rows),
    }


def build_detuning(
    n_max: int = 25,
    theta: float = math.pi / 2,
    chi_max: float = 10.0,
    chi_points: int = 401,
) -> Artifacts:
    """
    Detuned B-pulses: success maps for both protocols, the two-level signal
    and the half-maximum bandwidth of each against N
    """
    chis = np.linspace(-chi_max, chi_max, validate_positive_integer(chi_points, "chi_points"))
    maps, bands = [], []
    for n in _n_range(n_max):
        frame = pd.DataFrame({"n": n, "chi": chis})
        for kind in KINDS:
            frame[PROBABILITY_COLUMNS[kind][0]] = open_system.detuning_map(n, theta, chis, kind=kind)
        frame["two_level"] = open_system.two_level_detuned_signal(theta, chis, n)
        maps.append(frame)
        bands.append(
            {
                "n": n,
                "bandwidth_coherent": open_system.half_max_bandwidth(chis, frame["p0"].to_numpy()),
                "bandwidth_two_level": open_system.half_max_bandwidth(chis, frame["two_level"].to_numpy()),
            }
        )
    return {"detuning_map": pd.concat(maps, ignore_index=True), "detuning_bandwidth": pd.DataFrame(bands)}
