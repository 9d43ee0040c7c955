"""
Tests for the figure-data builders, run on small grids
"""
import math

import numpy as np
import pandas as pd
import pytest

from src.modules import figures
from src.modules.gates import SequenceConfig
from src.modules.open_system import NoiseModel
from src.modules.protocol import ProtocolKind, run_coherent
from utils.errors import ValidationError


def test_build_tables():
    """One row per N with the table values"""
    out = figures.build_tables()
    assert set(out) == {"tables_coherent", "tables_projective"}
    coherent, projective = out["tables_coherent"], out["tables_projective"]
    assert coherent["n"].tolist() == [1, 2, 3, 4]
    np.testing.assert_allclose(coherent["p0"], [0.25, 0.8091345264, 0.9983036014, 0.8956616508], atol=1e-9)
    np.testing.assert_allclose(projective["p_det"], [0.25, 0.421875, 0.5307900429, 0.6054290499], atol=1e-9)
    assert projective["efficiency_defined"].all()


def test_build_tables_fixed_phi():
    """A configured beam-splitter angle replaces pi/(N+1) for every N"""
    out = figures.build_tables(n_max=3, phi=0.5)
    coherent = out["tables_coherent"]
    assert coherent["phi"].tolist() == [0.5, 0.5, 0.5]
    expected = run_coherent(SequenceConfig.uniform(3, math.pi, phi=0.5)).final
    np.testing.assert_allclose(coherent[["p0", "p1", "p2"]].iloc[2], expected, atol=1e-12)
    with pytest.raises(ValidationError):
        figures.build_tables(phi=4.0)
    with pytest.raises(ValidationError):
        figures.build_successive(n_max=2, phi=0.0)


def test_build_large_n():
    """Approximate columns are empty at theta = 0; plateau flags bracket [4, 4N]"""
    frame = figures.build_large_n(n=5, points=25)["large_n"]
    assert len(frame) == 25
    assert frame["theta_over_phi"].iloc[-1] == pytest.approx(24.0)
    assert pd.isna(frame["p0_approx"].iloc[0])
    on = frame[frame["on_plateau"]]
    assert on["theta_over_phi"].min() >= 4.0 - 1e-9
    assert on["theta_over_phi"].max() <= 20.0 + 1e-9


def test_threshold_table_marks_unreached():
    table = figures.threshold_table([2], targets=(0.85,), kinds=(ProtocolKind.PROJECTIVE,))
    assert table["reached"].tolist() == [False]
    assert pd.isna(table["theta"].iloc[0])


def test_build_threshold():
    """Surfaces, threshold points and one a/N fit per target"""
    out = figures.build_threshold(
        n_max=3, theta_points=5, fit_n_min=10, fit_n_max=25, fit_stride=5, step=math.pi / 200
    )
    assert len(out["threshold_surface_coherent"]) == 3 * 5
    assert len(out["threshold_points"]) == 2 * 4 * 3
    fits = out["threshold_fits"]
    assert fits["target"].tolist() == [0.25, 0.5, 0.85, 0.95]
    assert (fits["coefficient"] > 0).all()
    assert (fits["exponent"] == -1.0).all()


def test_build_successive():
    out = figures.build_successive(n_max=3)
    frame = out["successive_coherent"]
    assert len(frame) == 1 + 2 + 3
    assert list(frame.columns) == ["n", "theta", "step", "p0", "p1", "p2"]
    assert "p_det" in out["successive_projective"].columns


def test_build_phi_scan():
    out = figures.build_phi_scan(n_max=3, phi_points=10, delta_points=5)
    assert len(out["phi_scan"]) == 30
    best = out["efficiency_at_pi"]
    assert best["efficiency_coherent"].iloc[1] == pytest.approx(0.8118668429, abs=1e-9)
    assert best["efficiency_projective"].iloc[1] == pytest.approx(0.4909090909, abs=1e-9)
    assert len(out["phi_sensitivity"]) == 5


def test_build_phase_scan():
    out = figures.build_phase_scan(panel_n=(2,), theta_points=5, delta_points=3, n_max=2, reps=20)
    assert len(out["phase_scan_surface"]) == 3 * 5
    assert len(out["phase_scan_sections"]) == 5
    ensembles = out["phase_scan_ensembles"]
    assert len(ensembles) == len(figures.ENSEMBLE_SCENARIOS) * 2
    fixed = ensembles[(ensembles["scenario"] == "fixed") & (ensembles["kind"] == "coherent")]
    assert fixed["reps_used"].tolist() == [1, 1]


def test_build_random_placement():
    frame = figures.build_random_placement(n_max=3, occupancy_probs=(1.0, 0.5), reps=10)["random_placement"]
    assert len(frame) == 2 * 2 * 3
    full = frame[(frame["kind"] == "coherent") & (frame["occupancy_prob"] == 1.0)]
    assert full["reps_used"].tolist() == [10, 10, 10]


def test_build_thermal():
    """Zero temperature has no dark counts"""
    frame = figures.build_thermal(n_values=(2,), points=3)["thermal"]
    assert len(frame) == 3 * 2
    cold = frame[frame["temperature_mk"] == 0.0]
    np.testing.assert_allclose(cold["dark_count"], 0.0, atol=1e-15)
    hot = frame[frame["temperature_mk"] == 100.0]
    assert (hot["dark_count"] > 0.02).all()


def test_build_decoherence():
    """Zero rates reproduce the unitary efficiency"""
    noise = NoiseModel(steps_per_pulse=50)
    out = figures.build_decoherence(noise, n=2, grid_points=2, trace_n_max=2)
    grid = out["decoherence_grid"]
    assert len(grid) == 4
    assert grid["efficiency_coherent"].iloc[0] == pytest.approx(0.8118668429, abs=1e-5)
    assert len(out["decoherence_transmon"]) == 2
    assert out["decoherence_traces"]["n"].tolist() == [1, 2]


def test_build_decoherence_from_thermal_state():
    """At zero rates the dark count is the thermal |1> population swapped into |0>"""
    noise = NoiseModel(gamma10_mhz=0.0, gamma21_mhz=0.0, steps_per_pulse=20)
    out = figures.build_decoherence(noise, n=2, grid_points=2, trace_n_max=2, temperature_mk=100.0)
    traces = out["decoherence_traces"]
    np.testing.assert_allclose(traces["dark_count"], 0.031, atol=0.002)
    cold = figures.build_decoherence(noise, n=2, grid_points=2, trace_n_max=2)["decoherence_traces"]
    np.testing.assert_allclose(cold["dark_count"], 0.0, atol=1e-9)


@pytest.mark.slow
def test_transmon_decoherence_values():
    """N = 25 grid means over [0, 0.2] MHz and the FPR ceiling on Gamma21 = 2 Gamma10"""
    out = figures.build_decoherence(NoiseModel(), n=25, grid_points=11, trace_n_max=1)
    grid = out["decoherence_grid"]
    assert grid["efficiency_coherent"].mean() == pytest.approx(0.99659, abs=5e-5)
    assert grid["efficiency_projective"].mean() == pytest.approx(0.91316, abs=5e-5)
    transmon = out["decoherence_transmon"]
    assert transmon["fpr_coherent"].max() == pytest.approx(0.26080, abs=5e-5)
    np.testing.assert_allclose(
        transmon["fpr_projective"].to_numpy(dtype=float), transmon["fpr_coherent"].to_numpy(dtype=float), atol=1e-9
    )


def test_build_detuning():
    """The chi = 0 row is the resonant protocol"""
    out = figures.build_detuning(n_max=2, chi_points=41)
    frame = out["detuning_map"]
    assert len(frame) == 2 * 41
    centre = frame[(frame["n"] == 2) & np.isclose(frame["chi"], 0.0)]
    resonant = run_coherent(SequenceConfig.uniform(2, math.pi / 2)).final[0]
    assert centre["p0"].iloc[0] == pytest.approx(resonant, abs=1e-12)
    assert list(out["detuning_bandwidth"].columns) == ["n", "bandwidth_coherent", "bandwidth_two_level"]


def test_build_qfi_small():
    out = figures.build_qfi(
        panel_n=(2, 3),
        theta_points=9,
        fit_n_min=10,
        fit_n_max=55,
        fit_stride=5,
        pi_n_values=(10, 20, 30, 40),
    )
    assert len(out["qfi_curves"]) == 2 * 9
    assert len(out["qfi_scaling"]) == 10
    assert out["qfi_fits"]["quantity"].tolist() == [
        "qfi_coherent_limit",
        "qfi_eta_c_limit",
        "qfi_eta_limit",
        "qfi_coherent_4phi",
        "qfi_projective_pi",
    ]
