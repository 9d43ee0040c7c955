"""
Tests for golden-file regression
"""
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.goldens import (
    GoldenEntry,
    GoldenManifest,
    Tolerance,
    check_artifacts,
    compare_frames,
    golden_path,
    recorded_parameters,
    update_goldens,
)
from utils.errors import ConfigurationError, GoldenMismatchError

HEADER = {"tool": "ifd-sim", "command": "demo"}


def _frame(scale: float = 1.0) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "n": [1, 2, 3],
            "p0": np.array([0.25, 0.5, np.nan]) * scale,
            "defined": [True, True, False],
        }
    )


def test_compare_frames_tolerances():
    """Within rtol/atol passes, beyond fails; NaN matches NaN"""
    tol = Tolerance(rtol=1e-3, atol=0.0)
    assert compare_frames(_frame(), _frame(1.0005), tol) == []
    problems = compare_frames(_frame(), _frame(1.01), tol)
    assert problems and problems[0].startswith("p0[0]")


def test_compare_frames_structure():
    """Column and row-count differences are reported before values"""
    tol = Tolerance()
    assert "columns differ" in compare_frames(_frame(), _frame().drop(columns="defined"), tol)[0]
    assert "row count differs" in compare_frames(_frame(), _frame().iloc[:2], tol)[0]


def test_compare_frames_text_columns():
    tol = Tolerance()
    other = _frame()
    other["defined"] = [True, False, False]
    assert compare_frames(_frame(), other, tol) == ["defined[1]: True != False"]


def test_compare_frames_caps_report():
    """Only the first few differing rows are listed"""
    a = pd.DataFrame({"x": np.zeros(20)})
    b = pd.DataFrame({"x": np.ones(20)})
    problems = compare_frames(a, b, Tolerance())
    assert len(problems) == 6
    assert problems[-1] == "x: 15 more differing rows"


def test_update_and_check_round_trip(tmp_path):
    """Freshly written goldens are accepted"""
    written = update_goldens("demo", {"demo_table": _frame()}, tmp_path, HEADER)
    assert written == [golden_path(tmp_path, "demo_table")]

    manifest = GoldenManifest.load(tmp_path)
    assert manifest.for_command("demo") == ["demo_table"]
    report = check_artifacts("demo", {"demo_table": _frame()}, tmp_path)
    assert report == {"command": "demo", "checked": ["demo_table"]}


def test_check_reports_mismatch(tmp_path):
    update_goldens("demo", {"demo_table": _frame()}, tmp_path, HEADER)
    with pytest.raises(GoldenMismatchError) as excinfo:
        check_artifacts("demo", {"demo_table": _frame(2.0)}, tmp_path)
    assert "demo_table" in excinfo.value.details["mismatches"]


def test_check_missing_golden_and_missing_artifact(tmp_path):
    """Artifacts without goldens, and goldens the run did not produce, both fail"""
    update_goldens("demo", {"first": _frame(), "second": _frame()}, tmp_path, HEADER)
    with pytest.raises(GoldenMismatchError) as excinfo:
        check_artifacts("demo", {"first": _frame(), "third": _frame()}, tmp_path)
    mismatches = excinfo.value.details["mismatches"]
    assert mismatches["third"] == ["no committed golden"]
    assert mismatches["second"] == ["golden has no matching artifact in this run"]
    assert "first" not in mismatches


def test_manifest_keeps_custom_tolerances(tmp_path):
    """Updating goldens does not reset per-file tolerances"""
    manifest = GoldenManifest(files={"demo_table": GoldenEntry(command="demo", rtol=1e-6, atol=1e-9, note="tight")})
    manifest.save(tmp_path)
    update_goldens("demo", {"demo_table": _frame()}, tmp_path, HEADER)
    entry = GoldenManifest.load(tmp_path).files["demo_table"]
    assert entry.rtol == 1e-6 and entry.atol == 1e-9
    assert entry.note == "tight"


def test_manifest_defaults_are_inherited(tmp_path):
    (tmp_path / "manifest.yaml").write_text(
        "defaults:\n  rtol: 0.01\n  atol: 0.001\nfiles:\n  t:\n    command: demo\n"
    )
    entry = GoldenManifest.load(tmp_path).files["t"]
    assert entry.rtol == 0.01 and entry.atol == 0.001


def test_invalid_manifest(tmp_path):
    (tmp_path / "manifest.yaml").write_text("files:\n  t:\n    command: demo\n    colour: red\n")
    with pytest.raises(ConfigurationError):
        GoldenManifest.load(tmp_path)


def test_recorded_parameters(tmp_path):
    """The parameters line of the header reads back as a dict"""
    update_goldens("demo", {"demo_table": _frame()}, tmp_path, {**HEADER, "parameters": {"n": 3, "theta": 1.5}})
    assert recorded_parameters(golden_path(tmp_path, "demo_table")) == {"n": 3, "theta": 1.5}
    update_goldens("demo", {"bare": _frame()}, tmp_path, HEADER)
    assert recorded_parameters(golden_path(tmp_path, "bare")) is None


def test_check_rejects_other_parameters(tmp_path):
    """Equal data recorded under other parameters is still a mismatch"""
    header = {**HEADER, "parameters": {"n_values": [2, 5], "theta": 1.5}}
    update_goldens("demo", {"demo_table": _frame()}, tmp_path, header)
    report = check_artifacts("demo", {"demo_table": _frame()}, tmp_path, {"n_values": (2, 5), "theta": 1.5})
    assert report["checked"] == ["demo_table"]

    with pytest.raises(GoldenMismatchError) as excinfo:
        check_artifacts("demo", {"demo_table": _frame()}, tmp_path, {"n_values": [2, 6], "theta": 1.5})
    problems = excinfo.value.details["mismatches"]["demo_table"]
    assert problems[0].startswith("golden was recorded with parameters")


def test_committed_manifest_covers_every_golden():
    """Every committed CSV has a manifest entry and every entry a CSV"""
    goldens_dir = Path(__file__).parent.parent / "goldens"
    manifest = GoldenManifest.load(goldens_dir)
    on_disk = {p.stem for p in goldens_dir.glob("*.csv")}
    assert set(manifest.files) == on_disk
    for name in on_disk:
        assert recorded_parameters(golden_path(goldens_dir, name)) is not None
