"""
Tests for validators, formatters and logging helpers
"""
import json
import logging

import numpy as np
import pandas as pd
import pytest

from utils.errors import IFDError, ValidationError
from utils.formatters import (
    build_header,
    format_duration,
    format_error_response,
    read_artifact,
    render_artifact,
    write_artifact,
)
from utils.logger import RunLogger, setup_logging
from utils.validators import (
    validate_enum,
    validate_finite,
    validate_increasing,
    validate_non_negative,
    validate_positive_integer,
    validate_probability,
    validate_range,
    validate_required_fields,
)


def test_validate_positive_integer():
    assert validate_positive_integer(3, "n") == 3
    assert validate_positive_integer("4", "n") == 4
    for bad in (0, -2, 2.5, True, "x", None):
        with pytest.raises(ValidationError):
            validate_positive_integer(bad, "n")


def test_validate_real_numbers():
    assert validate_finite("1.5", "x") == 1.5
    assert validate_non_negative(0, "x") == 0.0
    with pytest.raises(ValidationError):
        validate_finite(float("inf"), "x")
    with pytest.raises(ValidationError):
        validate_non_negative(-1e-9, "x")


def test_validate_probability():
    assert validate_probability(1.0, "p") == 1.0
    with pytest.raises(ValidationError):
        validate_probability(1.0, "p", open_interval=True)
    with pytest.raises(ValidationError):
        validate_probability(-0.1, "p")


def test_validate_range():
    assert validate_range((0, 1), "r") == (0.0, 1.0)
    with pytest.raises(ValidationError):
        validate_range((2, 1), "r")
    with pytest.raises(ValidationError):
        validate_range((0, 5), "r", upper=4)
    with pytest.raises(ValidationError):
        validate_range((0,), "r")


def test_validate_increasing():
    np.testing.assert_array_equal(validate_increasing([1, 2, 3], "n"), [1, 2, 3])
    validate_increasing([1, 1, 2], "n", strict=False)
    with pytest.raises(ValidationError):
        validate_increasing([1, 1, 2], "n")
    with pytest.raises(ValidationError):
        validate_increasing([], "n")


def test_validate_enum_and_required_fields():
    assert validate_enum("csv", ["csv", "json"], "format") == "csv"
    with pytest.raises(ValidationError) as excinfo:
        validate_enum("xml", ["csv", "json"], "format")
    assert excinfo.value.details["valid_values"] == ["csv", "json"]
    with pytest.raises(ValidationError) as excinfo:
        validate_required_fields({"a": 1, "b": None}, ["a", "b", "c"])
    assert excinfo.value.details["missing_fields"] == ["b", "c"]


def test_render_and_read_back(tmp_path):
    """CSV and JSON artifacts keep columns and values"""
    frame = pd.DataFrame({"n": [1, 2], "p0": [0.25, 0.8091345264], "eta": pd.array([0.5, None], dtype="Float64")})
    header = build_header("tables", {"output": {"format": "csv"}}, 42, "1.0.0", {"n_max": 2})

    csv_text = render_artifact(frame, header, "csv")
    assert csv_text.splitlines()[0] == "# tool: ifd-sim"
    assert "# seed: 42" in csv_text

    for fmt in ("csv", "json"):
        path = write_artifact(frame, tmp_path / f"t.{fmt}", header, fmt)
        back = read_artifact(path)
        assert list(back.columns) == ["n", "p0", "eta"]
        assert back["p0"].iloc[1] == pytest.approx(0.8091345264, abs=1e-12)
        assert pd.isna(back["eta"].iloc[1])

    payload = json.loads((tmp_path / "t.json").read_text())
    assert payload["metadata"]["parameters"] == {"n_max": 2}
    assert not list(tmp_path.glob(".*.tmp"))


def test_unknown_format():
    with pytest.raises(ValidationError):
        render_artifact(pd.DataFrame({"a": [1]}), {}, "xml")


def test_format_error_response():
    inner = ValueError("bad value")
    error = IFDError("Run failed", details={"n": 0}, original_error=inner)
    response = format_error_response(error, include_traceback=True)
    assert response["success"] is False
    assert response["error"]["type"] == "IFDError"
    assert response["error"]["details"] == {"n": 0}
    assert response["error"]["original_error"] == "bad value"
    assert "original_error" not in format_error_response(error)["error"]
    assert error.to_dict()["message"] == "Run failed"


def test_format_duration():
    assert format_duration(5.0) == "5.0s"
    assert format_duration(135) == "2m 15s"
    assert format_duration(3720) == "1h 2m"


def test_logging_to_file(tmp_path):
    """Run events reach the rotating log file"""
    log_file = tmp_path / "logs" / "ifd.log"
    setup_logging(log_level="INFO", log_file=str(log_file), console=False)
    run_logger = RunLogger(logging.getLogger("ifd.test"))
    run_logger.log_start("tables", {"n_max": 4})
    run_logger.log_complete("tables", 2, 1.5)
    for handler in logging.getLogger().handlers:
        handler.flush()
    text = log_file.read_text()
    setup_logging(log_level="WARNING", console=False)
    assert "Running command" in text
    assert "'artifacts': 2" in text
