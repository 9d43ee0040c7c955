"""
Output formatting utilities for the interaction-free detection simulator
"""
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional
import json
import os
import tempfile

import pandas as pd

from .errors import IFDError, ValidationError

OUTPUT_FORMATS = ("csv", "json")


def format_timestamp() -> str:
    """
    Generate an ISO 8601 formatted timestamp in UTC

    Returns:
        ISO 8601 formatted timestamp string
    """
    return datetime.now(timezone.utc).isoformat()


def build_header(
    command: str,
    config: dict[str, Any],
    seed: Optional[int],
    version: str,
    parameters: Optional[dict[str, Any]] = None,
) -> dict[str, Any]:
    """
    Build the metadata block written at the top of every artifact

    Args:
        command: CLI subcommand that produced the artifact
        config: Fully resolved settings (Settings.to_dict())
        seed: RNG seed in effect
        version: Tool version
        parameters: Command-specific parameters

    Returns:
        Ordered header dictionary
    """
    return {
        "tool": "ifd-sim",
        "version": version,
        "command": command,
        "seed": seed,
        "parameters": parameters or {},
        "config": config,
    }


def _header_lines(header: dict[str, Any]) -> str:
    lines = []
    for key, value in header.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True, default=str)
        lines.append(f"# {key}: {value}\n")
    return "".join(lines)


def render_artifact(frame: pd.DataFrame, header: dict[str, Any], fmt: str = "csv") -> str:
    """
    Render a data frame plus header as CSV or JSON text

    Args:
        frame: Tabular data, axes as leading columns
        header: Metadata block from build_header
        fmt: "csv" or "json"

    Returns:
        Serialized artifact

    Raises:
        ValidationError: If the format is unknown
    """
    if fmt == "csv":
        return _header_lines(header) + frame.to_csv(index=False)
    if fmt == "json":
        payload = {
            "metadata": header,
            "columns": list(frame.columns),
            "data": json.loads(frame.to_json(orient="records", double_precision=15)),
        }
        return format_json_response(payload)
    raise ValidationError(
        f"Unknown output format: {fmt}",
        details={"valid_formats": list(OUTPUT_FORMATS)},
    )


def write_artifact(
    frame: pd.DataFrame,
    path: Path,
    header: dict[str, Any],
    fmt: str = "csv",
) -> Path:
    """
    Write an artifact atomically (temp file in the same directory, then rename)

    Args:
        frame: Tabular data
        path: Destination path
        header: Metadata block
        fmt: "csv" or "json"

    Returns:
        The written path
    """
    text = render_artifact(frame, header, fmt)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def read_artifact(path: Path) -> pd.DataFrame:
    """
    Read back the data section of a CSV or JSON artifact

    Args:
        path: Artifact path; format chosen by suffix

    Returns:
        Data frame with the stored columns
    """
    path = Path(path)
    if path.suffix == ".json":
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        return pd.DataFrame(payload["data"], columns=payload["columns"])
    return pd.read_csv(path, comment="#")


def format_error_response(error: Exception, include_traceback: bool = False) -> dict[str, Any]:
    """
    Format an error response

    Args:
        error: The exception that occurred
        include_traceback: Whether to include the wrapped original error

    Returns:
        Formatted error response dictionary
    """
    error_data: dict[str, Any] = {
        "type": error.__class__.__name__,
        "message": str(error),
    }

    if isinstance(error, IFDError):
        if error.details:
            error_data["details"] = error.details
        if error.original_error and include_traceback:
            error_data["original_error"] = str(error.original_error)

    return {
        "success": False,
        "error": error_data,
        "metadata": {
            "timestamp": format_timestamp(),
        },
    }


def format_duration(seconds: float) -> str:
    """
    Format duration in human-readable format

    Args:
        seconds: Duration in seconds

    Returns:
        Formatted duration string (e.g., "2m 15s")
    """
    if seconds < 60:
        return f"{seconds:.1f}s"

    minutes = int(seconds // 60)
    remaining_seconds = int(seconds % 60)

    if minutes < 60:
        return f"{minutes}m {remaining_seconds}s"

    hours = minutes // 60
    remaining_minutes = minutes % 60
    return f"{hours}h {remaining_minutes}m"


def format_json_response(data: Any, indent: int = 2) -> str:
    """
    Format data as pretty-printed JSON string

    Args:
        data: Data to format
        indent: Number of spaces for indentation

    Returns:
        JSON formatted string
    """
    return json.dumps(data, indent=indent, default=str, ensure_ascii=False)
