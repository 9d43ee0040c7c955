"""
Golden-file regression for command artifacts

goldens/manifest.yaml lists every committed golden with its tolerances:

    defaults:
      rtol: 1.0e-3
      atol: 5.0e-5
    files:
      tables_coherent:
        command: tables
        rtol: 1.0e-4

Goldens are always stored as CSV, whatever the output format of the run.
The `# parameters:` header line of a golden records the run that produced
it; --check refuses to compare a run made with other parameters.
"""
import json
from io import StringIO
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel, ConfigDict, Field

from utils.errors import ConfigurationError, GoldenMismatchError
from utils.formatters import read_artifact, write_artifact
from utils.logger import get_logger

logger = get_logger(__name__)

MANIFEST_NAME = "manifest.yaml"
PARAMETERS_PREFIX = "# parameters: "
# Cap on differing cells reported per artifact
MAX_REPORTED = 5


class Tolerance(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rtol: float = Field(default=1e-3, ge=0)
    atol: float = Field(default=5e-5, ge=0)


class GoldenEntry(Tolerance):
    command: str
    note: Optional[str] = None


class GoldenManifest(BaseModel):
    """Per-file tolerances of the committed goldens"""

    model_config = ConfigDict(extra="forbid")

    defaults: Tolerance = Tolerance()
    files: dict[str, GoldenEntry] = Field(default_factory=dict)

    @classmethod
    def load(cls, goldens_dir: Path) -> "GoldenManifest":
        path = Path(goldens_dir) / MANIFEST_NAME
        if not path.exists():
            return cls()
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
            defaults = raw.get("defaults", {})
            files = {name: {**defaults, **(entry or {})} for name, entry in (raw.get("files") or {}).items()}
            return cls(defaults=defaults, files=files)
        except Exception as e:
            raise ConfigurationError(
                f"Invalid golden manifest: {str(e)}",
                details={"manifest": str(path)},
                original_error=e,
            )

    def save(self, goldens_dir: Path) -> Path:
        path = Path(goldens_dir) / MANIFEST_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "defaults": self.defaults.model_dump(),
            "files": {
                name: entry.model_dump(exclude_none=True, exclude={"rtol", "atol"})
                | self._overrides(entry)
                for name, entry in sorted(self.files.items())
            },
        }
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(payload, f, sort_keys=False)
        return path

    def _overrides(self, entry: GoldenEntry) -> dict[str, float]:
        return {
            key: getattr(entry, key)
            for key in ("rtol", "atol")
            if getattr(entry, key) != getattr(self.defaults, key)
        }

    def for_command(self, command: str) -> list[str]:
        return [name for name, entry in self.files.items() if entry.command == command]


def golden_path(goldens_dir: Path, name: str) -> Path:
    return Path(goldens_dir) / f"{name}.csv"


def recorded_parameters(path: Path) -> Optional[dict[str, Any]]:
    """Run parameters from a golden's header block, None when not recorded"""
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            if line.startswith(PARAMETERS_PREFIX):
                return json.loads(line[len(PARAMETERS_PREFIX) :])
    return None


def _as_json(parameters: dict[str, Any]) -> dict[str, Any]:
    return json.loads(json.dumps(parameters, sort_keys=True, default=str))


def compare_frames(actual: pd.DataFrame, golden: pd.DataFrame, tolerance: Tolerance) -> list[str]:
    """
    Differences between an artifact and its golden

    Numeric columns are compared with numpy.isclose (empty cells match empty
    cells only); all other columns must match exactly as text.

    Returns:
        Human-readable problems; empty when the frames agree
    """
    problems = []
    if list(actual.columns) != list(golden.columns):
        return [f"columns differ: {list(actual.columns)} != {list(golden.columns)}"]
    if len(actual) != len(golden):
        return [f"row count differs: {len(actual)} != {len(golden)}"]

    for column in actual.columns:
        left, right = actual[column], golden[column]
        numeric = pd.api.types.is_numeric_dtype(left) and not pd.api.types.is_bool_dtype(left)
        if numeric and pd.api.types.is_numeric_dtype(right):
            a = left.to_numpy(dtype=float, na_value=np.nan)
            g = right.to_numpy(dtype=float, na_value=np.nan)
            ok = np.isclose(a, g, rtol=tolerance.rtol, atol=tolerance.atol, equal_nan=True)
        else:
            ok = left.astype(str).str.lower().to_numpy() == right.astype(str).str.lower().to_numpy()
        bad = np.flatnonzero(~ok)
        for row in bad[:MAX_REPORTED]:
            problems.append(f"{column}[{row}]: {left.iloc[row]} != {right.iloc[row]}")
        if bad.size > MAX_REPORTED:
            problems.append(f"{column}: {bad.size - MAX_REPORTED} more differing rows")
    return problems


def check_artifacts(
    command: str,
    artifacts: dict[str, pd.DataFrame],
    goldens_dir: Path,
    parameters: Optional[dict[str, Any]] = None,
) -> dict[str, Any]:
    """
    Compare every artifact of a run against its committed golden

    Args:
        command: Subcommand that produced the artifacts
        artifacts: Artifact name to data frame
        goldens_dir: Directory holding the goldens and manifest.yaml
        parameters: Resolved run parameters; when given, they must equal the
            parameters recorded in each golden's header

    Raises:
        GoldenMismatchError: If any artifact differs or has no golden
    """
    goldens_dir = Path(goldens_dir)
    manifest = GoldenManifest.load(goldens_dir)
    report: dict[str, Any] = {}

    for name, frame in artifacts.items():
        entry = manifest.files.get(name)
        path = golden_path(goldens_dir, name)
        if entry is None or not path.exists():
            report[name] = ["no committed golden"]
            continue
        if parameters is not None:
            recorded = recorded_parameters(path)
            if recorded is not None and recorded != _as_json(parameters):
                report[name] = [f"golden was recorded with parameters {json.dumps(recorded, sort_keys=True)}"]
                continue
        # compare through the same CSV round trip the golden went through
        problems = compare_frames(pd.read_csv(_as_csv_buffer(frame)), read_artifact(path), entry)
        report[name] = problems
        logger.debug(f"Golden {name}: {'ok' if not problems else f'{len(problems)} problems'}")
    for name in manifest.for_command(command):
        if name not in artifacts:
            report[name] = ["golden has no matching artifact in this run"]

    failed = {name: problems for name, problems in report.items() if problems}
    if failed:
        raise GoldenMismatchError(
            f"Output of '{command}' does not match goldens",
            details={"goldens_dir": str(goldens_dir), "mismatches": failed},
        )
    logger.info(f"All {len(report)} artifacts of '{command}' match goldens")
    return {"command": command, "checked": sorted(report)}


def _as_csv_buffer(frame: pd.DataFrame) -> StringIO:
    return StringIO(frame.to_csv(index=False))


def update_goldens(
    command: str,
    artifacts: dict[str, pd.DataFrame],
    goldens_dir: Path,
    header: dict[str, Any],
) -> list[Path]:
    """
    Write current artifacts as goldens and register them in the manifest

    Existing tolerances are kept; new entries get the manifest defaults.
    """
    goldens_dir = Path(goldens_dir)
    manifest = GoldenManifest.load(goldens_dir)
    written = []
    for name, frame in artifacts.items():
        written.append(write_artifact(frame, golden_path(goldens_dir, name), header, "csv"))
        if name not in manifest.files:
            manifest.files[name] = GoldenEntry(command=command, **manifest.defaults.model_dump())
    manifest.save(goldens_dir)
    logger.info(f"Updated {len(written)} goldens for '{command}' in {goldens_dir}")
    return written
