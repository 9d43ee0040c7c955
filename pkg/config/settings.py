"""
Settings and configuration management for the interaction-free detection simulator
"""
import os
from pathlib import Path
from typing import Any, Literal, Optional
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator

from utils.errors import ConfigurationError, ValidationError
from utils.validators import validate_enum, validate_positive_integer

DEFAULT_CONFIG_PATH = Path(__file__).parent / "ifd_config.yaml"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class LoggingConfig(_Section):
    """Logging configuration"""

    level: str = "INFO"
    file: Optional[str] = None
    max_size_mb: int = Field(default=100, gt=0)
    backup_count: int = Field(default=5, ge=0)
    console: bool = True


class OutputConfig(_Section):
    """Where and how artifacts are written"""

    format: Literal["csv", "json"] = "csv"
    out_dir: str = "results"
    seed: int = Field(default=20240917, ge=0, lt=2**64)
    goldens_dir: str = str(Path(__file__).parent.parent / "goldens")
    workers: int = Field(default=1, ge=1)


class SequenceDefaults(_Section):
    """Default Ramsey sequence parameters"""

    n: int = Field(default=25, ge=1)
    theta_rad: float = 3.141592653589793
    phase_rad: float = 1.5707963267948966
    phi_rad: Optional[float] = None  # None selects pi/(N+1)

    @field_validator("phi_rad")
    @classmethod
    def _check_phi(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not 0.0 < value <= 3.141592653589793:
            raise ValueError("phi_rad must lie in (0, pi]")
        return value


class NoiseDefaults(_Section):
    """Relaxation rates and pulse schedule"""

    gamma10_mhz: float = Field(default=0.1, ge=0)
    gamma21_mhz: float = Field(default=10.0, ge=0)
    bs_duration_ns: float = Field(default=56.0, gt=0)
    b_duration_ns: float = Field(default=112.0, gt=0)
    envelope: Literal["rectangular"] = "rectangular"
    steps_per_pulse: int = Field(default=200, ge=10)


class ThermalDefaults(_Section):
    """Thermal initial-state parameters"""

    temperature_mk: float = Field(default=0.0, ge=0)
    omega01_ghz: float = Field(default=7.20, gt=0)
    omega12_ghz: float = Field(default=6.85, gt=0)


class EnsembleDefaults(_Section):
    """Monte Carlo ensemble sizes"""

    reps_random_pulses: int = Field(default=10_000, ge=1)
    reps_random_placement: int = Field(default=400, ge=1)
    occupancy_probs: list[float] = Field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125])

    @field_validator("occupancy_probs")
    @classmethod
    def _check_probs(cls, value: list[float]) -> list[float]:
        if not value or any(not 0.0 <= p <= 1.0 for p in value):
            raise ValueError("occupancy probabilities must lie in [0, 1]")
        return value


class MetrologyDefaults(_Section):
    """Numerical parameters of the Fisher-information estimators"""

    derivative_step_rad: float = Field(default=1e-4, gt=0)
    limit_epsilon_rad: float = Field(default=1e-3, gt=0)
    threshold_step_rad: float = Field(default=3.141592653589793 / 2000, gt=0)


class Settings:
    """Main settings class for the simulator"""

    def __init__(self, config_file: Optional[str] = None):
        """
        Initialize settings

        Args:
            config_file: Path to YAML configuration file. When omitted, IFD_CONFIG
                or config/ifd_config.yaml is used if present, otherwise defaults.
        """
        load_dotenv()

        explicit = config_file is not None or os.getenv("IFD_CONFIG") is not None
        if config_file is None:
            config_file = os.getenv("IFD_CONFIG", str(DEFAULT_CONFIG_PATH))

        self.config_file = Path(config_file).expanduser()
        self._load_config(required=explicit)

    def _load_config(self, required: bool) -> None:
        """Load configuration from YAML file"""
        config_data: dict[str, Any] = {}

        if self.config_file.exists():
            try:
                with open(self.config_file, "r") as f:
                    loaded = yaml.safe_load(f)
            except Exception as e:
                raise ConfigurationError(
                    f"Failed to load configuration file: {str(e)}",
                    details={"config_file": str(self.config_file)},
                    original_error=e,
                )
            if loaded is not None:
                if not isinstance(loaded, dict) or "ifd" not in loaded:
                    raise ConfigurationError(
                        "Invalid configuration file structure (missing 'ifd' root key)",
                        details={"config_file": str(self.config_file)},
                    )
                config_data = loaded["ifd"] or {}
        elif required:
            raise ConfigurationError(
                f"Configuration file not found: {self.config_file}",
                details={"config_file": str(self.config_file)},
            )
        else:
            self.config_file = None  # type: ignore[assignment]

        known = {"logging", "output", "sequence", "noise", "thermal", "ensemble", "metrology"}
        unknown = sorted(set(config_data) - known)
        if unknown:
            raise ConfigurationError(
                "Unknown configuration sections",
                details={"unknown": unknown, "known": sorted(known)},
            )

        try:
            self.logging = LoggingConfig(**config_data.get("logging", {}))
            self.output = OutputConfig(**config_data.get("output", {}))
            self.sequence = SequenceDefaults(**config_data.get("sequence", {}))
            self.noise = NoiseDefaults(**config_data.get("noise", {}))
            self.thermal = ThermalDefaults(**config_data.get("thermal", {}))
            self.ensemble = EnsembleDefaults(**config_data.get("ensemble", {}))
            self.metrology = MetrologyDefaults(**config_data.get("metrology", {}))
        except Exception as e:
            raise ConfigurationError(
                f"Invalid configuration: {str(e)}",
                original_error=e,
            )

        self._apply_env_overrides()

    def _apply_env_overrides(self) -> None:
        """Apply environment variable overrides to configuration"""
        try:
            if log_level := os.getenv("LOG_LEVEL"):
                self.logging.level = log_level

            if log_file := os.getenv("LOG_FILE"):
                self.logging.file = log_file

            if log_max_size := os.getenv("LOG_MAX_SIZE_MB"):
                self.logging.max_size_mb = validate_positive_integer(log_max_size, "LOG_MAX_SIZE_MB")

            if output_format := os.getenv("IFD_OUTPUT_FORMAT"):
                self.output.format = validate_enum(output_format, ["csv", "json"], "IFD_OUTPUT_FORMAT")

            if seed := os.getenv("IFD_SEED"):
                self.output.seed = int(seed)

            if workers := os.getenv("IFD_WORKERS"):
                self.output.workers = validate_positive_integer(workers, "IFD_WORKERS")
        except (ValidationError, ValueError) as e:
            raise ConfigurationError(
                f"Invalid environment override: {str(e)}",
                original_error=e,
            )

    def to_dict(self) -> dict[str, Any]:
        """Convert settings to dictionary"""
        return {
            "config_file": str(self.config_file) if self.config_file else None,
            "logging": self.logging.model_dump(),
            "output": self.output.model_dump(),
            "sequence": self.sequence.model_dump(),
            "noise": self.noise.model_dump(),
            "thermal": self.thermal.model_dump(),
            "ensemble": self.ensemble.model_dump(),
            "metrology": self.metrology.model_dump(),
        }


# Global settings instance
_settings: Optional[Settings] = None


def get_settings(
    config_file: Optional[str] = None,
    force_reload: bool = False,
) -> Settings:
    """
    Get the global settings instance (singleton pattern)

    Args:
        config_file: Path to configuration file (only used on first call)
        force_reload: Force reload of configuration

    Returns:
        Settings instance
    """
    global _settings

    if _settings is None or force_reload:
        _settings = Settings(config_file=config_file)

    return _settings
