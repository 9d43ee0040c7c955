"""
Input validation utilities for the interaction-free detection simulator
"""
import math
from typing import Any, Optional, Sequence

import numpy as np

from .errors import ValidationError


def validate_positive_integer(value: Any, field_name: str) -> int:
    """
    Validate that a value is a positive integer

    Args:
        value: The value to validate
        field_name: Name of the field for error messages

    Returns:
        The validated integer value

    Raises:
        ValidationError: If value is not a positive integer
    """
    if isinstance(value, bool):
        raise ValidationError(
            f"{field_name} must be an integer",
            details={"value": value, "type": "bool"},
        )
    try:
        int_value = int(value)
    except (ValueError, TypeError):
        raise ValidationError(
            f"{field_name} must be an integer",
            details={"value": value, "type": type(value).__name__},
        )

    if int_value != value and not isinstance(value, str):
        raise ValidationError(
            f"{field_name} must be an integer",
            details={"value": value},
        )

    if int_value <= 0:
        raise ValidationError(
            f"{field_name} must be positive",
            details={"value": int_value},
        )

    return int_value


def validate_finite(value: Any, field_name: str) -> float:
    """
    Validate that a value is a finite real number

    Raises:
        ValidationError: If value is NaN, infinite or not numeric
    """
    try:
        float_value = float(value)
    except (ValueError, TypeError):
        raise ValidationError(
            f"{field_name} must be a real number",
            details={"value": value, "type": type(value).__name__},
        )
    if not math.isfinite(float_value):
        raise ValidationError(
            f"{field_name} must be finite",
            details={"value": float_value},
        )
    return float_value


def validate_non_negative(value: Any, field_name: str) -> float:
    """Validate a finite, non-negative real number"""
    float_value = validate_finite(value, field_name)
    if float_value < 0:
        raise ValidationError(
            f"{field_name} must be non-negative",
            details={"value": float_value},
        )
    return float_value


def validate_probability(value: Any, field_name: str, open_interval: bool = False) -> float:
    """
    Validate a probability

    Args:
        value: The value to validate
        field_name: Name of the field for error messages
        open_interval: Require value in (0, 1) instead of [0, 1]

    Returns:
        The validated value

    Raises:
        ValidationError: If value lies outside the interval
    """
    float_value = validate_finite(value, field_name)
    if open_interval:
        ok = 0.0 < float_value < 1.0
    else:
        ok = 0.0 <= float_value <= 1.0
    if not ok:
        raise ValidationError(
            f"{field_name} must lie in {'(0, 1)' if open_interval else '[0, 1]'}",
            details={"value": float_value},
        )
    return float_value


def validate_range(
    bounds: Sequence[Any],
    field_name: str,
    lower: Optional[float] = None,
    upper: Optional[float] = None,
) -> tuple[float, float]:
    """
    Validate a closed interval [lo, hi]

    Args:
        bounds: Two-element sequence
        field_name: Name of the field for error messages
        lower: Optional smallest admissible lo
        upper: Optional largest admissible hi

    Returns:
        (lo, hi) as floats

    Raises:
        ValidationError: If the interval is malformed or out of bounds
    """
    if len(bounds) != 2:
        raise ValidationError(
            f"{field_name} must have exactly two entries",
            details={"value": list(bounds)},
        )
    lo = validate_finite(bounds[0], f"{field_name}[0]")
    hi = validate_finite(bounds[1], f"{field_name}[1]")
    if lo > hi:
        raise ValidationError(
            f"{field_name} lower bound exceeds upper bound",
            details={"lo": lo, "hi": hi},
        )
    if (lower is not None and lo < lower) or (upper is not None and hi > upper):
        raise ValidationError(
            f"{field_name} outside admissible interval",
            details={"lo": lo, "hi": hi, "lower": lower, "upper": upper},
        )
    return lo, hi


def validate_increasing(values: Sequence[Any], field_name: str, strict: bool = True) -> np.ndarray:
    """
    Validate a monotone increasing series

    Raises:
        ValidationError: If the series is empty, non-finite or not monotone
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{field_name} must be a non-empty 1-D series")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{field_name} must be finite")
    steps = np.diff(arr)
    if (strict and np.any(steps <= 0)) or (not strict and np.any(steps < 0)):
        raise ValidationError(
            f"{field_name} must be {'strictly ' if strict else ''}increasing",
            details={"values": arr.tolist()},
        )
    return arr


def validate_enum(value: str, valid_values: list[str], field_name: str) -> str:
    """
    Validate that a value is one of the allowed enum values

    Args:
        value: The value to validate
        valid_values: List of valid values
        field_name: Name of the field for error messages

    Returns:
        The validated value

    Raises:
        ValidationError: If value is not in valid_values
    """
    if value not in valid_values:
        raise ValidationError(
            f"Invalid {field_name}",
            details={
                "value": value,
                "valid_values": valid_values,
            },
        )

    return value


def validate_required_fields(data: dict[str, Any], required_fields: list[str]) -> None:
    """
    Validate that all required fields are present in data

    Args:
        data: Dictionary to validate
        required_fields: List of required field names

    Raises:
        ValidationError: If any required field is missing
    """
    missing_fields = [field for field in required_fields if field not in data or data[field] is None]

    if missing_fields:
        raise ValidationError(
            "Missing required fields",
            details={"missing_fields": missing_fields},
        )
