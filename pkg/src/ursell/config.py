"""Size limits and the package's exception types."""

from __future__ import annotations

import os

DEFAULT_DENSE_CEILING = 14
DENSE_EXPM_CEILING = 10
PARTITION_LIMIT = 15
CORRELATOR_LIMIT = 12


class ResourceLimitError(ValueError):
    """A request exceeds a configured size ceiling."""


class CalibrationError(RuntimeError):
    """Light-cone calibration had no usable signal."""


def dense_ceiling() -> int:
    """Largest qubit count allowed for dense state vectors.

    Reads ``URSELL_DENSE_CEILING`` on every call so tests and the CLI can
    override it without reloading the package.
    """
    raw = os.environ.get("URSELL_DENSE_CEILING")
    if raw is None or raw.strip() == "":
        return DEFAULT_DENSE_CEILING
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"URSELL_DENSE_CEILING must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError(f"URSELL_DENSE_CEILING must be positive, got {value}")
    return value
