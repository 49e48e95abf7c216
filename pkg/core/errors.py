# core/errors.py
from __future__ import annotations

from typing import Any, Dict, Optional


class ShapeSensingError(Exception):
    """Base error. Every subclass carries a stable machine-readable code."""

    code = "shape_sensing_error"

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.details = details

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "ok": False,
            "error": self.code,
            "detail": str(self),
        }
        for key, value in self.details.items():
            if isinstance(value, (str, int, float, bool)) or value is None:
                record[key] = value
        return record


class ConfigurationError(ShapeSensingError, ValueError):
    code = "configuration_error"


class InvalidPlacementError(ConfigurationError):
    code = "invalid_placement"


class InvalidArgumentError(ShapeSensingError, ValueError):
    code = "invalid_argument"


class NotNormalizedError(InvalidArgumentError):
    code = "not_normalized"


class SingularOrientationError(ShapeSensingError, ValueError):
    code = "singular_orientation"


class ToleranceNotReachedError(ShapeSensingError, RuntimeError):
    code = "tolerance_not_reached"


class IllConditionedError(ShapeSensingError, RuntimeError):
    """Raised when a sensor placement is numerically unhealthy.

    The best-effort solution is attached so callers can still use it.
    """

    code = "ill_conditioned"

    def __init__(
        self,
        message: str,
        condition_number: float,
        solution: Optional[Any] = None,
    ) -> None:
        super().__init__(message, condition_number=condition_number)
        self.condition_number = condition_number
        self.solution = solution


class NoOverlapError(ShapeSensingError, RuntimeError):
    code = "no_overlap"


class MisalignedTracesError(ShapeSensingError, RuntimeError):
    code = "misaligned_traces"


class FormatError(ShapeSensingError, ValueError):
    code = "format_error"
