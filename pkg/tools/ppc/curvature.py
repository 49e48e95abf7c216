from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from core.errors import InvalidArgumentError

ArrayLike = Union[float, Sequence[float], np.ndarray]

# linspace and float accumulation can land a hair outside [0, 1]
ARC_SLACK = 1e-12


def check_arc(s: ArrayLike) -> Union[float, np.ndarray]:
    """
    Validate normalized arc length(s) and clip tiny round-off excursions.

    Returns a float for scalar input, an ndarray otherwise.
    """
    arr = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"Arc coordinate must be finite, got {s!r}")
    if np.any(arr < -ARC_SLACK) or np.any(arr > 1.0 + ARC_SLACK):
        raise InvalidArgumentError(f"Arc coordinate must lie in [0, 1], got {s!r}")
    arr = np.clip(arr, 0.0, 1.0)
    return float(arr) if arr.ndim == 0 else arr


@dataclass(frozen=True)
class ModalConfig:
    """Truncated curvature coefficients [theta_0, ..., theta_m] of one segment."""

    coeffs: tuple

    def __post_init__(self) -> None:
        values = tuple(float(c) for c in np.atleast_1d(np.asarray(self.coeffs, dtype=float)))
        if not values:
            raise InvalidArgumentError("ModalConfig needs at least one coefficient")
        if not all(math.isfinite(v) for v in values):
            raise InvalidArgumentError(f"ModalConfig coefficients must be finite: {values}")
        object.__setattr__(self, "coeffs", values)

    @classmethod
    def zeros(cls, order: int) -> "ModalConfig":
        return cls((0.0,) * (order + 1))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def effective_order(self) -> int:
        """Index of the last non-zero coefficient (0 for a straight segment)."""
        nonzero = [k for k, c in enumerate(self.coeffs) if c != 0.0]
        return nonzero[-1] if nonzero else 0

    def as_array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=float)

    def truncate(self, m: int) -> "ModalConfig":
        if m < 0:
            raise InvalidArgumentError(f"Truncation order must be >= 0, got {m}")
        kept = list(self.coeffs[: m + 1])
        kept += [0.0] * (m + 1 - len(kept))
        return ModalConfig(tuple(kept))

    def orientation_coeffs(self) -> np.ndarray:
        """Power-series coefficients of alpha(s) = sum theta_k s^(k+1)/(k+1)."""
        theta = self.as_array()
        return np.concatenate(([0.0], theta / np.arange(1, theta.size + 1)))

    def curvature(self, s: ArrayLike) -> Union[float, np.ndarray]:
        return eval_curvature(self, s)

    def orientation(self, s: ArrayLike) -> Union[float, np.ndarray]:
        return eval_orientation(self, s)


def eval_curvature(theta: ModalConfig, s: ArrayLike) -> Union[float, np.ndarray]:
    """Curvature sum theta_k s^k, Horner-evaluated."""
    s = check_arc(s)
    value = npoly.polyval(s, theta.as_array())
    return float(value) if np.ndim(value) == 0 else value


def eval_orientation(theta: ModalConfig, s: ArrayLike) -> Union[float, np.ndarray]:
    """In-plane angle alpha(s), the integral of the curvature from the segment base."""
    s = check_arc(s)
    value = npoly.polyval(s, theta.orientation_coeffs())
    return float(value) if np.ndim(value) == 0 else value
