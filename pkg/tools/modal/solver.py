from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve, qr, solve_triangular

from core.errors import ConfigurationError, IllConditionedError, InvalidArgumentError, InvalidPlacementError
from tools.ppc.curvature import ModalConfig

logger = logging.getLogger(__name__)

DEFAULT_CONDITIONING_THRESHOLD = 1e8
# Recovered coefficients carry an error of about cond(A) * eps * |alpha|, since
# rounding in the measured orientations alone is amplified by A^-1. Below this
# condition number that stays under 1e-9 for |theta| of order one.
ROUND_TRIP_CONDITIONING = 1e6


@dataclass(frozen=True)
class SensorPlacement:
    """Sensor arc locations 0 < s_0 < s_1 < ... < s_m <= 1 on one segment."""

    locations: tuple

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in np.atleast_1d(np.asarray(self.locations, dtype=float)))
        if not values:
            raise InvalidPlacementError("A sensor placement needs at least one location")
        if not all(math.isfinite(v) for v in values):
            raise InvalidPlacementError(f"Sensor locations must be finite: {values}")
        if values[0] <= 0.0 or values[-1] > 1.0:
            raise InvalidPlacementError(f"Sensor locations must lie in (0, 1]: {values}")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise InvalidPlacementError(f"Sensor locations must be strictly increasing: {values}")
        object.__setattr__(self, "locations", values)

    def __len__(self) -> int:
        return len(self.locations)

    def as_array(self) -> np.ndarray:
        return np.array(self.locations, dtype=float)


def build_system(placement: SensorPlacement, order: Optional[int] = None) -> np.ndarray:
    """
    Matrix A with A[j, k] = s_j^(k+1) / (k+1), so that A @ theta = alpha(s_j).

    `order` defaults to len(placement) - 1 (square system); a lower order
    gives the tall matrix of the least-squares mode.
    """
    m = len(placement) - 1 if order is None else order
    if m < 0 or m + 1 > len(placement):
        raise InvalidPlacementError(
            f"Order {m} needs at least {m + 1} sensors, placement has {len(placement)}"
        )
    s = placement.as_array()
    k = np.arange(1, m + 2)
    return s[:, None] ** k[None, :] / k[None, :]


def system_determinant(placement: SensorPlacement) -> float:
    """det(A) = (prod s_k) / (m+1)! * prod_{j<i} (s_i - s_j), positive for valid placements."""
    s = placement.locations
    vandermonde = math.prod(s[i] - s[j] for i in range(len(s)) for j in range(i))
    return math.prod(s) / math.factorial(len(s)) * vandermonde


def placement_conditioning(placement: SensorPlacement, order: Optional[int] = None) -> float:
    """2-norm condition number of A (ratio of extreme singular values)."""
    return float(np.linalg.cond(build_system(placement, order)))


class ModalSolver:
    """
    Factor A once for a fixed placement and solve it for many timestamps.

    The factorization is read-only after construction, so one solver can be
    shared by threads working on different frames.

    Placements with a condition number above ROUND_TRIP_CONDITIONING still
    solve, but their coefficients are only good to about cond * eps * |alpha|.
    """

    def __init__(
        self,
        placement: SensorPlacement,
        order: Optional[int] = None,
        conditioning_threshold: float = DEFAULT_CONDITIONING_THRESHOLD,
        least_squares: bool = False,
    ) -> None:
        m = len(placement) - 1 if order is None else order
        if len(placement) > m + 1 and not least_squares:
            raise ConfigurationError(
                f"Order {m} needs exactly {m + 1} sensors, got {len(placement)} "
                "(enable least_squares to use extra sensors)"
            )
        self.placement = placement
        self.order = m
        self.matrix = build_system(placement, m)
        self.conditioning_threshold = conditioning_threshold
        self.condition_number = float(np.linalg.cond(self.matrix))
        self.square = self.matrix.shape[0] == self.matrix.shape[1]

        if self.square:
            self._lu = lu_factor(self.matrix)
        else:
            self._q, self._r = qr(self.matrix, mode="economic")

        if self.is_ill_conditioned:
            logger.warning(
                "Sensor placement %s is ill-conditioned (cond=%.3g > %.3g)",
                placement.locations,
                self.condition_number,
                conditioning_threshold,
            )
        elif not self.meets_round_trip_accuracy:
            logger.info(
                "Sensor placement %s (cond=%.3g) recovers coefficients only to about %.1g rad",
                placement.locations,
                self.condition_number,
                self.condition_number * np.finfo(float).eps,
            )

    @property
    def is_ill_conditioned(self) -> bool:
        return self.condition_number > self.conditioning_threshold

    @property
    def meets_round_trip_accuracy(self) -> bool:
        return self.condition_number <= ROUND_TRIP_CONDITIONING

    def solve_many(self, rhs: np.ndarray) -> np.ndarray:
        """Solve A X = B column-wise; B has one row per sensor."""
        rhs = np.asarray(rhs, dtype=float)
        if self.square:
            return lu_solve(self._lu, rhs)
        return solve_triangular(self._r, self._q.T @ rhs)

    def solve(self, alphas: Sequence[float], best_effort: bool = False) -> ModalConfig:
        b = np.asarray(alphas, dtype=float)
        if b.shape != (len(self.placement),):
            raise InvalidArgumentError(
                f"Expected {len(self.placement)} orientations, got shape {b.shape}"
            )
        if not np.all(np.isfinite(b)):
            raise InvalidArgumentError(f"Orientations must be finite: {b}")

        theta = ModalConfig(tuple(self.solve_many(b)))
        if self.is_ill_conditioned and not best_effort:
            raise IllConditionedError(
                f"Placement {self.placement.locations} has condition number "
                f"{self.condition_number:.3g} above {self.conditioning_threshold:.3g}",
                condition_number=self.condition_number,
                solution=theta,
            )
        return theta


def solve_modal(
    placement: SensorPlacement,
    alphas: Sequence[float],
    conditioning_threshold: float = DEFAULT_CONDITIONING_THRESHOLD,
    best_effort: bool = False,
    order: Optional[int] = None,
) -> ModalConfig:
    """
    Modal configuration from orientations measured at the placement.

    With more sensors than order + 1 the system is solved in least squares.
    """
    m = len(placement) - 1 if order is None else order
    solver = ModalSolver(
        placement,
        order=m,
        conditioning_threshold=conditioning_threshold,
        least_squares=len(placement) > m + 1,
    )
    return solver.solve(alphas, best_effort=best_effort)


def compare_placements(
    placements: Iterable[SensorPlacement],
    conditioning_threshold: float = DEFAULT_CONDITIONING_THRESHOLD,
) -> List[Dict[str, Any]]:
    """Determinant and conditioning of candidate arrangements, in input order."""
    rows: List[Dict[str, Any]] = []
    for placement in placements:
        cond = placement_conditioning(placement)
        rows.append(
            {
                "locations": list(placement.locations),
                "order": len(placement) - 1,
                "determinant": system_determinant(placement),
                "condition_number": cond,
                "ill_conditioned": cond > conditioning_threshold,
                "round_trip_accurate": cond <= ROUND_TRIP_CONDITIONING,
            }
        )
    return rows
