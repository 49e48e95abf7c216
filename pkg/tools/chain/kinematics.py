from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Protocol, Sequence, Tuple

import numpy as np

from core.errors import ConfigurationError, InvalidArgumentError, InvalidPlacementError
from tools.modal.solver import SensorPlacement
from tools.orientation.bend_config import bend_quaternion_array
from tools.orientation.quaternion import Quaternion, quat_multiply, quat_normalize, quat_rotate
from tools.ppc.curvature import ArrayLike, ModalConfig, check_arc, eval_orientation
from tools.ppc.position import planar_positions
from tools.ppc.quadrature import DEFAULT_TOL

DEFAULT_POINTS_PER_SEGMENT = 50


class BendingProfile(Protocol):
    """Anything with a bending direction and an in-plane orientation profile."""

    phi: float

    def orientation(self, s: ArrayLike) -> np.ndarray: ...

    def planar_positions(self, s: ArrayLike, L: float, tol: float = DEFAULT_TOL) -> np.ndarray: ...


@dataclass(frozen=True)
class SegmentSpec:
    length: float
    order: int
    placement: SensorPlacement
    least_squares: bool = False

    def __post_init__(self) -> None:
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ConfigurationError(f"Segment length must be positive, got {self.length!r}")
        if self.order < 0:
            raise ConfigurationError(f"Segment order must be >= 0, got {self.order}")
        needed = self.order + 1
        count = len(self.placement)
        if count < needed or (count > needed and not self.least_squares):
            raise InvalidPlacementError(
                f"Order {self.order} needs {needed} sensors"
                f"{' or more' if self.least_squares else ''}, placement has {count}"
            )


@dataclass(frozen=True)
class SegmentState:
    theta: ModalConfig
    phi: float
    t: float = 0.0

    def orientation(self, s: ArrayLike) -> np.ndarray:
        return np.asarray(eval_orientation(self.theta, s))

    def planar_positions(self, s: ArrayLike, L: float, tol: float = DEFAULT_TOL) -> np.ndarray:
        return planar_positions(self.theta, s, L, tol)


@dataclass(frozen=True, eq=False)
class Pose:
    position: np.ndarray
    orientation: Quaternion

    def __post_init__(self) -> None:
        position = np.asarray(self.position, dtype=float)
        if position.shape != (3,):
            raise InvalidArgumentError(f"Pose position must be a 3-vector, got shape {position.shape}")
        object.__setattr__(self, "position", position)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), Quaternion.identity())

    def compose(self, other: "Pose") -> "Pose":
        """self * other: `other` expressed in this pose's frame."""
        position = self.position + self.orientation.rotate(other.position)
        return Pose(position, self.orientation * other.orientation)


class ShapeArrays(NamedTuple):
    segment: np.ndarray
    s: np.ndarray
    positions: np.ndarray
    quaternions: np.ndarray


def _check_state(spec: SegmentSpec, state: BendingProfile) -> None:
    if isinstance(state, SegmentState) and state.theta.order != spec.order:
        raise InvalidArgumentError(
            f"State has order {state.theta.order}, segment is configured for order {spec.order}"
        )


def segment_frames(
    spec: SegmentSpec,
    state: BendingProfile,
    s: ArrayLike,
    tol: float = DEFAULT_TOL,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Local positions (n, 3) and orientations (n, 4) along one segment.

    Frame convention: base tangent +z, bending plane spanned by z and
    [cos phi, sin phi, 0]; planar x maps to z and planar y to that direction.
    """
    _check_state(spec, state)
    s_arr = np.atleast_1d(check_arc(s))
    xy = state.planar_positions(s_arr, spec.length, tol)
    alpha = np.asarray(state.orientation(s_arr), dtype=float)
    c, d = math.cos(state.phi), math.sin(state.phi)
    positions = np.column_stack((xy[:, 1] * c, xy[:, 1] * d, xy[:, 0]))
    return positions, bend_quaternion_array(alpha, state.phi)


def segment_pose(spec: SegmentSpec, state: BendingProfile, s: float, tol: float = DEFAULT_TOL) -> Pose:
    positions, quats = segment_frames(spec, state, [s], tol)
    return Pose(positions[0], Quaternion.from_array(quats[0], normalize=True))


def _check_chain(specs: Sequence[SegmentSpec], states: Sequence[BendingProfile]) -> None:
    if len(specs) != len(states):
        raise InvalidArgumentError(f"{len(specs)} segment specs but {len(states)} states")
    if not specs:
        raise InvalidArgumentError("A robot needs at least one segment")


def chain_pose(
    specs: Sequence[SegmentSpec],
    states: Sequence[BendingProfile],
    segment_index: int,
    s: float,
    base: Optional[Pose] = None,
    tol: float = DEFAULT_TOL,
) -> Pose:
    """Pose at location s of segment `segment_index` in the robot base frame."""
    _check_chain(specs, states)
    if not 0 <= segment_index < len(specs):
        raise InvalidArgumentError(f"Segment index {segment_index} out of range for {len(specs)} segments")
    pose = base or Pose.identity()
    for spec, state in zip(specs[:segment_index], states[:segment_index]):
        pose = pose.compose(segment_pose(spec, state, 1.0, tol))
    return pose.compose(segment_pose(specs[segment_index], states[segment_index], s, tol))


def shape_arrays(
    specs: Sequence[SegmentSpec],
    states: Sequence[BendingProfile],
    points_per_segment: int = DEFAULT_POINTS_PER_SEGMENT,
    base: Optional[Pose] = None,
    tol: float = DEFAULT_TOL,
) -> ShapeArrays:
    """Vectorized sample_shape; each segment is sampled on linspace(0, 1, points_per_segment)."""
    _check_chain(specs, states)
    if points_per_segment < 2:
        raise InvalidArgumentError(f"points_per_segment must be >= 2, got {points_per_segment}")

    base = base or Pose.identity()
    p_base = base.position
    q_base = base.orientation.as_array()
    grid = np.linspace(0.0, 1.0, points_per_segment)

    segments, arcs, positions, quats = [], [], [], []
    for index, (spec, state) in enumerate(zip(specs, states)):
        local_p, local_q = segment_frames(spec, state, grid, tol)
        positions.append(p_base + quat_rotate(q_base, local_p))
        quats.append(quat_normalize(quat_multiply(q_base, local_q)))
        segments.append(np.full(points_per_segment, index))
        arcs.append(grid)
        # the distal sample of this segment is the base of the next
        p_base = positions[-1][-1]
        q_base = quats[-1][-1]

    return ShapeArrays(
        segment=np.concatenate(segments),
        s=np.concatenate(arcs),
        positions=np.vstack(positions),
        quaternions=np.vstack(quats),
    )


def sample_shape(
    specs: Sequence[SegmentSpec],
    states: Sequence[BendingProfile],
    points_per_segment: int = DEFAULT_POINTS_PER_SEGMENT,
    base: Optional[Pose] = None,
    tol: float = DEFAULT_TOL,
) -> List[Pose]:
    """Poses ordered base to tip; segment junctions appear once per adjacent segment."""
    shape = shape_arrays(specs, states, points_per_segment, base, tol)
    return [
        Pose(p, Quaternion.from_array(q, normalize=True))
        for p, q in zip(shape.positions, shape.quaternions)
    ]


def bending_direction(state: BendingProfile) -> float:
    """Bending direction in [0, 2pi) with the tip bent toward it (phi + pi for a negative tip angle)."""
    tip = float(np.asarray(state.orientation(1.0)))
    phi = state.phi + math.pi if tip < 0.0 else state.phi
    return phi % (2.0 * math.pi)
