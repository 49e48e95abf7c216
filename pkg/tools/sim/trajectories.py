from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.errors import ConfigurationError, InvalidArgumentError
from tools.chain.kinematics import Pose, SegmentSpec, ShapeArrays, shape_arrays
from tools.orientation.bend_config import bend_quaternion_array
from tools.orientation.quaternion import Quaternion, quat_multiply, quat_normalize
from tools.ppc.curvature import ArrayLike, ModalConfig, check_arc, eval_orientation
from tools.ppc.position import planar_positions, profile_positions
from tools.ppc.quadrature import DEFAULT_TOL, cumulative_integral

logger = logging.getLogger(__name__)

KINDS = ("swing", "free_oscillation", "tip_interaction", "body_interaction", "circular_3d")

# free oscillation values are placeholders, not measured dynamics
DEFAULT_FREQUENCY_HZ = {
    "swing": 0.2,
    "free_oscillation": 1.0,
    "tip_interaction": 0.2,
    "body_interaction": 0.2,
    "circular_3d": 0.1,
}


@dataclass(frozen=True)
class TrajectorySpec:
    """
    Parameters of one ground-truth motion.

    Every kind evaluates theta(t) = theta_offset + a(t) * theta_amplitude:

    - swing: a(t) = sin(2 pi f t) with fixed phi
    - free_oscillation: a(t) = exp(-zeta w t) cos(w_d t), w = 2 pi f
    - circular_3d: a(t) = 1 while phi sweeps 2 pi f t
    - tip_interaction: a(t) = 0, plus a tip load F(t) adding [F, -F]
    - body_interaction: a(t) = 0, plus a Gaussian curvature bump of gain F(t)

    The interaction loads ramp in over `ramp_s` seconds and then breathe
    between zero and full load at `frequency_hz`.
    """

    kind: str
    duration_s: float = 10.0
    rate_hz: float = 60.0
    theta_amplitude: tuple = (1.2, 0.8)
    theta_offset: tuple = (0.0, 0.0)
    frequency_hz: Optional[float] = None
    damping_ratio: float = 0.05
    phi: float = 0.0
    tip_load: float = 1.5
    bump_gain: float = -3.0
    bump_center: float = 0.5
    bump_width: float = 0.1
    ramp_s: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigurationError(f"Unknown trajectory kind {self.kind!r}; expected one of {KINDS}")
        if not (self.rate_hz > 0 and self.duration_s > 0):
            raise ConfigurationError(
                f"rate_hz and duration_s must be positive, got {self.rate_hz} and {self.duration_s}"
            )
        if not 0.0 <= self.damping_ratio < 1.0:
            raise ConfigurationError(f"damping_ratio must lie in [0, 1), got {self.damping_ratio}")
        if self.bump_width <= 0:
            raise ConfigurationError(f"bump_width must be positive, got {self.bump_width}")
        object.__setattr__(self, "theta_amplitude", tuple(float(v) for v in self.theta_amplitude))
        object.__setattr__(self, "theta_offset", tuple(float(v) for v in self.theta_offset))
        if self.frequency_hz is None:
            object.__setattr__(self, "frequency_hz", DEFAULT_FREQUENCY_HZ[self.kind])

    @classmethod
    def from_mapping(cls, kind: str, values: Mapping[str, Any]) -> "TrajectorySpec":
        known = {f.name for f in fields(cls)} - {"kind"}
        unknown = set(values) - known
        if unknown:
            raise ConfigurationError(f"Unknown scenario keys for {kind}: {sorted(unknown)}")
        return cls(kind=kind, **dict(values))

    def times(self) -> np.ndarray:
        n = max(1, int(round(self.duration_s * self.rate_hz)))
        return np.arange(n) / self.rate_hz


@dataclass(frozen=True)
class TrueCurvature:
    """
    Ground-truth curvature of one segment: a polynomial plus an optional
    Gaussian bump, with its bending direction phi.
    """

    theta: ModalConfig
    phi: float
    bump_gain: float = 0.0
    bump_center: float = 0.5
    bump_width: float = 0.1

    @property
    def is_polynomial(self) -> bool:
        return self.bump_gain == 0.0

    def _bump(self, v: np.ndarray) -> np.ndarray:
        return self.bump_gain * np.exp(-0.5 * ((v - self.bump_center) / self.bump_width) ** 2)

    def curvature(self, s: ArrayLike) -> np.ndarray:
        s = np.asarray(check_arc(s), dtype=float)
        return np.asarray(self.theta.curvature(s)) + self._bump(s)

    def orientation(self, s: ArrayLike) -> np.ndarray:
        s = np.asarray(check_arc(s), dtype=float)
        alpha = np.asarray(eval_orientation(self.theta, s), dtype=float)
        if self.is_polynomial:
            return alpha
        bump = cumulative_integral(self._bump, np.atleast_1d(s))[0]
        return alpha + bump.reshape(alpha.shape)

    def planar_positions(self, s: ArrayLike, L: float, tol: float = DEFAULT_TOL) -> np.ndarray:
        if self.is_polynomial:
            return planar_positions(self.theta, s, L, tol)
        return profile_positions(self.orientation, s, L, tol)


@dataclass(frozen=True)
class GroundTruthFrame:
    t: float
    segments: Tuple[TrueCurvature, ...]


def _envelope(spec: TrajectorySpec, t: float) -> float:
    omega = 2.0 * math.pi * spec.frequency_hz
    if spec.kind == "swing":
        return math.sin(omega * t)
    if spec.kind == "free_oscillation":
        zeta = spec.damping_ratio
        return math.exp(-zeta * omega * t) * math.cos(omega * math.sqrt(1.0 - zeta * zeta) * t)
    if spec.kind == "circular_3d":
        return 1.0
    return 0.0


def _load(spec: TrajectorySpec, t: float) -> float:
    ramp = min(1.0, t / spec.ramp_s) if spec.ramp_s > 0 else 1.0
    return ramp * (0.5 + 0.5 * math.sin(2.0 * math.pi * spec.frequency_hz * t))


def _padded(values: Sequence[float], size: int) -> np.ndarray:
    out = np.zeros(size)
    out[: len(values)] = values
    return out


def gen_trajectory(spec: TrajectorySpec, segment_phis: Optional[Sequence[float]] = None) -> List[GroundTruthFrame]:
    """
    Ground-truth frames at t = k / rate_hz for every configured segment.

    Each segment receives the same curvature profile with its own bending
    direction (spec.phi when `segment_phis` is not given).
    """
    phis = list(segment_phis) if segment_phis is not None else [spec.phi]
    if not phis:
        raise InvalidArgumentError("gen_trajectory needs at least one segment")

    size = max(len(spec.theta_amplitude), len(spec.theta_offset), 2 if spec.kind == "tip_interaction" else 1)
    offset = _padded(spec.theta_offset, size)
    amplitude = _padded(spec.theta_amplitude, size)
    tip_profile = _padded((1.0, -1.0), size)

    frames: List[GroundTruthFrame] = []
    for t in spec.times():
        t = float(t)
        theta = offset + _envelope(spec, t) * amplitude
        bump_gain = 0.0
        if spec.kind == "tip_interaction":
            theta = theta + spec.tip_load * _load(spec, t) * tip_profile
        elif spec.kind == "body_interaction":
            bump_gain = spec.bump_gain * _load(spec, t)

        sweep = 2.0 * math.pi * spec.frequency_hz * t if spec.kind == "circular_3d" else 0.0
        segments = tuple(
            TrueCurvature(
                theta=ModalConfig(tuple(theta)),
                phi=(phi + sweep) % (2.0 * math.pi),
                bump_gain=bump_gain,
                bump_center=spec.bump_center,
                bump_width=spec.bump_width,
            )
            for phi in phis
        )
        frames.append(GroundTruthFrame(t=t, segments=segments))

    logger.info("Generated %d %s frames at %.1f Hz", len(frames), spec.kind, spec.rate_hz)
    return frames


def true_local_orientations(profile: TrueCurvature, s: ArrayLike) -> np.ndarray:
    """Segment-local quaternions (n, 4) of a true profile."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    return bend_quaternion_array(profile.orientation(s_arr), profile.phi)


def segment_base_orientation(frame: GroundTruthFrame, segment: int, base: Optional[Quaternion] = None) -> np.ndarray:
    q = (base or Quaternion.identity()).as_array()
    for profile in frame.segments[:segment]:
        q = quat_normalize(quat_multiply(q, true_local_orientations(profile, 1.0)[0]))
    return q


def true_orientation_at(
    frame: GroundTruthFrame,
    s: float,
    segment: int = 0,
    base: Optional[Quaternion] = None,
) -> Quaternion:
    """Backbone orientation at location s of `segment` in the robot base frame."""
    if not 0 <= segment < len(frame.segments):
        raise InvalidArgumentError(f"Segment {segment} out of range for {len(frame.segments)} segments")
    q_base = segment_base_orientation(frame, segment, base)
    local = true_local_orientations(frame.segments[segment], s)[0]
    return Quaternion.from_array(quat_multiply(q_base, local), normalize=True)


def truth_shape(
    frame: GroundTruthFrame,
    specs: Sequence[SegmentSpec],
    points_per_segment: int = 50,
    base: Optional[Pose] = None,
    tol: float = DEFAULT_TOL,
) -> ShapeArrays:
    return shape_arrays(specs, frame.segments, points_per_segment, base, tol)


def fit_modal(profile: TrueCurvature, order: int, n_points: int = 200) -> Tuple[ModalConfig, float]:
    """
    Least-squares order-m fit of a true orientation profile on an even grid.

    Returns the fitted configuration and the RMS orientation residual in radians.
    """
    if order < 0:
        raise InvalidArgumentError(f"order must be >= 0, got {order}")
    s = np.linspace(0.0, 1.0, n_points)
    k = np.arange(1, order + 2)
    basis = s[:, None] ** k[None, :] / k[None, :]
    alpha = profile.orientation(s)
    coeffs, *_ = np.linalg.lstsq(basis, alpha, rcond=None)
    residual = alpha - basis @ coeffs
    return ModalConfig(tuple(coeffs)), float(np.sqrt(np.mean(residual ** 2)))


def scenario_spec(kind: str, overrides: Optional[Mapping[str, Any]] = None, **defaults: Any) -> TrajectorySpec:
    """Build a TrajectorySpec from config defaults (rate, duration) and per-scenario overrides."""
    return TrajectorySpec.from_mapping(kind, {**defaults, **dict(overrides or {})})
