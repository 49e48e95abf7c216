from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from core.errors import ConfigurationError, InvalidArgumentError
from tools.orientation.quaternion import (
    Quaternion,
    quat_canonical,
    quat_conjugate,
    quat_exp,
    quat_log,
    quat_multiply,
    quat_normalize,
    quat_to_matrix,
)

logger = logging.getLogger(__name__)

UP = np.array([0.0, 0.0, 1.0])


def _vector(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be a finite 3-vector, got {values!r}")
    return arr


@dataclass(frozen=True, eq=False)
class ImuSample:
    """One raw inertial sample: gyro in rad/s (body), accel in m/s^2 (specific force), optional mag."""

    t: float
    gyro: np.ndarray
    accel: np.ndarray
    mag: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "gyro", _vector(self.gyro, "gyro"))
        object.__setattr__(self, "accel", _vector(self.accel, "accel"))
        if self.mag is not None:
            object.__setattr__(self, "mag", _vector(self.mag, "mag"))


@dataclass(frozen=True)
class FilterGains:
    kp: float = 1.0
    ki: float = 0.01
    # correction skipped when | |accel| - g | exceeds this fraction of g
    accel_gate: float = 0.2
    gravity: float = 9.81
    # proportional gain starts at init_gain and ramps linearly to kp over init_period_s
    init_gain: float = 10.0
    init_period_s: float = 3.0
    # integral held while the reference error exceeds this angle
    integral_gate_deg: float = 5.0

    def __post_init__(self) -> None:
        if not (self.kp > 0 and self.ki >= 0 and self.init_gain >= self.kp):
            raise ConfigurationError(
                f"Filter gains need kp > 0, ki >= 0 and init_gain >= kp "
                f"(kp={self.kp}, ki={self.ki}, init_gain={self.init_gain})"
            )
        if self.init_period_s < 0 or self.integral_gate_deg <= 0:
            raise ConfigurationError("init_period_s must be >= 0 and integral_gate_deg > 0")

    def gain_at(self, elapsed: float) -> float:
        if elapsed >= self.init_period_s:
            return self.kp
        return self.init_gain + (self.kp - self.init_gain) * elapsed / self.init_period_s

    def initialising(self, elapsed: float) -> bool:
        return elapsed < self.init_period_s


@dataclass(frozen=True, eq=False)
class FilterState:
    q: np.ndarray
    integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: Optional[float] = None
    # seconds since the filter started, drives the start-up gain ramp
    elapsed: float = 0.0

    @classmethod
    def initial(cls, q: Optional[Quaternion] = None, t: Optional[float] = None) -> "FilterState":
        start = (q or Quaternion.identity()).as_array()
        return cls(q=start, integral=np.zeros(3), t=t, elapsed=0.0)

    @property
    def quaternion(self) -> Quaternion:
        return Quaternion.from_array(self.q, normalize=True)


def _tilt_error(q: np.ndarray, up_measured: np.ndarray) -> np.ndarray:
    # body-frame rotation vector carrying the estimated up onto the measured one
    up_estimated = quat_to_matrix(q).T @ UP
    axis = np.cross(up_measured, up_estimated)
    sin_angle = np.linalg.norm(axis)
    cos_angle = float(np.dot(up_measured, up_estimated))
    if sin_angle < 1e-12:
        if cos_angle > 0.0:
            return np.zeros(3)
        # upside down: any axis normal to up_estimated will do
        helper = np.eye(3)[int(np.argmin(np.abs(up_estimated)))]
        axis = np.cross(up_estimated, helper)
        return np.pi * axis / np.linalg.norm(axis)
    return np.arctan2(sin_angle, cos_angle) * axis / sin_angle


def _reference_error(q: np.ndarray, accel: np.ndarray, mag: Optional[np.ndarray]) -> np.ndarray:
    """
    Body-frame rotation vector from the estimate to the attitude the references imply.

    The magnitude is the error angle itself, so the correction does not stall
    for large errors. Without a usable magnetometer only the tilt is observed.
    """
    up_measured = accel / np.linalg.norm(accel)
    if mag is not None:
        horizontal = mag - np.dot(mag, up_measured) * up_measured
        if np.linalg.norm(horizontal) > 1e-6:
            q_ref = align_from_reference(accel, mag).as_array()
            return quat_log(quat_multiply(quat_conjugate(q), q_ref))
    return _tilt_error(q, up_measured)


def attitude_update(
    state: FilterState,
    sample: ImuSample,
    dt: float,
    gains: FilterGains = FilterGains(),
) -> FilterState:
    """
    One complementary-filter step.

    Integrates the gyro with the exact exponential map, then rotates the
    prediction along the geodesic toward the gravity (and magnetic heading)
    references with proportional-integral feedback. The proportional step
    never passes the reference, so with static input the error angle only
    shrinks. During the start-up period the gain is ramped down from
    ``init_gain`` and the integral stays at zero; afterwards it only
    accumulates while the error is below ``integral_gate_deg``. The returned
    state belongs to sample.t.
    """
    if not dt > 0:
        raise InvalidArgumentError(f"Filter step needs dt > 0, got {dt}")

    q_pred = quat_normalize(quat_multiply(state.q, quat_exp(sample.gyro * dt)))
    elapsed = state.elapsed + dt

    accel_norm = float(np.linalg.norm(sample.accel))
    if accel_norm == 0.0 or abs(accel_norm - gains.gravity) > gains.accel_gate * gains.gravity:
        logger.debug("t=%.4f: accel norm %.3f outside gate, gyro only", sample.t, accel_norm)
        return FilterState(q=quat_canonical(q_pred), integral=state.integral, t=sample.t, elapsed=elapsed)

    error = _reference_error(q_pred, sample.accel, sample.mag)
    integral = state.integral
    if gains.initialising(state.elapsed):
        integral = np.zeros(3)
    elif np.linalg.norm(error) < math.radians(gains.integral_gate_deg):
        integral = integral + error * dt

    step = min(gains.gain_at(state.elapsed) * dt, 1.0) * error + gains.ki * integral * dt
    q_new = quat_normalize(quat_multiply(q_pred, quat_exp(step)))
    return FilterState(q=quat_canonical(q_new), integral=integral, t=sample.t, elapsed=elapsed)


def align_from_reference(accel: Sequence[float], mag: Optional[Sequence[float]] = None) -> Quaternion:
    """
    Static alignment from one accelerometer (and magnetometer) reading.

    World frame: z up, x toward the horizontal magnetic north. Without a
    magnetometer the heading is taken from the body x axis.
    """
    up_b = _vector(accel, "accel")
    if np.linalg.norm(up_b) == 0.0:
        raise InvalidArgumentError("Cannot align from a zero accelerometer reading")
    up_b = up_b / np.linalg.norm(up_b)

    ref = _vector(mag, "mag") if mag is not None else np.array([1.0, 0.0, 0.0])
    north_b = ref - np.dot(ref, up_b) * up_b
    if np.linalg.norm(north_b) < 1e-6:
        ref = np.array([0.0, 1.0, 0.0])
        north_b = ref - np.dot(ref, up_b) * up_b
    north_b = north_b / np.linalg.norm(north_b)
    west_b = np.cross(up_b, north_b)

    # rows are the world axes seen from the body, i.e. the body-to-world matrix
    matrix = np.vstack((north_b, west_b, up_b))
    x, y, z, w = Rotation.from_matrix(matrix).as_quat()
    return Quaternion.from_array([w, x, y, z], normalize=True)


def filter_stream(
    samples: Iterable[ImuSample],
    gains: FilterGains = FilterGains(),
    initial: Optional[Quaternion] = None,
) -> List[FilterState]:
    """Run the filter over one sensor's samples; the first state is aligned from the first sample."""
    states: List[FilterState] = []
    for sample in samples:
        if not states:
            start = initial or align_from_reference(sample.accel, sample.mag)
            states.append(FilterState.initial(start, t=sample.t))
            continue
        previous = states[-1]
        dt = sample.t - previous.t
        if dt <= 0:
            raise InvalidArgumentError(
                f"IMU timestamps must be strictly increasing ({previous.t} then {sample.t})"
            )
        states.append(attitude_update(previous, sample, dt, gains))
    return states
