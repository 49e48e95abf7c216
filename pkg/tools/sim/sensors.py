from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from core.errors import InvalidArgumentError
from tools.orientation.attitude_filter import ImuSample
from tools.orientation.quaternion import (
    Quaternion,
    quat_canonical,
    quat_conjugate,
    quat_exp,
    quat_log,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    quat_slerp,
)
from tools.sim.trajectories import GroundTruthFrame, segment_base_orientation, true_local_orientations

logger = logging.getLogger(__name__)

GRAVITY = 9.81
# unit geomagnetic field in the world frame: x toward north, 60 degrees dip
MAG_WORLD = np.array([math.cos(math.radians(60.0)), 0.0, -math.sin(math.radians(60.0))])


@dataclass(frozen=True)
class SensorSite:
    """Where a sensor sits on the backbone and how it is mounted."""

    id: str
    segment: int
    s: float
    extrinsic: Quaternion = field(default_factory=Quaternion.identity)


@dataclass(frozen=True, eq=False)
class OrientationStream:
    """Timestamped orientation samples (n, 4) of one sensor in the world frame."""

    sensor_id: str
    t: np.ndarray
    q: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float)
        q = np.asarray(self.q, dtype=float).reshape(-1, 4)
        if t.shape != (q.shape[0],):
            raise InvalidArgumentError(f"{self.sensor_id}: {t.size} timestamps for {q.shape[0]} samples")
        if np.any(np.diff(t) <= 0):
            raise InvalidArgumentError(f"{self.sensor_id}: timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "q", q)

    def __len__(self) -> int:
        return self.t.size


@dataclass(frozen=True, eq=False)
class ImuStream:
    """Raw inertial samples of one sensor; mag may be absent."""

    sensor_id: str
    t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray
    mag: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return np.asarray(self.t).size

    def samples(self) -> Iterator[ImuSample]:
        for k in range(len(self)):
            yield ImuSample(
                t=self.t[k],
                gyro=self.gyro[k],
                accel=self.accel[k],
                mag=None if self.mag is None else self.mag[k],
            )


def true_sensor_quaternions(
    frames: Sequence[GroundTruthFrame],
    site: SensorSite,
    base: Optional[Quaternion] = None,
) -> np.ndarray:
    """Noise-free sensor quaternions q_base * q_backbone * q_extrinsic, one per frame."""
    ext = site.extrinsic.as_array()
    out = np.empty((len(frames), 4))
    for k, frame in enumerate(frames):
        if not 0 <= site.segment < len(frame.segments):
            raise InvalidArgumentError(f"Sensor {site.id} is on segment {site.segment}, frame has {len(frame.segments)}")
        q_base = segment_base_orientation(frame, site.segment, base)
        local = true_local_orientations(frame.segments[site.segment], site.s)[0]
        out[k] = quat_multiply(quat_multiply(q_base, local), ext)
    return quat_canonical(quat_normalize(out))


def _frame_times(frames: Sequence[GroundTruthFrame]) -> np.ndarray:
    if not frames:
        raise InvalidArgumentError("No ground-truth frames")
    return np.array([frame.t for frame in frames])


def _resample(t_frames: np.ndarray, q_frames: np.ndarray, t_out: np.ndarray) -> np.ndarray:
    """Slerp frame quaternions onto new times inside the frame span."""
    idx = np.clip(np.searchsorted(t_frames, t_out, side="right") - 1, 0, max(t_frames.size - 2, 0))
    if t_frames.size == 1:
        return np.repeat(q_frames[:1], t_out.size, axis=0)
    span = t_frames[idx + 1] - t_frames[idx]
    u = np.clip((t_out - t_frames[idx]) / span, 0.0, 1.0)
    return quat_canonical(quat_slerp(q_frames[idx], q_frames[idx + 1], u))


def _sample_times(t_frames: np.ndarray, rate_hz: Optional[float]) -> np.ndarray:
    if rate_hz is None:
        return t_frames
    if rate_hz <= 0:
        raise InvalidArgumentError(f"rate_hz must be positive, got {rate_hz}")
    n = int(math.floor((t_frames[-1] - t_frames[0]) * rate_hz + 1e-9)) + 1
    return t_frames[0] + np.arange(n) / rate_hz


def synth_sensor_stream(
    frames: Sequence[GroundTruthFrame],
    sites: Sequence[SensorSite],
    noise_deg: float,
    rate_hz: Optional[float] = None,
    seed: int = 0,
    base: Optional[Quaternion] = None,
) -> Dict[str, OrientationStream]:
    """
    Noisy orientation streams for every sensor site.

    Each sample is perturbed as q * exp(r) with r ~ N(0, (sigma/sqrt(3))^2 I),
    so the RMS perturbation angle equals `noise_deg`. Deterministic in `seed`;
    `rate_hz=None` samples at the frame times.
    """
    if noise_deg < 0:
        raise InvalidArgumentError(f"noise_deg must be >= 0, got {noise_deg}")
    rng = np.random.default_rng(seed)
    t_frames = _frame_times(frames)
    t_out = _sample_times(t_frames, rate_hz)
    sigma_axis = math.radians(noise_deg) / math.sqrt(3.0)

    streams: Dict[str, OrientationStream] = {}
    for site in sites:
        q_true = true_sensor_quaternions(frames, site, base)
        q = q_true if t_out is t_frames else _resample(t_frames, q_true, t_out)
        if noise_deg > 0:
            perturbation = quat_exp(rng.normal(0.0, sigma_axis, (t_out.size, 3)))
            q = quat_canonical(quat_normalize(quat_multiply(q, perturbation)))
        streams[site.id] = OrientationStream(site.id, t_out.copy(), q)
    logger.info("Synthesized %d orientation streams, %d samples each, %.2f deg noise", len(streams), t_out.size, noise_deg)
    return streams


def synth_imu_raw(
    frames: Sequence[GroundTruthFrame],
    sites: Sequence[SensorSite],
    gyro_noise_deg_s: float,
    accel_noise: float,
    rate_hz: Optional[float] = None,
    seed: int = 0,
    mag_noise: float = 0.0,
    with_mag: bool = True,
    base: Optional[Quaternion] = None,
    gravity: float = GRAVITY,
) -> Dict[str, ImuStream]:
    """
    Raw gyro/accel/mag streams consistent with the true sensor attitudes.

    Gyro is the body-frame rate of the backward difference between
    consecutive attitudes, so integrating sample k from t_{k-1} lands on
    the true attitude at t_k. Accel is gravity seen in the body frame (the
    backbone's own acceleration is not modelled); mag is the unit field.
    """
    if gyro_noise_deg_s < 0 or accel_noise < 0 or mag_noise < 0:
        raise InvalidArgumentError("Noise levels must be >= 0")
    rng = np.random.default_rng(seed)
    t_frames = _frame_times(frames)
    t_out = _sample_times(t_frames, rate_hz)

    streams: Dict[str, ImuStream] = {}
    for site in sites:
        q_true = true_sensor_quaternions(frames, site, base)
        q = q_true if t_out is t_frames else _resample(t_frames, q_true, t_out)
        n = t_out.size

        gyro = np.zeros((n, 3))
        if n > 1:
            delta = quat_multiply(quat_conjugate(q[:-1]), q[1:])
            gyro[1:] = quat_log(delta) / np.diff(t_out)[:, None]
            gyro[0] = gyro[1]
        gyro += rng.normal(0.0, math.radians(gyro_noise_deg_s), (n, 3))

        q_inv = quat_conjugate(q)
        accel = quat_rotate(q_inv, np.array([0.0, 0.0, gravity])) + rng.normal(0.0, accel_noise, (n, 3))
        mag = None
        if with_mag:
            mag = quat_rotate(q_inv, MAG_WORLD) + rng.normal(0.0, mag_noise, (n, 3))

        streams[site.id] = ImuStream(site.id, t_out.copy(), gyro, accel, mag)
    logger.info("Synthesized %d raw IMU streams, %d samples each", len(streams), t_out.size)
    return streams


def inject_twist(stream: OrientationStream, site: SensorSite, angle: float) -> OrientationStream:
    """Twist the backbone under one sensor by `angle` about the local tangent."""
    ext = site.extrinsic.as_array()
    twist = quat_exp(np.array([0.0, 0.0, angle]))
    backbone = quat_multiply(stream.q, quat_conjugate(ext))
    q = quat_multiply(quat_multiply(backbone, twist), ext)
    return OrientationStream(stream.sensor_id, stream.t.copy(), quat_canonical(quat_normalize(q)))


def sites_for_segments(placements: Sequence[Sequence[float]], ids: Optional[Sequence[Sequence[str]]] = None) -> List[SensorSite]:
    """Default sensor sites: `seg<i>_s<j>` ids, identity mounting."""
    sites: List[SensorSite] = []
    for i, placement in enumerate(placements):
        for j, s in enumerate(placement):
            sensor_id = ids[i][j] if ids is not None else f"seg{i}_s{j}"
            sites.append(SensorSite(id=sensor_id, segment=i, s=float(s)))
    return sites
