from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from core.errors import InvalidArgumentError, NotNormalizedError

NORM_TOL = 1e-9

# Array helpers work on (..., 4) arrays ordered [w, x, y, z] and broadcast.


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a * b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        (
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ),
        axis=-1,
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise InvalidArgumentError("Cannot normalize a zero quaternion")
    return q / norm


def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Flip sign so that w >= 0."""
    q = np.asarray(q, dtype=float)
    return np.where(q[..., :1] < 0.0, -q, q)


def quat_exp(rotvec: np.ndarray) -> np.ndarray:
    """Unit quaternion of the rotation vector (axis * angle)."""
    rotvec = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(rotvec, axis=-1, keepdims=True)
    # sin(angle/2)/angle without the 0/0
    scale = 0.5 * np.sinc(angle / (2.0 * np.pi))
    return np.concatenate((np.cos(0.5 * angle), scale * rotvec), axis=-1)


def quat_log(q: np.ndarray) -> np.ndarray:
    """Rotation vector of a unit quaternion, angle in [0, pi]."""
    q = quat_canonical(q)
    v = q[..., 1:]
    sin_half = np.linalg.norm(v, axis=-1, keepdims=True)
    angle = 2.0 * np.arctan2(sin_half, q[..., :1])
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(sin_half > 1e-12, angle / sin_half, 2.0)
    return scale * v


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vectors v (..., 3) by q."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w = q[..., :1]
    u = q[..., 1:]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    rows = (
        (1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)),
        (2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)),
        (2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)),
    )
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def quat_slerp(q1: np.ndarray, q2: np.ndarray, u: Union[float, np.ndarray]) -> np.ndarray:
    """Shortest-path spherical interpolation; u broadcasts against the leading axes."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    u = np.asarray(u, dtype=float)[..., None]
    dot = np.sum(q1 * q2, axis=-1, keepdims=True)
    q2 = np.where(dot < 0.0, -q2, q2)
    delta = quat_multiply(quat_conjugate(q1), q2)
    return quat_normalize(quat_multiply(q1, quat_exp(u * quat_log(delta))))


def quat_angle_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation angle of a^-1 b in [0, pi]."""
    dot = np.abs(np.sum(np.asarray(a, dtype=float) * np.asarray(b, dtype=float), axis=-1))
    return 2.0 * np.arccos(np.clip(dot, 0.0, 1.0))


def check_normalized(q: np.ndarray, tol: float = NORM_TOL) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1:] != (4,):
        raise InvalidArgumentError(f"Quaternion arrays need a trailing axis of 4, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise NotNormalizedError("Quaternion components must be finite")
    deviation = np.max(np.abs(np.sum(q * q, axis=-1) - 1.0)) if q.size else 0.0
    if deviation > tol:
        raise NotNormalizedError(
            f"Quaternion norm deviates from 1 by {deviation:.3g} (tolerance {tol:g})",
            deviation=float(deviation),
        )
    return q


@dataclass(frozen=True)
class Quaternion:
    """Unit rotation quaternion [w, x, y, z], stored with w >= 0."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        values = check_normalized(np.array([self.w, self.x, self.y, self.z], dtype=float))
        if values[0] < 0.0:
            values = -values
        for name, value in zip("wxyz", values):
            object.__setattr__(self, name, float(value))

    @classmethod
    def identity(cls) -> "Quaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, values: Sequence[float], normalize: bool = False) -> "Quaternion":
        arr = np.asarray(values, dtype=float)
        if arr.shape != (4,):
            raise InvalidArgumentError(f"Quaternion needs 4 components, got shape {arr.shape}")
        if normalize:
            arr = quat_normalize(arr)
        return cls(*arr)

    @classmethod
    def from_rotvec(cls, rotvec: Sequence[float]) -> "Quaternion":
        return cls.from_array(quat_normalize(quat_exp(rotvec)))

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle: float) -> "Quaternion":
        axis = np.asarray(axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            raise InvalidArgumentError("Rotation axis must be non-zero")
        return cls.from_rotvec(axis / norm * angle)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        if not isinstance(other, Quaternion):
            return NotImplemented
        return product(self, other)

    def rotate(self, v: Sequence[float]) -> np.ndarray:
        return quat_rotate(self.as_array(), v)

    def as_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.as_array())

    def as_rotvec(self) -> np.ndarray:
        return quat_log(self.as_array())

    def angle_to(self, other: "Quaternion") -> float:
        return float(quat_angle_between(self.as_array(), other.as_array()))


def product(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product, renormalized so long chains stay within the unit-norm tolerance."""
    return Quaternion.from_array(quat_multiply(a.as_array(), b.as_array()), normalize=True)


def conjugate(q: Quaternion) -> Quaternion:
    return q.conjugate()


def normalize(values: Sequence[float]) -> Quaternion:
    return Quaternion.from_array(values, normalize=True)


def slerp(q1: Quaternion, q2: Quaternion, u: float) -> Quaternion:
    if not (0.0 <= u <= 1.0) or math.isnan(u):
        raise InvalidArgumentError(f"slerp parameter must lie in [0, 1], got {u}")
    if q1 == q2:
        return q1
    return Quaternion.from_array(quat_slerp(q1.as_array(), q2.as_array(), u))


def angle_between(a: Quaternion, b: Quaternion) -> float:
    return a.angle_to(b)
