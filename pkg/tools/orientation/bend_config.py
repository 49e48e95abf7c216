from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple, Union

import numpy as np

from core.errors import InvalidArgumentError
from tools.orientation.quaternion import (
    Quaternion,
    check_normalized,
    quat_canonical,
    quat_exp,
    quat_multiply,
)

ALPHA_MIN = math.radians(0.5)
TWIST_TOL = 0.02

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class BendConfig:
    """Bending angle alpha in [0, pi] about the plane normal, direction phi in [0, 2pi)."""

    alpha: float
    phi: float
    phi_defined: bool


class ConfigArrays(NamedTuple):
    alpha: np.ndarray
    phi: np.ndarray
    phi_defined: np.ndarray
    twist: np.ndarray


def _as_array(q: Union[Quaternion, np.ndarray]) -> np.ndarray:
    if isinstance(q, Quaternion):
        return q.as_array()
    return check_normalized(q)


def extract_config_array(q: np.ndarray, alpha_min: float = ALPHA_MIN) -> ConfigArrays:
    """Vectorized extract_config over (..., 4) quaternions."""
    q = quat_canonical(check_normalized(q))
    w, x, y, z = np.moveaxis(q, -1, 0)
    alpha = 2.0 * np.arccos(np.clip(w, -1.0, 1.0))
    # bend part of alpha, without any twist about the tangent
    bend = 2.0 * np.arctan2(np.hypot(x, y), w)
    defined = bend >= alpha_min
    phi = np.mod(np.arctan2(-x, y), TWO_PI)
    phi = np.where(defined, phi, 0.0)
    # mod can return exactly 2pi for tiny negative angles
    phi = np.where(phi >= TWO_PI, 0.0, phi)
    return ConfigArrays(alpha, phi, defined, np.abs(z))


def extract_config(
    q: Union[Quaternion, np.ndarray],
    alpha_min: float = ALPHA_MIN,
) -> Tuple[BendConfig, float]:
    """
    Bending configuration and twist residual |z| of a local segment quaternion.

    The direction is reported undefined (phi = 0) when the bending angle is
    below alpha_min, i.e. the segment is almost straight. Twist about the
    tangent does not count toward that angle.
    """
    arrays = extract_config_array(_as_array(q), alpha_min)
    config = BendConfig(
        alpha=float(arrays.alpha),
        phi=float(arrays.phi),
        phi_defined=bool(arrays.phi_defined),
    )
    return config, float(arrays.twist)


def bend_quaternion_array(alpha: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Rotation by alpha about n = [-sin phi, cos phi, 0]; any real alpha, canonical sign."""
    alpha = np.asarray(alpha, dtype=float)
    phi = np.asarray(phi, dtype=float)
    half = 0.5 * alpha
    s = np.sin(half)
    q = np.stack(
        (np.cos(half), -np.sin(phi) * s, np.cos(phi) * s, np.zeros(np.broadcast(half, phi).shape)),
        axis=-1,
    )
    return quat_canonical(q)


def config_to_quaternion(alpha: float, phi: float) -> Quaternion:
    if not (0.0 <= alpha <= math.pi):
        raise InvalidArgumentError(f"alpha must lie in [0, pi], got {alpha}")
    if not math.isfinite(phi):
        raise InvalidArgumentError(f"phi must be finite, got {phi}")
    half = 0.5 * alpha
    s = math.sin(half)
    return Quaternion(math.cos(half), -math.sin(phi) * s, math.cos(phi) * s, 0.0)


def signed_bend_angles(q: np.ndarray, phi: Union[float, np.ndarray]) -> np.ndarray:
    """In-plane angle of (..., 4) quaternions projected on the bending plane phi."""
    q = quat_canonical(np.asarray(q, dtype=float))
    w, x, y = q[..., 0], q[..., 1], q[..., 2]
    return 2.0 * np.arctan2(-x * np.sin(phi) + y * np.cos(phi), w)


def signed_bend_angle(q: Union[Quaternion, np.ndarray], phi: float) -> float:
    """
    Signed bending angle of q measured in the plane with direction phi.

    Equals alpha for the quaternion's own phi and -alpha for phi + pi, which
    lets sensors on one segment share a single bending direction.
    """
    return float(signed_bend_angles(_as_array(q), phi))


def twist_about_tangent(q: Union[Quaternion, np.ndarray], angle: float) -> np.ndarray:
    """Post-multiply a rotation of `angle` about the local tangent (z)."""
    twist = quat_exp(np.array([0.0, 0.0, angle]))
    return quat_canonical(quat_multiply(_as_array(q), twist))
