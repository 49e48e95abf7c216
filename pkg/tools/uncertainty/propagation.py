from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import chi2

from core.errors import InvalidArgumentError, SingularOrientationError
from tools.modal.solver import ModalSolver, SensorPlacement
from tools.ppc.curvature import ModalConfig, check_arc
from tools.ppc.position import BATCH_NODES, positions_batch
from tools.ppc.quadrature import DEFAULT_TOL, integrate_panels

logger = logging.getLogger(__name__)

# |w| this close to 1 means alpha ~ 0 where d alpha / dw is unbounded
SINGULAR_W = 1e-9
PSD_SLACK = 1e-12


@dataclass(frozen=True)
class QuatNoise:
    """Standard deviation of the quaternion scalar w, one entry per sensor."""

    sigma_w: tuple

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in np.atleast_1d(np.asarray(self.sigma_w, dtype=float)))
        if not all(math.isfinite(v) and v >= 0.0 for v in values):
            raise InvalidArgumentError(f"sigma_w entries must be finite and >= 0: {values}")
        object.__setattr__(self, "sigma_w", values)

    def covariance(self) -> np.ndarray:
        return np.diag(np.square(self.sigma_w))


class Ellipse(NamedTuple):
    semi_axes: Tuple[float, float]
    angle: float


def _solver(placement: SensorPlacement, order: Optional[int]) -> ModalSolver:
    m = len(placement) - 1 if order is None else order
    return ModalSolver(placement, order=m, least_squares=len(placement) > m + 1)


def _signs(signs: Optional[Sequence[float]], n: int) -> np.ndarray:
    if signs is None:
        return np.ones(n)
    arr = np.asarray(signs, dtype=float)
    if arr.shape != (n,):
        raise InvalidArgumentError(f"Expected {n} bending signs, got shape {arr.shape}")
    return np.where(arr < 0.0, -1.0, 1.0)


def jacobian_w_to_modal(
    placement: SensorPlacement,
    w_values: Sequence[float],
    signs: Optional[Sequence[float]] = None,
    order: Optional[int] = None,
) -> np.ndarray:
    """
    d theta / d w through alpha = sign * 2 arccos(w) and the modal solve.

    `signs` carries the side of the bending plane each sensor is bent to
    (default all positive). The solve uses the placement's factorization,
    never an explicit inverse.
    """
    w = np.asarray(w_values, dtype=float)
    if w.shape != (len(placement),):
        raise InvalidArgumentError(f"Expected {len(placement)} w values, got shape {w.shape}")
    if np.any(np.abs(w) > 1.0):
        raise InvalidArgumentError(f"w values must lie in [-1, 1]: {w}")
    if np.any(1.0 - np.abs(w) < SINGULAR_W):
        raise SingularOrientationError(
            "Sensor orientation too close to identity for w-based propagation",
            max_abs_w=float(np.max(np.abs(w))),
        )
    d_alpha = -2.0 * _signs(signs, w.size) / np.sqrt(1.0 - w * w)
    return _solver(placement, order).solve_many(np.diag(d_alpha))


def jacobian_modal_to_position(
    theta: ModalConfig,
    s: float,
    L: float,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """d(x, y) / d theta, shape (2, m+1), by adaptive quadrature of the differentiated integrand."""
    s = check_arc(s)
    coeffs = theta.orientation_coeffs()
    k = np.arange(1, theta.order + 2)

    def integrand(v: np.ndarray) -> np.ndarray:
        alpha = np.polynomial.polynomial.polyval(v, coeffs)
        basis = v[None, :] ** k[:, None] / k[:, None]
        return np.vstack((-np.sin(alpha) * basis, np.cos(alpha) * basis))

    values = integrate_panels(integrand, np.array([0.0, s]), tol=tol)[0]
    return L * values.reshape(2, k.size)


def position_covariance(
    placement: SensorPlacement,
    w_values: Sequence[float],
    theta: ModalConfig,
    s: float,
    L: float,
    noise: QuatNoise,
    signs: Optional[Sequence[float]] = None,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """First-order planar position covariance J Sigma_w J^T with J = J_m^p J_w^m."""
    if len(noise.sigma_w) != len(placement):
        raise InvalidArgumentError(
            f"{len(noise.sigma_w)} noise entries for {len(placement)} sensors"
        )
    j_wm = jacobian_w_to_modal(placement, w_values, signs, order=theta.order)
    j_mp = jacobian_modal_to_position(theta, s, L, tol)
    j = j_mp @ j_wm
    cov = j @ noise.covariance() @ j.T
    return 0.5 * (cov + cov.T)


def uncertainty_ellipse(cov: np.ndarray, confidence: float) -> Ellipse:
    """
    Confidence ellipse of a planar covariance.

    Semi-axes are sqrt(q * lambda) with q the chi-square(2) quantile at the
    given confidence, major axis first; angle is the major-axis direction in
    (-pi/2, pi/2].
    """
    if not 0.0 < confidence < 1.0:
        raise InvalidArgumentError(f"confidence must lie in (0, 1), got {confidence}")
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2) or not np.all(np.isfinite(cov)):
        raise InvalidArgumentError(f"Expected a finite 2x2 covariance, got shape {cov.shape}")
    scale = max(1.0, float(np.max(np.abs(cov))))
    if abs(cov[0, 1] - cov[1, 0]) > PSD_SLACK * scale:
        raise InvalidArgumentError("Covariance must be symmetric")

    values, vectors = np.linalg.eigh(0.5 * (cov + cov.T))
    if values[0] < -PSD_SLACK * scale:
        raise InvalidArgumentError(f"Covariance is not positive semi-definite (eigenvalues {values})")
    values = np.clip(values, 0.0, None)

    q = chi2.ppf(confidence, df=2)
    major = vectors[:, 1]
    angle = math.atan2(major[1], major[0])
    if angle <= -math.pi / 2:
        angle += math.pi
    elif angle > math.pi / 2:
        angle -= math.pi
    return Ellipse((math.sqrt(q * values[1]), math.sqrt(q * values[0])), angle)


def ellipse_points(center: Sequence[float], ellipse: Ellipse, n: int = 100) -> np.ndarray:
    """Closed polygon (n, 2) around `center` for plotting."""
    t = np.linspace(0.0, 2.0 * math.pi, n)
    a, b = ellipse.semi_axes
    c, d = math.cos(ellipse.angle), math.sin(ellipse.angle)
    local = np.column_stack((a * np.cos(t), b * np.sin(t)))
    rotation = np.array([[c, -d], [d, c]])
    return np.asarray(center, dtype=float) + local @ rotation.T


def w_from_modal(theta: ModalConfig, placement: SensorPlacement) -> Tuple[np.ndarray, np.ndarray]:
    """Noise-free sensor w values and bending signs at an operating point."""
    alpha = np.asarray(theta.orientation(placement.as_array()), dtype=float)
    return np.cos(0.5 * alpha), np.where(alpha < 0.0, -1.0, 1.0)


def sigma_w_from_angle(alpha: Sequence[float], sigma_deg: float) -> np.ndarray:
    """
    sigma of w for angular sensor noise.

    A small rotation delta about the bending axis moves w by
    -sin(alpha/2) * delta / 2; `sigma_deg` is the standard deviation of that
    rotation component.
    """
    alpha = np.asarray(alpha, dtype=float)
    return 0.5 * np.abs(np.sin(0.5 * alpha)) * math.radians(sigma_deg)


def monte_carlo_covariance(
    placement: SensorPlacement,
    w_values: Sequence[float],
    s: float,
    L: float,
    noise: QuatNoise,
    n_samples: int = 100_000,
    seed: int = 0,
    signs: Optional[Sequence[float]] = None,
    batch_size: int = 20_000,
    nodes: int = BATCH_NODES,
) -> np.ndarray:
    """
    Sampling estimate of the planar position covariance.

    Perturbs w with Gaussian noise, clamps to [-1, 1], maps back through
    alpha = sign * 2 arccos(w), re-solves the modal system and integrates the
    position for every trial.
    """
    w = np.asarray(w_values, dtype=float)
    sigma = np.asarray(noise.sigma_w)
    sign = _signs(signs, w.size)
    solver = _solver(placement, None)
    rng = np.random.default_rng(seed)

    chunks = []
    remaining = n_samples
    while remaining > 0:
        size = min(batch_size, remaining)
        perturbed = np.clip(w + rng.normal(0.0, 1.0, (size, w.size)) * sigma, -1.0, 1.0)
        alphas = sign * 2.0 * np.arccos(perturbed)
        thetas = solver.solve_many(alphas.T).T
        chunks.append(positions_batch(thetas, s, L, nodes))
        remaining -= size

    samples = np.vstack(chunks)
    logger.debug("monte_carlo_covariance: %d trials", samples.shape[0])
    return np.cov(samples, rowvar=False, ddof=1)
