from __future__ import annotations

import logging
import math
from typing import Callable, NamedTuple, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from core.errors import InvalidArgumentError
from tools.ppc.curvature import ArrayLike, ModalConfig, check_arc
from tools.ppc.fresnel import fresnel
from tools.ppc.quadrature import DEFAULT_TOL, cumulative_integral, gauss_legendre

logger = logging.getLogger(__name__)

# |theta0 * s| below this uses the Taylor limit of the constant-curvature arc
ORDER0_SERIES_SWITCH = 1e-4
# |theta1| below this * max(1, |theta0|) is treated as the constant-curvature limit
ORDER1_DEGENERACY = 1e-6
# completed-square phase theta0^2 / (2 |theta1|) above which Fresnel differences cancel badly
ORDER1_PHASE_LIMIT = 1e4

BATCH_NODES = 64


class PlanarPoint(NamedTuple):
    """Bending-plane coordinates in meters (x along the base tangent)."""

    x: float
    y: float


def _check_length(L: float) -> float:
    if not (L > 0 and math.isfinite(L)):
        raise InvalidArgumentError(f"Segment length must be positive, got {L!r}")
    return float(L)


def _order0_xy(theta0: float, s: np.ndarray, L: float) -> Tuple[np.ndarray, np.ndarray]:
    u = theta0 * s
    series = np.abs(u) < ORDER0_SERIES_SWITCH
    x = np.empty_like(s)
    y = np.empty_like(s)

    us = u[series]
    u2 = us * us
    x[series] = s[series] * L * (1.0 - u2 / 6.0 + u2 * u2 / 120.0)
    y[series] = s[series] * L * us * (0.5 - u2 / 24.0 + u2 * u2 / 720.0)

    ua = u[~series]
    if ua.size:
        x[~series] = L * np.sin(ua) / theta0
        y[~series] = 2.0 * L * np.sin(0.5 * ua) ** 2 / theta0
    return x, y


def _order1_closed_form_ok(theta0: float, theta1: float) -> bool:
    if abs(theta1) < ORDER1_DEGENERACY * max(1.0, abs(theta0)):
        return False
    return theta0 * theta0 / (2.0 * abs(theta1)) <= ORDER1_PHASE_LIMIT


def _order1_xy(theta0: float, theta1: float, s: np.ndarray, L: float) -> Tuple[np.ndarray, np.ndarray]:
    if theta1 < 0.0:
        # alpha -> -alpha mirrors the curve across the base tangent
        x, y = _order1_xy(-theta0, -theta1, s, L)
        return x, -y

    root = math.sqrt(math.pi * theta1)
    a = (theta0 + theta1 * s) / root
    b = theta0 / root
    c_a, s_a = fresnel(a)
    c_b, s_b = fresnel(b)
    phase = theta0 * theta0 / (2.0 * theta1)
    c, d = math.sin(phase), math.cos(phase)
    scale = L * math.sqrt(math.pi / theta1)
    x = scale * (d * (c_a - c_b) + c * (s_a - s_b))
    y = scale * (d * (s_a - s_b) - c * (c_a - c_b))
    return x, y


def _quadrature_xy(
    orientation: Callable[[np.ndarray], np.ndarray],
    s: np.ndarray,
    L: float,
    tol: float,
) -> Tuple[np.ndarray, np.ndarray]:
    def integrand(v: np.ndarray) -> np.ndarray:
        alpha = orientation(v)
        return np.stack((np.cos(alpha), np.sin(alpha)))

    xy = cumulative_integral(integrand, s, tol=tol)
    return L * xy[0], L * xy[1]


def position_order0(theta0: float, s: float, L: float) -> PlanarPoint:
    """Constant-curvature arc endpoint; exact limit used near theta0 * s = 0."""
    s_arr = np.atleast_1d(check_arc(s))
    x, y = _order0_xy(float(theta0), s_arr, _check_length(L))
    return PlanarPoint(float(x[0]), float(y[0]))


def position_order1(theta: ModalConfig, s: float, L: float, tol: float = DEFAULT_TOL) -> PlanarPoint:
    """
    Clothoid coordinates for linear curvature theta0 + theta1 s via Fresnel integrals.

    Negative theta1 is handled by reflection; the degenerate and the
    phase-cancelling parameter regions fall back to quadrature.
    """
    if theta.order != 1:
        raise InvalidArgumentError(f"position_order1 needs a first-order ModalConfig, got order {theta.order}")
    L = _check_length(L)
    s_arr = np.atleast_1d(check_arc(s))
    x, y = _planar_xy(theta, s_arr, L, tol)
    return PlanarPoint(float(x[0]), float(y[0]))


def position_quadrature(theta: ModalConfig, s: float, L: float, tol: float = DEFAULT_TOL) -> PlanarPoint:
    """Planar position by adaptive quadrature of (cos alpha, sin alpha), error <= tol * L."""
    if tol <= 0:
        raise InvalidArgumentError(f"Quadrature tolerance must be positive, got {tol}")
    L = _check_length(L)
    s_arr = np.atleast_1d(check_arc(s))
    coeffs = theta.orientation_coeffs()
    x, y = _quadrature_xy(lambda v: npoly.polyval(v, coeffs), s_arr, L, tol)
    return PlanarPoint(float(x[0]), float(y[0]))


def _planar_xy(theta: ModalConfig, s: np.ndarray, L: float, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    order = theta.effective_order
    theta0 = theta.coeffs[0]
    if order == 0:
        return _order0_xy(theta0, s, L)
    if order == 1:
        theta1 = theta.coeffs[1]
        if _order1_closed_form_ok(theta0, theta1):
            return _order1_xy(theta0, theta1, s, L)
        logger.debug("order-1 closed form skipped for theta=(%g, %g); using quadrature", theta0, theta1)
    coeffs = theta.orientation_coeffs()
    return _quadrature_xy(lambda v: npoly.polyval(v, coeffs), s, L, tol)


def planar_positions(theta: ModalConfig, s: ArrayLike, L: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """
    Bending-plane positions on a whole arc-length grid, shape (n, 2).

    Closed forms for effective order 0 and 1, one cumulative adaptive
    quadrature pass otherwise.
    """
    L = _check_length(L)
    s_arr = np.atleast_1d(check_arc(s))
    x, y = _planar_xy(theta, s_arr, L, tol)
    return np.column_stack((x, y))


def profile_positions(
    orientation: Callable[[np.ndarray], np.ndarray],
    s: ArrayLike,
    L: float,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """Planar positions for an arbitrary orientation profile alpha(s), shape (n, 2)."""
    L = _check_length(L)
    s_arr = np.atleast_1d(check_arc(s))
    x, y = _quadrature_xy(orientation, s_arr, L, tol)
    return np.column_stack((x, y))


def positions_batch(thetas: np.ndarray, s: float, L: float, nodes: int = BATCH_NODES) -> np.ndarray:
    """
    Planar positions at one location for many modal vectors at once, shape (N, 2).

    Uses a single fixed high-order Gauss rule on [0, s]; accurate for the
    moderate coefficients met in sampling studies.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    L = _check_length(L)
    s = check_arc(s)
    x_nodes, weights = gauss_legendre(nodes)
    v = 0.5 * s * (x_nodes + 1.0)
    w = 0.5 * s * weights
    m1 = thetas.shape[1]
    powers = v[None, :] ** np.arange(1, m1 + 1)[:, None]
    alpha = (thetas / np.arange(1, m1 + 1)) @ powers
    return L * np.column_stack((np.cos(alpha) @ w, np.sin(alpha) @ w))
