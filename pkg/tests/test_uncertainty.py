"""Linearized position covariance, confidence ellipses and the Monte Carlo check."""

import math

import numpy as np
import pytest
from scipy.stats import chi2

from core.errors import InvalidArgumentError, SingularOrientationError
from tools.modal.solver import ModalSolver, SensorPlacement
from tools.ppc.curvature import ModalConfig
from tools.ppc.position import planar_positions
from tools.uncertainty.propagation import (
    QuatNoise,
    ellipse_points,
    jacobian_modal_to_position,
    jacobian_w_to_modal,
    monte_carlo_covariance,
    position_covariance,
    sigma_w_from_angle,
    uncertainty_ellipse,
    w_from_modal,
)

from tests.helpers import PLANAR_LENGTH, PLANAR_PLACEMENT

L = PLANAR_LENGTH
TWO_SENSORS = SensorPlacement((0.5, 1.0))
Q95 = chi2.ppf(0.95, df=2)


def rotation(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def random_operating_point(rng, placement):
    """Modal state whose sensor angles all have magnitude in [10, 170] degrees."""
    n = len(placement)
    magnitudes = np.radians(rng.uniform(10.0, 170.0, n))
    alphas = magnitudes * rng.choice([-1.0, 1.0], n)
    return ModalSolver(placement).solve(alphas)


def entrywise_gap(sampled, linear):
    # off-diagonal entries are measured against the geometric mean of their variances
    scale = np.sqrt(np.outer(np.diag(linear), np.diag(linear)))
    return float(np.max(np.abs(sampled - linear) / scale))


class TestJacobians:
    def test_identity_orientation_is_singular(self):
        with pytest.raises(SingularOrientationError):
            jacobian_w_to_modal(TWO_SENSORS, [1.0, 0.8])
        with pytest.raises(InvalidArgumentError):
            jacobian_w_to_modal(TWO_SENSORS, [1.2, 0.8])
        with pytest.raises(InvalidArgumentError):
            jacobian_w_to_modal(TWO_SENSORS, [0.9, 0.8, 0.7])

    def test_w_jacobian_matches_finite_differences(self):
        placement = SensorPlacement(PLANAR_PLACEMENT)
        solver = ModalSolver(placement)
        w = np.array([0.95, 0.7, 0.4])
        signs = np.array([1.0, -1.0, 1.0])

        def modal(values):
            return np.asarray(solver.solve(signs * 2.0 * np.arccos(values)).coeffs)

        h = 1e-6
        numeric = np.column_stack([(modal(w + h * e) - modal(w - h * e)) / (2 * h) for e in np.eye(3)])
        analytic = jacobian_w_to_modal(placement, w, signs)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-6 * np.max(np.abs(numeric)))

    def test_position_jacobian_matches_finite_differences(self):
        theta = ModalConfig((0.8, -1.2, 1.5))
        analytic = jacobian_modal_to_position(theta, 0.7, L)
        assert analytic.shape == (2, 3)

        h = 1e-5
        columns = []
        for e in np.eye(3):
            plus = planar_positions(ModalConfig(tuple(np.add(theta.coeffs, h * e))), [0.7], L, tol=1e-13)[0]
            minus = planar_positions(ModalConfig(tuple(np.subtract(theta.coeffs, h * e))), [0.7], L, tol=1e-13)[0]
            columns.append((plus - minus) / (2 * h))
        np.testing.assert_allclose(analytic, np.column_stack(columns), atol=1e-7)


class TestPositionCovariance:
    def test_symmetric_positive_semidefinite(self, rng):
        theta = random_operating_point(rng, SensorPlacement(PLANAR_PLACEMENT))
        w, signs = w_from_modal(theta, SensorPlacement(PLANAR_PLACEMENT))
        noise = QuatNoise(tuple(sigma_w_from_angle(2.0 * np.arccos(w), 0.5)))
        cov = position_covariance(SensorPlacement(PLANAR_PLACEMENT), w, theta, 1.0, L, noise, signs)
        np.testing.assert_array_equal(cov, cov.T)
        assert np.all(np.linalg.eigvalsh(cov) >= -1e-18)
        assert np.trace(cov) > 0.0

    def test_covariance_scales_with_noise_variance(self):
        theta = ModalSolver(TWO_SENSORS).solve(np.radians([35.0, 120.0]))
        w, signs = w_from_modal(theta, TWO_SENSORS)
        single = position_covariance(TWO_SENSORS, w, theta, 0.9, L, QuatNoise((1e-3, 2e-3)), signs)
        doubled = position_covariance(TWO_SENSORS, w, theta, 0.9, L, QuatNoise((2e-3, 4e-3)), signs)
        np.testing.assert_allclose(doubled, 4.0 * single, rtol=1e-12, atol=0.0)

    def test_zero_noise_gives_zero_covariance(self):
        theta = ModalSolver(TWO_SENSORS).solve(np.radians([35.0, 120.0]))
        w, signs = w_from_modal(theta, TWO_SENSORS)
        cov = position_covariance(TWO_SENSORS, w, theta, 1.0, L, QuatNoise((0.0, 0.0)), signs)
        np.testing.assert_array_equal(cov, np.zeros((2, 2)))

    def test_noise_length_must_match(self):
        theta = ModalConfig((1.0, 0.5))
        w, signs = w_from_modal(theta, TWO_SENSORS)
        with pytest.raises(InvalidArgumentError):
            position_covariance(TWO_SENSORS, w, theta, 1.0, L, QuatNoise((1e-3,)), signs)

    def test_negative_noise_rejected(self):
        with pytest.raises(InvalidArgumentError):
            QuatNoise((1e-3, -1e-3))

    def test_sigma_w_from_angle(self):
        sigma = sigma_w_from_angle([0.0, math.pi], 0.5)
        assert sigma[0] == 0.0
        assert sigma[1] == pytest.approx(0.5 * math.radians(0.5))

    def test_w_from_modal_signs(self):
        w, signs = w_from_modal(ModalConfig((-1.0, 0.0)), TWO_SENSORS)
        np.testing.assert_allclose(w, np.cos([0.25, 0.5]))
        np.testing.assert_array_equal(signs, [-1.0, -1.0])


class TestEllipse:
    def test_axis_aligned(self):
        ellipse = uncertainty_ellipse(np.diag([4.0, 1.0]), 0.95)
        assert ellipse.semi_axes == pytest.approx((2.0 * math.sqrt(Q95), math.sqrt(Q95)))
        assert ellipse.angle == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("angle, expected", [(0.6, 0.6), (-2.0, math.pi - 2.0), (1.2, 1.2)])
    def test_rotated(self, angle, expected):
        r = rotation(angle)
        ellipse = uncertainty_ellipse(r @ np.diag([9.0, 0.25]) @ r.T, 0.5)
        q = chi2.ppf(0.5, df=2)
        assert ellipse.semi_axes == pytest.approx((3.0 * math.sqrt(q), 0.5 * math.sqrt(q)))
        assert ellipse.angle == pytest.approx(expected, abs=1e-12)

    def test_isotropic_radius_at_one_sigma_confidence(self):
        sigma = 2e-3
        # 1 - exp(-1/2) ~ 0.393 is the mass inside the 1-sigma circle in 2-D
        ellipse = uncertainty_ellipse(sigma ** 2 * np.eye(2), 0.393)
        assert ellipse.semi_axes == pytest.approx((sigma, sigma), rel=1e-3)

    def test_degenerate_covariance(self):
        ellipse = uncertainty_ellipse(np.zeros((2, 2)), 0.95)
        assert ellipse.semi_axes == (0.0, 0.0)

    @pytest.mark.parametrize("confidence", [0.0, 1.0, -0.2, 1.5])
    def test_confidence_range(self, confidence):
        with pytest.raises(InvalidArgumentError):
            uncertainty_ellipse(np.eye(2), confidence)

    @pytest.mark.parametrize(
        "cov",
        [np.array([[1.0, 0.5], [0.0, 1.0]]), np.diag([1.0, -1.0]), np.eye(3), np.array([[1.0, math.nan], [math.nan, 1.0]])],
    )
    def test_invalid_covariance(self, cov):
        with pytest.raises(InvalidArgumentError):
            uncertainty_ellipse(cov, 0.95)

    def test_outline_lies_on_the_contour(self):
        r = rotation(0.3)
        cov = r @ np.diag([4e-6, 1e-6]) @ r.T
        center = np.array([0.2, 0.35])
        points = ellipse_points(center, uncertainty_ellipse(cov, 0.95), n=64)
        d = points - center
        quadratic = np.einsum("ni,ij,nj->n", d, np.linalg.inv(cov), d)
        np.testing.assert_allclose(quadratic, Q95, rtol=1e-9)
        np.testing.assert_allclose(points[0], points[-1])


def linear_and_sampled(placement, theta, s, n_samples, seed, sigma_w=1e-3):
    w, signs = w_from_modal(theta, placement)
    noise = QuatNoise((sigma_w,) * len(placement))
    linear = position_covariance(placement, w, theta, s, L, noise, signs)
    sampled = monte_carlo_covariance(placement, w, s, L, noise, n_samples=n_samples, seed=seed, signs=signs)
    return linear, sampled


class TestMonteCarloAgreement:
    def test_single_point(self):
        theta = ModalSolver(TWO_SENSORS).solve(np.radians([40.0, 95.0]))
        linear, sampled = linear_and_sampled(TWO_SENSORS, theta, 1.0, 20_000, seed=3)
        assert entrywise_gap(sampled, linear) < 0.1

    def test_same_seed_same_estimate(self):
        theta = ModalSolver(TWO_SENSORS).solve(np.radians([-30.0, 60.0]))
        _, a = linear_and_sampled(TWO_SENSORS, theta, 0.8, 2_000, seed=9)
        _, b = linear_and_sampled(TWO_SENSORS, theta, 0.8, 2_000, seed=9)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.slow
    def test_operating_points(self, rng):
        for _ in range(20):
            theta = random_operating_point(rng, TWO_SENSORS)
            linear, sampled = linear_and_sampled(TWO_SENSORS, theta, 1.0, 100_000, seed=int(rng.integers(1 << 31)))
            assert entrywise_gap(sampled, linear) < 0.1, theta
