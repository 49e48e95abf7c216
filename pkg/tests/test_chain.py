"""Segment frames, pose composition along a chain and shape sampling."""

import math

import numpy as np
import pytest

from core.errors import ConfigurationError, InvalidArgumentError, InvalidPlacementError
from tools.chain.kinematics import (
    Pose,
    SegmentSpec,
    SegmentState,
    bending_direction,
    chain_pose,
    sample_shape,
    segment_frames,
    segment_pose,
    shape_arrays,
)
from tools.modal.solver import SensorPlacement
from tools.orientation.quaternion import Quaternion, quat_rotate
from tools.ppc.curvature import ModalConfig

from tests.helpers import PLANAR_LENGTH, PLANAR_PLACEMENT

Z = np.array([0.0, 0.0, 1.0])


def planar_spec(length=PLANAR_LENGTH):
    return SegmentSpec(length, 2, SensorPlacement(PLANAR_PLACEMENT))


def arc_spec(length=PLANAR_LENGTH):
    return SegmentSpec(length, 0, SensorPlacement((1.0,)))


class TestSegmentSpec:
    def test_sensor_count_must_match_order(self):
        with pytest.raises(InvalidPlacementError):
            SegmentSpec(0.48, 2, SensorPlacement((0.5, 1.0)))
        with pytest.raises(InvalidPlacementError):
            SegmentSpec(0.48, 1, SensorPlacement((0.25, 0.5, 1.0)))

    def test_least_squares_allows_extra_sensors(self):
        spec = SegmentSpec(0.48, 1, SensorPlacement((0.25, 0.5, 1.0)), least_squares=True)
        assert len(spec.placement) == 3

    def test_bad_length(self):
        with pytest.raises(ConfigurationError):
            SegmentSpec(0.0, 0, SensorPlacement((1.0,)))


class TestSegmentFrames:
    def test_straight_segment(self):
        positions, quats = segment_frames(planar_spec(), SegmentState(ModalConfig.zeros(2), 1.3), [0.0, 0.5, 1.0])
        np.testing.assert_allclose(positions, [[0, 0, 0], [0, 0, 0.24], [0, 0, 0.48]], atol=1e-15)
        np.testing.assert_allclose(quats, np.tile([1.0, 0.0, 0.0, 0.0], (3, 1)), atol=1e-15)

    def test_quarter_circle_toward_y(self):
        L = PLANAR_LENGTH
        pose = segment_pose(arc_spec(), SegmentState(ModalConfig((math.pi / 2,)), math.pi / 2), 1.0)
        radius = 2.0 * L / math.pi
        np.testing.assert_allclose(pose.position, [0.0, radius, radius], atol=1e-15)
        np.testing.assert_allclose(pose.orientation.rotate(Z), [0.0, 1.0, 0.0], atol=1e-15)

    def test_tangent_follows_positions(self):
        state = SegmentState(ModalConfig((0.6, -1.5, 2.0)), 2.1)
        grid = np.linspace(0.0, 1.0, 2001)
        positions, quats = segment_frames(planar_spec(), state, grid)
        derivative = np.gradient(positions, grid, axis=0, edge_order=2) / PLANAR_LENGTH
        np.testing.assert_allclose(derivative, quat_rotate(quats, Z), atol=1e-5)

    def test_order_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            segment_frames(planar_spec(), SegmentState(ModalConfig((1.0,)), 0.0), [0.5])

    def test_arc_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            segment_pose(arc_spec(), SegmentState(ModalConfig((1.0,)), 0.0), 1.5)


class TestPose:
    def test_compose(self):
        a = Pose([1.0, 0.0, 0.0], Quaternion.from_axis_angle(Z, math.pi / 2))
        b = Pose([1.0, 0.0, 0.0], Quaternion.identity())
        c = a.compose(b)
        np.testing.assert_allclose(c.position, [1.0, 1.0, 0.0], atol=1e-15)
        assert c.orientation.angle_to(a.orientation) < 1e-7

    def test_bad_position(self):
        with pytest.raises(InvalidArgumentError):
            Pose([0.0, 1.0], Quaternion.identity())


class TestChain:
    SPECS = [planar_spec(0.16), arc_spec(0.16), planar_spec(0.16)]
    STATES = [
        SegmentState(ModalConfig((0.4, 0.9, -0.6)), 0.0),
        SegmentState(ModalConfig((-0.7,)), 1.2),
        SegmentState(ModalConfig((1.1, -0.3, 0.5)), 2.4),
    ]

    def test_junctions_are_continuous(self):
        shape = shape_arrays(self.SPECS, self.STATES, points_per_segment=20)
        assert shape.positions.shape == (60, 3)
        for end in (19, 39):
            np.testing.assert_allclose(shape.positions[end], shape.positions[end + 1], atol=1e-15)
            np.testing.assert_allclose(shape.quaternions[end], shape.quaternions[end + 1], atol=1e-15)
        np.testing.assert_array_equal(shape.segment[[0, 20, 59]], [0, 1, 2])

    def test_chain_pose_matches_sampled_tip(self):
        shape = shape_arrays(self.SPECS, self.STATES, points_per_segment=20)
        tip = chain_pose(self.SPECS, self.STATES, 2, 1.0)
        np.testing.assert_allclose(tip.position, shape.positions[-1], atol=1e-9)
        assert tip.orientation.angle_to(Quaternion.from_array(shape.quaternions[-1], normalize=True)) < 1e-7

    def test_total_arc_length(self):
        shape = shape_arrays(self.SPECS, self.STATES, points_per_segment=2000)
        steps = np.linalg.norm(np.diff(shape.positions, axis=0), axis=1)
        assert np.sum(steps) == pytest.approx(0.48, rel=1e-6)

    def test_base_pose_moves_the_whole_shape(self):
        base = Pose([0.1, -0.2, 0.3], Quaternion.from_axis_angle([1.0, 2.0, -0.5], 0.8))
        local = shape_arrays(self.SPECS, self.STATES, points_per_segment=10)
        moved = shape_arrays(self.SPECS, self.STATES, points_per_segment=10, base=base)
        expected = base.position + quat_rotate(base.orientation.as_array(), local.positions)
        np.testing.assert_allclose(moved.positions, expected, atol=1e-12)

    def test_sample_shape_returns_poses(self):
        poses = sample_shape(self.SPECS, self.STATES, points_per_segment=5)
        assert len(poses) == 15
        np.testing.assert_allclose(poses[0].position, np.zeros(3), atol=1e-15)

    def test_mismatched_lengths(self):
        with pytest.raises(InvalidArgumentError):
            shape_arrays(self.SPECS, self.STATES[:2])
        with pytest.raises(InvalidArgumentError):
            shape_arrays(self.SPECS, self.STATES, points_per_segment=1)
        with pytest.raises(InvalidArgumentError):
            chain_pose(self.SPECS, self.STATES, 3, 0.5)


class TestBendingDirection:
    def test_positive_tip(self):
        assert bending_direction(SegmentState(ModalConfig((1.0,)), 0.3)) == pytest.approx(0.3)

    def test_negative_tip_flips(self):
        assert bending_direction(SegmentState(ModalConfig((-1.0,)), 0.3)) == pytest.approx(0.3 + math.pi)
        assert bending_direction(SegmentState(ModalConfig((-1.0,)), 4.0)) == pytest.approx(4.0 - math.pi)
