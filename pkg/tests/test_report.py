"""Stream and trace files, and the error report."""

import json
import math

import numpy as np
import pytest

from core.errors import FormatError, InvalidArgumentError, MisalignedTracesError
from tools.chain.kinematics import SegmentSpec, SegmentState, ShapeArrays, shape_arrays
from tools.modal.solver import SensorPlacement
from tools.ppc.curvature import ModalConfig
from tools.report import formats
from tools.report.metrics import ErrorStats, align_frames, arc_length, evaluate, segment_directions
from tools.sim.sensors import OrientationStream, sites_for_segments, synth_imu_raw, synth_sensor_stream
from tools.sim.trajectories import TrajectorySpec, gen_trajectory

from tests.helpers import PLANAR_LENGTH, PLANAR_PLACEMENT

SPEC = SegmentSpec(PLANAR_LENGTH, 2, SensorPlacement(PLANAR_PLACEMENT))


def trace(thetas, phi=0.3, t0=0.0, dt=0.1, offset=(0.0, 0.0, 0.0), points=50):
    frames = []
    for k, theta in enumerate(thetas):
        shape = shape_arrays([SPEC], [SegmentState(ModalConfig(tuple(theta)), phi)], points)
        moved = shape._replace(positions=shape.positions + np.asarray(offset))
        frames.append(formats.TraceFrame(t0 + k * dt, moved))
    return frames


BENT = [(0.8, -0.4, 0.6), (1.0, 0.2, -0.3), (0.5, 0.9, 0.1)]


class TestStreamFiles:
    def test_orientation_streams(self, tmp_path):
        frames = gen_trajectory(TrajectorySpec("swing", duration_s=0.5))
        streams = synth_sensor_stream(frames, sites_for_segments([PLANAR_PLACEMENT]), noise_deg=0.5, seed=2)
        path = tmp_path / "sensors.jsonl"
        assert formats.write_orientation_streams(path, streams) == 90
        loaded = formats.read_orientation_streams(path)
        assert list(loaded) == list(streams)
        for sensor_id, stream in streams.items():
            np.testing.assert_array_equal(loaded[sensor_id].t, stream.t)
            np.testing.assert_array_equal(loaded[sensor_id].q, stream.q)
        assert formats.detect_stream_kind(path) == "orientation"

    def test_records_are_time_ordered(self, tmp_path):
        streams = {
            "b": OrientationStream("b", [0.0, 1.0], np.tile([1.0, 0.0, 0.0, 0.0], (2, 1))),
            "a": OrientationStream("a", [0.5], [[1.0, 0.0, 0.0, 0.0]]),
        }
        path = tmp_path / "sensors.jsonl"
        formats.write_orientation_streams(path, streams)
        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert [(r["t"], r["sensor_id"]) for r in records] == [(0.0, "b"), (0.5, "a"), (1.0, "b")]

    def test_imu_streams(self, tmp_path):
        frames = gen_trajectory(TrajectorySpec("swing", duration_s=0.5))
        sites = sites_for_segments([PLANAR_PLACEMENT])
        for with_mag in (True, False):
            streams = synth_imu_raw(frames, sites, 0.5, 0.05, seed=3, with_mag=with_mag)
            path = tmp_path / f"imu_{with_mag}.jsonl"
            formats.write_imu_streams(path, streams)
            loaded = formats.read_imu_streams(path)
            for sensor_id, stream in streams.items():
                np.testing.assert_array_equal(loaded[sensor_id].gyro, stream.gyro)
                np.testing.assert_array_equal(loaded[sensor_id].accel, stream.accel)
                if with_mag:
                    np.testing.assert_array_equal(loaded[sensor_id].mag, stream.mag)
                else:
                    assert loaded[sensor_id].mag is None
            assert formats.detect_stream_kind(path) == "imu"

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "sensors.jsonl"
        path.write_text('{"t": 0.0, "sensor_id": "a", "q": [1, 0, 0, 0]}\n\n{"t": 0.1, "sensor_id": "a", "q": [1, 0\n')
        with pytest.raises(FormatError) as info:
            formats.read_orientation_streams(path)
        assert info.value.details["line"] == 3
        assert info.value.to_record()["line"] == 3

    @pytest.mark.parametrize(
        "line",
        [
            '{"t": 0.0, "q": [1, 0, 0, 0]}',
            '{"t": 0.0, "sensor_id": "a", "q": [1, 0, 0]}',
            '{"t": "soon", "sensor_id": "a", "q": [1, 0, 0, 0]}',
            '[1, 2, 3]',
        ],
    )
    def test_malformed_records(self, tmp_path, line):
        path = tmp_path / "sensors.jsonl"
        path.write_text(line + "\n")
        with pytest.raises(FormatError):
            formats.read_orientation_streams(path)

    def test_unordered_samples(self, tmp_path):
        path = tmp_path / "sensors.jsonl"
        path.write_text(
            '{"t": 1.0, "sensor_id": "a", "q": [1, 0, 0, 0]}\n{"t": 0.5, "sensor_id": "a", "q": [1, 0, 0, 0]}\n'
        )
        with pytest.raises(FormatError):
            formats.read_orientation_streams(path)

    def test_unknown_stream_kind(self, tmp_path):
        path = tmp_path / "x.jsonl"
        path.write_text('{"t": 0.0, "sensor_id": "a"}\n')
        with pytest.raises(FormatError):
            formats.detect_stream_kind(path)
        path.write_text("")
        with pytest.raises(FormatError):
            formats.detect_stream_kind(path)


class TestTraceFiles:
    def test_trace_is_lossless(self, tmp_path):
        frames = trace(BENT)
        path = tmp_path / "trace.csv"
        assert formats.write_trace(path, frames) == 150
        loaded = formats.read_trace(path)
        assert [f.t for f in loaded] == [f.t for f in frames]
        for a, b in zip(loaded, frames):
            np.testing.assert_array_equal(a.shape.segment, b.shape.segment)
            np.testing.assert_array_equal(a.shape.s, b.shape.s)
            np.testing.assert_array_equal(a.shape.positions, b.shape.positions)
            np.testing.assert_array_equal(a.shape.quaternions, b.shape.quaternions)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("time,segment,s\n0,0,0\n")
        with pytest.raises(FormatError):
            formats.read_trace(path)

    def test_modal_trace(self, tmp_path):
        records = [
            formats.ModalRecord(0.0, 0, 1.2, True, (0.5, -0.25)),
            formats.ModalRecord(0.0, 1, 0.0, False, (0.1, 0.2, 0.3)),
        ]
        path = tmp_path / "modal.csv"
        formats.write_modal_trace(path, records)
        assert formats.read_modal_trace(path) == records

    def test_diagnostics(self, tmp_path):
        records = [{"t": 0.1, "kind": "twist", "sensor_id": "imu2", "twist_residual": 0.03}]
        path = tmp_path / "diag.jsonl"
        formats.write_diagnostics(path, records)
        assert formats.read_diagnostics(path) == records


class TestEvaluate:
    def test_identical_traces(self):
        frames = trace(BENT)
        report = evaluate(frames, frames)
        assert report.frames == 3
        assert report.shape == ErrorStats(0.0, 0.0, 0.0)
        assert report.tip.max == 0.0
        assert report.bending_direction.max == pytest.approx(0.0, abs=1e-9)
        assert report.total_length_m == pytest.approx(PLANAR_LENGTH, rel=1e-6)

    def test_constant_offset(self):
        truth = trace(BENT)
        estimated = trace(BENT, offset=(0.003, 0.0, 0.0))
        report = evaluate(estimated, truth, total_length=0.48)
        assert report.shape.mean == pytest.approx(0.003, rel=1e-9)
        assert report.shape.sd == pytest.approx(0.0, abs=1e-12)
        assert report.tip.max == pytest.approx(0.003, rel=1e-9)
        assert report.shape_bre_percent == pytest.approx(0.625, rel=1e-9)

    def test_direction_error(self):
        report = evaluate(trace(BENT, phi=0.5), trace(BENT, phi=0.3))
        assert report.bending_direction.mean == pytest.approx(math.degrees(0.2), abs=1e-6)
        assert report.direction_frames == 3

    def test_direction_wraps(self):
        report = evaluate(trace(BENT, phi=6.2), trace(BENT, phi=0.1))
        assert report.bending_direction.mean == pytest.approx(math.degrees(2 * math.pi - 6.1), abs=1e-6)

    def test_straight_frames_have_no_direction(self):
        straight = trace([(0.0, 0.0, 0.0)] * 2)
        report = evaluate(straight, straight)
        assert report.bending_direction is None
        assert report.to_dict()["bending_direction"] is None
        assert all(math.isnan(row[3]) for row in report.frame_rows)

    def test_window_limits_direction_frames(self):
        frames = trace(BENT)
        report = evaluate(frames, frames, window=(0.05, 0.15))
        assert report.direction_frames == 1
        assert report.frames == 3

    def test_report_layout(self):
        report = evaluate(trace(BENT), trace(BENT), scenario="swing", label="order-2")
        payload = report.to_dict()
        assert set(payload) == {"scenario", "label", "frames", "total_length_m", "shape", "tip", "bending_direction"}
        assert set(payload["shape"]) == {"mean_m", "sd_m", "max_m", "bre_percent"}
        assert payload["scenario"] == "swing" and payload["label"] == "order-2"
        json.dumps(payload)

    def test_misaligned(self):
        with pytest.raises(MisalignedTracesError):
            evaluate(trace(BENT, t0=100.0), trace(BENT))
        with pytest.raises(MisalignedTracesError):
            align_frames([], trace(BENT))

    def test_partial_overlap_is_paired(self):
        pairs = align_frames(trace(BENT, t0=0.2), trace(BENT))
        assert [(round(e.t, 6), round(t.t, 6)) for e, t in pairs] == [(0.2, 0.2)]

    def test_eval_points(self):
        with pytest.raises(InvalidArgumentError):
            evaluate(trace(BENT), trace(BENT), n_eval_points=1)

    def test_segment_count_mismatch(self):
        single = trace(BENT[:1])
        doubled = ShapeArrays(
            segment=np.concatenate((single[0].shape.segment, single[0].shape.segment + 1)),
            s=np.tile(single[0].shape.s, 2),
            positions=np.vstack((single[0].shape.positions,) * 2),
            quaternions=np.vstack((single[0].shape.quaternions,) * 2),
        )
        with pytest.raises(MisalignedTracesError):
            evaluate([formats.TraceFrame(0.0, doubled)], single)


def test_helpers_on_a_frame():
    frame = trace([(0.9, 0.0, 0.0)], phi=2.0, points=400)[0]
    phis, defined = segment_directions(frame)
    assert defined.tolist() == [True]
    assert phis[0] == pytest.approx(2.0, abs=1e-9)
    assert arc_length(frame) == pytest.approx(PLANAR_LENGTH, rel=1e-9)


def test_arc_length_of_varying_curvature():
    frame = trace(BENT[:1])[0]
    chords = sum(
        np.sum(np.linalg.norm(np.diff(frame.shape.positions[frame.shape.segment == seg], axis=0), axis=1))
        for seg in np.unique(frame.shape.segment)
    )
    assert chords < PLANAR_LENGTH * (1.0 - 1e-6)
    assert arc_length(frame) == pytest.approx(PLANAR_LENGTH, rel=1e-6)
