# core/shape_service.py
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.errors import ConfigurationError, NoOverlapError
from core.managed_configs import RobotConfig
from tools.chain.kinematics import SegmentState, ShapeArrays, shape_arrays
from tools.modal.solver import ModalSolver
from tools.orientation.attitude_filter import filter_stream
from tools.orientation.bend_config import bend_quaternion_array, extract_config_array, signed_bend_angles
from tools.orientation.quaternion import (
    check_normalized,
    quat_canonical,
    quat_conjugate,
    quat_multiply,
    quat_normalize,
    quat_slerp,
)
from tools.report.formats import ModalRecord, TraceFrame
from tools.sim.sensors import ImuStream, OrientationStream

logger = logging.getLogger(__name__)

# stream quaternions are renormalized when within this of unit norm
STREAM_NORM_TOL = 1e-6
# pairwise bending-direction disagreement reported above this
PHI_SPREAD_WARN_DEG = 5.0


@dataclass(frozen=True, eq=False)
class AlignedSamples:
    t: np.ndarray
    quaternions: Dict[str, np.ndarray]
    skipped: np.ndarray


@dataclass(frozen=True, eq=False)
class FrameEstimate:
    t: float
    states: Tuple[SegmentState, ...]
    phi_defined: Tuple[bool, ...]
    shape: ShapeArrays
    diagnostics: List[Dict[str, Any]] = field(default_factory=list)


@dataclass
class EstimationResult:
    frames: List[TraceFrame]
    modal: List[ModalRecord]
    diagnostics: List[Dict[str, Any]]


def _stream_quaternions(stream: OrientationStream) -> np.ndarray:
    return quat_canonical(quat_normalize(check_normalized(stream.q, tol=STREAM_NORM_TOL)))


def align_streams(
    streams: Mapping[str, OrientationStream],
    sensor_ids: Sequence[str],
    interpolate: bool = False,
) -> AlignedSamples:
    """
    Put every configured sensor on one timeline.

    The first sensor's timestamps inside the common time window are the
    reference. Other sensors contribute their nearest sample, and a reference
    time is skipped when some sensor has nothing within half its own sample
    period. With `interpolate` the bracketing samples are slerped instead.
    """
    missing = [sid for sid in sensor_ids if sid not in streams]
    if missing:
        raise ConfigurationError(f"Configured sensors missing from the streams: {missing}")
    empty = [sid for sid in sensor_ids if len(streams[sid]) == 0]
    if empty:
        raise NoOverlapError(f"Sensors without samples: {empty}")

    start = max(streams[sid].t[0] for sid in sensor_ids)
    end = min(streams[sid].t[-1] for sid in sensor_ids)
    if start > end:
        raise NoOverlapError(f"Sensor streams share no time window (latest start {start}, earliest end {end})")

    ref_t = streams[sensor_ids[0]].t
    t = ref_t[(ref_t >= start) & (ref_t <= end)]
    keep = np.ones(t.size, dtype=bool)
    quats: Dict[str, np.ndarray] = {}

    for sid in sensor_ids:
        stream = streams[sid]
        q = _stream_quaternions(stream)
        if stream.t.size == 1:
            quats[sid] = np.repeat(q, t.size, axis=0)
            keep &= np.isclose(t, stream.t[0])
            continue
        right = np.clip(np.searchsorted(stream.t, t), 1, stream.t.size - 1)
        left = right - 1
        if interpolate:
            span = stream.t[right] - stream.t[left]
            u = np.clip((t - stream.t[left]) / span, 0.0, 1.0)
            quats[sid] = quat_canonical(quat_slerp(q[left], q[right], u))
            continue
        nearest = np.where(np.abs(stream.t[right] - t) < np.abs(t - stream.t[left]), right, left)
        half_period = 0.5 * float(np.median(np.diff(stream.t)))
        keep &= np.abs(stream.t[nearest] - t) <= half_period + 1e-9
        quats[sid] = q[nearest]

    skipped = t[~keep]
    if skipped.size:
        logger.warning("Time alignment skipped %d of %d frames", skipped.size, t.size)
    return AlignedSamples(t=t[keep], quaternions={k: v[keep] for k, v in quats.items()}, skipped=skipped)


def _doubled_angle_mean(phi: np.ndarray, weights: np.ndarray) -> float:
    # bending to either side of one plane gives phi or phi + pi; both count the same
    resultant = np.sum(weights * np.exp(2j * phi))
    return float(np.angle(resultant)) / 2.0


def _max_pairwise_spread(phi: np.ndarray) -> float:
    if phi.size < 2:
        return 0.0
    diff = np.angle(np.exp(2j * (phi[:, None] - phi[None, :]))) / 2.0
    return float(np.max(np.abs(diff)))


class ShapeEstimator:
    """
    Per-timestamp shape estimation for one robot configuration.

    Every frame is solved independently from its own samples; the only
    carried state is the last valid bending direction per segment.
    """

    def __init__(self, config: RobotConfig) -> None:
        self.config = config
        self.specs = config.segment_specs()
        settings = config.estimator
        self.solvers = [
            ModalSolver(
                spec.placement,
                order=spec.order,
                conditioning_threshold=settings.conditioning_threshold,
                least_squares=settings.least_squares,
            )
            for spec in self.specs
        ]
        self.sensor_ids = [list(seg.sensor_ids) for seg in config.segments]
        self.extrinsic_inv = [
            quat_conjugate(np.array([q.as_array() for q in seg.extrinsics])) for seg in config.segments
        ]
        self.base = config.base_pose()
        self._last_phi: List[Optional[float]] = [None] * len(self.specs)
        self.counts: Counter = Counter()

    def reset(self) -> None:
        self._last_phi = [None] * len(self.specs)
        self.counts.clear()

    def _direction(
        self, index: int, t: float, local: np.ndarray, diagnostics: List[Dict[str, Any]]
    ) -> Tuple[float, bool]:
        """
        Shared bending direction of one segment from its local sensor quaternions.

        Directions are averaged on the doubled angle with weights sin^2(alpha/2).
        Under isotropic angular noise sigma a sensor's phi scatters by about
        sigma / (2 sin(alpha/2)), so these are its inverse-variance weights; the
        orientation noise is one level for all sensors and cancels. Nearly
        straight sensors thus barely move the mean.
        """
        settings = self.config.estimator
        config = extract_config_array(local, settings.alpha_min)

        for j in np.flatnonzero(config.twist > settings.twist_tol):
            diagnostics.append(
                {
                    "t": t,
                    "segment": index,
                    "kind": "twist",
                    "sensor_id": self.sensor_ids[index][j],
                    "twist_residual": float(config.twist[j]),
                }
            )
            self.counts["twist"] += 1

        defined = config.phi_defined
        if not np.any(defined):
            held = self._last_phi[index]
            kind = "phi_held" if held is not None else "phi_undefined"
            diagnostics.append({"t": t, "segment": index, "kind": kind})
            self.counts[kind] += 1
            return (held if held is not None else 0.0), False

        phi = config.phi[defined]
        weights = np.sin(0.5 * config.alpha[defined]) ** 2
        phi_bar = _doubled_angle_mean(phi, weights)

        # orient the plane so the most distal clear sensor is bent positively
        distal = np.flatnonzero(defined)[-1]
        if signed_bend_angles(local[distal], phi_bar) < 0.0:
            phi_bar += math.pi
        phi_bar %= 2.0 * math.pi

        spread = math.degrees(_max_pairwise_spread(phi))
        if spread > PHI_SPREAD_WARN_DEG:
            diagnostics.append({"t": t, "segment": index, "kind": "phi_spread", "spread_deg": spread})
            self.counts["phi_spread"] += 1

        self._last_phi[index] = phi_bar
        return phi_bar, True

    def estimate_frame(self, t: float, quaternions: Mapping[str, np.ndarray]) -> FrameEstimate:
        """Shape at one timestamp from world-frame sensor quaternions keyed by sensor id."""
        settings = self.config.estimator
        diagnostics: List[Dict[str, Any]] = []
        states: List[SegmentState] = []
        defined_flags: List[bool] = []
        q_segment_base = self.base.orientation.as_array()

        for index, spec in enumerate(self.specs):
            measured = np.array([quaternions[sid] for sid in self.sensor_ids[index]])
            local = quat_multiply(
                quat_multiply(quat_conjugate(q_segment_base), measured), self.extrinsic_inv[index]
            )
            local = quat_canonical(quat_normalize(local))

            phi, phi_defined = self._direction(index, t, local, diagnostics)
            alphas = signed_bend_angles(local, phi)

            solver = self.solvers[index]
            theta = solver.solve(alphas, best_effort=True)
            if solver.is_ill_conditioned:
                diagnostics.append(
                    {
                        "t": t,
                        "segment": index,
                        "kind": "ill_conditioned",
                        "condition_number": solver.condition_number,
                    }
                )
                self.counts["ill_conditioned"] += 1

            state = SegmentState(theta=theta, phi=phi, t=t)
            states.append(state)
            defined_flags.append(phi_defined)

            tip_q = bend_quaternion_array(state.orientation(1.0), phi)
            q_segment_base = quat_normalize(quat_multiply(q_segment_base, tip_q))

        shape = shape_arrays(
            self.specs, states, settings.points_per_segment, base=self.base, tol=settings.quadrature_tol
        )
        return FrameEstimate(t, tuple(states), tuple(defined_flags), shape, diagnostics)

    def run(self, aligned: AlignedSamples) -> Iterator[FrameEstimate]:
        for k, t in enumerate(aligned.t):
            yield self.estimate_frame(float(t), {sid: q[k] for sid, q in aligned.quaternions.items()})


def orientation_streams_from_imu(
    imu_streams: Mapping[str, ImuStream],
    config: RobotConfig,
) -> Dict[str, OrientationStream]:
    """Attitude-filter front end: raw inertial streams to orientation streams."""
    out: Dict[str, OrientationStream] = {}
    for sensor_id, stream in imu_streams.items():
        states = filter_stream(stream.samples(), config.filter)
        out[sensor_id] = OrientationStream(
            sensor_id,
            np.array([s.t for s in states]),
            np.array([s.q for s in states]),
        )
        logger.info("Filtered %d IMU samples for %s", len(states), sensor_id)
    return out


def estimate_stream(
    config: RobotConfig,
    streams: Mapping[str, OrientationStream],
    interpolate: Optional[bool] = None,
) -> EstimationResult:
    """
    Run the full pipeline over recorded sensor streams.

    Frames come out in timestamp order. Ill-conditioned placements, twist,
    held or undefined bending directions and skipped frames are reported as
    diagnostics records rather than errors.
    """
    sensor_ids = [sid for seg in config.segments for sid in seg.sensor_ids]
    use_slerp = config.estimator.interpolate if interpolate is None else interpolate
    aligned = align_streams(streams, sensor_ids, interpolate=use_slerp)

    diagnostics: List[Dict[str, Any]] = [
        {"t": float(t), "segment": None, "kind": "skipped_frame"} for t in aligned.skipped
    ]
    estimator = ShapeEstimator(config)
    frames: List[TraceFrame] = []
    modal: List[ModalRecord] = []
    for estimate in estimator.run(aligned):
        frames.append(TraceFrame(t=estimate.t, shape=estimate.shape))
        for index, (state, defined) in enumerate(zip(estimate.states, estimate.phi_defined)):
            modal.append(ModalRecord(estimate.t, index, state.phi, defined, state.theta.coeffs))
        diagnostics.extend(estimate.diagnostics)

    diagnostics.sort(key=lambda record: record["t"])
    for kind, count in sorted(estimator.counts.items()):
        logger.warning("%d frame-segment %s diagnostics", count, kind)
    logger.info("Estimated %d frames (%d skipped)", len(frames), aligned.skipped.size)
    return EstimationResult(frames=frames, modal=modal, diagnostics=diagnostics)
