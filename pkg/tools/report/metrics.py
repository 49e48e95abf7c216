from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import InvalidArgumentError, MisalignedTracesError
from tools.orientation.bend_config import ALPHA_MIN, extract_config_array
from tools.orientation.quaternion import quat_conjugate, quat_multiply, quat_rotate
from tools.report.formats import TraceFrame

logger = logging.getLogger(__name__)

DEFAULT_EVAL_POINTS = 50


@dataclass(frozen=True)
class ErrorStats:
    mean: float
    sd: float
    max: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "ErrorStats":
        arr = np.asarray(values, dtype=float)
        return cls(float(np.mean(arr)), float(np.std(arr)), float(np.max(arr)))


@dataclass
class ErrorReport:
    """
    Estimation errors of one run, laid out as mean / SD / max per metric.

    Shape and tip statistics are in meters with BRE = 100 * max / total length;
    bending direction is in degrees and absent when no frame had a clear direction.
    """

    frames: int
    total_length_m: float
    shape: ErrorStats
    tip: ErrorStats
    bending_direction: Optional[ErrorStats]
    direction_frames: int = 0
    scenario: Optional[str] = None
    label: Optional[str] = None
    frame_rows: List[Tuple[float, float, float, float]] = field(default_factory=list, repr=False)

    @property
    def shape_bre_percent(self) -> float:
        return 100.0 * self.shape.max / self.total_length_m

    @property
    def tip_bre_percent(self) -> float:
        return 100.0 * self.tip.max / self.total_length_m

    def to_dict(self) -> Dict[str, Any]:
        direction = None
        if self.bending_direction is not None:
            direction = {
                "mean_deg": self.bending_direction.mean,
                "sd_deg": self.bending_direction.sd,
                "max_deg": self.bending_direction.max,
                "frames": self.direction_frames,
            }
        return {
            "scenario": self.scenario,
            "label": self.label,
            "frames": self.frames,
            "total_length_m": self.total_length_m,
            "shape": {
                "mean_m": self.shape.mean,
                "sd_m": self.shape.sd,
                "max_m": self.shape.max,
                "bre_percent": self.shape_bre_percent,
            },
            "tip": {
                "mean_m": self.tip.mean,
                "sd_m": self.tip.sd,
                "max_m": self.tip.max,
                "bre_percent": self.tip_bre_percent,
            },
            "bending_direction": direction,
        }


def align_frames(
    estimated: Sequence[TraceFrame],
    truth: Sequence[TraceFrame],
) -> List[Tuple[TraceFrame, TraceFrame]]:
    """Pair each estimated frame with the nearest truth frame within half a truth period."""
    if not estimated or not truth:
        raise MisalignedTracesError("Both traces need at least one frame")
    t_truth = np.array([f.t for f in truth])
    order = np.argsort(t_truth)
    t_sorted = t_truth[order]
    period = float(np.median(np.diff(t_sorted))) if t_sorted.size > 1 else 0.0
    tolerance = 0.5 * period + 1e-9

    pairs = []
    for frame in estimated:
        j = int(np.searchsorted(t_sorted, frame.t))
        candidates = [c for c in (j - 1, j) if 0 <= c < t_sorted.size]
        best = min(candidates, key=lambda c: abs(t_sorted[c] - frame.t))
        if abs(t_sorted[best] - frame.t) <= tolerance:
            pairs.append((frame, truth[order[best]]))

    if not pairs:
        raise MisalignedTracesError(
            f"No estimated frame lies within {tolerance:.4g} s of a truth frame",
            estimated_start=float(estimated[0].t),
            truth_start=float(t_sorted[0]),
        )
    skipped = len(estimated) - len(pairs)
    if skipped:
        logger.warning("evaluate: %d of %d estimated frames had no truth frame", skipped, len(estimated))
    return pairs


def _segment_ids(frame: TraceFrame) -> np.ndarray:
    return np.unique(frame.shape.segment)


def _resampled(frame: TraceFrame, n_points: int) -> np.ndarray:
    grid = np.linspace(0.0, 1.0, n_points)
    out = []
    for seg in _segment_ids(frame):
        mask = frame.shape.segment == seg
        s = frame.shape.s[mask]
        p = frame.shape.positions[mask]
        order = np.argsort(s, kind="stable")
        s, p = s[order], p[order]
        out.append(np.column_stack([np.interp(grid, s, p[:, k]) for k in range(3)]))
    return np.vstack(out)


def _tip(frame: TraceFrame) -> np.ndarray:
    last = frame.shape.segment == _segment_ids(frame)[-1]
    k = np.flatnonzero(last)[np.argmax(frame.shape.s[last])]
    return frame.shape.positions[k]


def segment_directions(frame: TraceFrame, alpha_min: float = ALPHA_MIN) -> Tuple[np.ndarray, np.ndarray]:
    """Bending direction per segment from the rotation between its base and tip samples."""
    phis, defined = [], []
    for seg in _segment_ids(frame):
        idx = np.flatnonzero(frame.shape.segment == seg)
        s = frame.shape.s[idx]
        q_base = frame.shape.quaternions[idx[np.argmin(s)]]
        q_tip = frame.shape.quaternions[idx[np.argmax(s)]]
        q_rel = quat_multiply(quat_conjugate(q_base), q_tip)
        q_rel = q_rel / np.linalg.norm(q_rel)
        config = extract_config_array(q_rel, alpha_min)
        phis.append(float(config.phi))
        defined.append(bool(config.phi_defined))
    return np.array(phis), np.array(defined)


def arc_length(frame: TraceFrame) -> float:
    """
    Backbone length recovered from a sampled trace.

    Each chord between neighbouring samples is stretched to the circular arc
    that turns the tangent (local z axis) by the same angle, which is exact
    for constant curvature and leaves a fourth-order error otherwise.
    """
    total = 0.0
    for seg in _segment_ids(frame):
        mask = frame.shape.segment == seg
        order = np.argsort(frame.shape.s[mask], kind="stable")
        p = frame.shape.positions[mask][order]
        tangent = quat_rotate(frame.shape.quaternions[mask][order], np.array([0.0, 0.0, 1.0]))
        chord = np.linalg.norm(np.diff(p, axis=0), axis=1)
        turn = np.arctan2(
            np.linalg.norm(np.cross(tangent[:-1], tangent[1:]), axis=1),
            np.sum(tangent[:-1] * tangent[1:], axis=1),
        )
        # chord = arc * sin(turn / 2) / (turn / 2)
        total += float(np.sum(chord / np.sinc(turn / (2.0 * np.pi))))
    return total


def _circular_difference(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(np.angle(np.exp(1j * (a - b))))


def evaluate(
    estimated: Sequence[TraceFrame],
    truth: Sequence[TraceFrame],
    n_eval_points: int = DEFAULT_EVAL_POINTS,
    total_length: Optional[float] = None,
    window: Optional[Tuple[float, float]] = None,
    scenario: Optional[str] = None,
    label: Optional[str] = None,
    alpha_min: float = ALPHA_MIN,
) -> ErrorReport:
    """
    Shape, tip and bending-direction errors of an estimated trace against truth.

    Shape error per frame is the RMS point distance over n_eval_points evenly
    spaced locations per segment. Bending-direction error only counts frames
    (inside `window`, if given) where both traces have a clear direction.
    """
    if n_eval_points < 2:
        raise InvalidArgumentError(f"n_eval_points must be >= 2, got {n_eval_points}")
    pairs = align_frames(estimated, truth)
    if total_length is None:
        total_length = arc_length(pairs[0][1])
    if not total_length > 0:
        raise MisalignedTracesError(f"Total robot length must be positive, got {total_length}")

    shape_errors, tip_errors, direction_errors, rows = [], [], [], []
    for est, tru in pairs:
        if len(_segment_ids(est)) != len(_segment_ids(tru)):
            raise MisalignedTracesError(
                f"t={est.t}: estimated trace has {len(_segment_ids(est))} segments, truth {len(_segment_ids(tru))}"
            )
        diff = _resampled(est, n_eval_points) - _resampled(tru, n_eval_points)
        shape_rmse = float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))
        tip_error = float(np.linalg.norm(_tip(est) - _tip(tru)))
        shape_errors.append(shape_rmse)
        tip_errors.append(tip_error)

        direction = math.nan
        in_window = window is None or window[0] <= tru.t <= window[1]
        if in_window:
            phi_e, ok_e = segment_directions(est, alpha_min)
            phi_t, ok_t = segment_directions(tru, alpha_min)
            both = ok_e & ok_t
            if np.any(both):
                direction = math.degrees(float(np.mean(_circular_difference(phi_e[both], phi_t[both]))))
                direction_errors.append(direction)
        rows.append((est.t, shape_rmse, tip_error, direction))

    report = ErrorReport(
        frames=len(pairs),
        total_length_m=float(total_length),
        shape=ErrorStats.of(shape_errors),
        tip=ErrorStats.of(tip_errors),
        bending_direction=ErrorStats.of(direction_errors) if direction_errors else None,
        direction_frames=len(direction_errors),
        scenario=scenario,
        label=label,
        frame_rows=rows,
    )
    logger.info(
        "evaluate: %d frames, shape mean %.4g m, BRE %.3g%%",
        report.frames,
        report.shape.mean,
        report.shape_bre_percent,
    )
    return report
