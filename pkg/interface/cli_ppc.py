# interface/cli_ppc.py
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from core.errors import InvalidArgumentError, ShapeSensingError
from core.managed_configs import RobotConfig, load_robot_config
from core.settings import configure_logging
from core.shape_service import estimate_stream, orientation_streams_from_imu
from tools.chain.kinematics import bending_direction
from tools.modal.solver import SensorPlacement, compare_placements
from tools.ppc.curvature import ModalConfig
from tools.ppc.position import planar_positions
from tools.report import formats
from tools.report.metrics import evaluate
from tools.sim.sensors import synth_imu_raw, synth_sensor_stream
from tools.sim.trajectories import KINDS, TrueCurvature, gen_trajectory, truth_shape
from tools.uncertainty.propagation import (
    QuatNoise,
    ellipse_points,
    position_covariance,
    sigma_w_from_angle,
    uncertainty_ellipse,
    w_from_modal,
)

logger = logging.getLogger(__name__)

SENSORS_FILE = "sensors.jsonl"
IMU_FILE = "imu.jsonl"


def _emit(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2))


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(f"{path.stem}{suffix}")


def _truth_record(t: float, segment: int, profile: TrueCurvature, alpha_min: float) -> formats.ModalRecord:
    # same convention as the estimator: the plane is turned so the tip bends positively
    direction = bending_direction(profile)
    sign = math.copysign(1.0, math.cos(direction - profile.phi))
    return formats.ModalRecord(
        t,
        segment,
        direction,
        abs(float(profile.orientation(1.0))) >= alpha_min,
        tuple(sign * c for c in profile.theta.coeffs),
    )


def cmd_simulate(args: argparse.Namespace) -> Dict[str, Any]:
    config = load_robot_config(args.config)
    spec = config.scenario(args.scenario)
    if args.duration is not None:
        spec = replace(spec, duration_s=args.duration)
    frames = gen_trajectory(spec, [seg.phi for seg in config.segments])

    specs = config.segment_specs()
    base = config.base_pose()
    points = config.estimator.points_per_segment
    truth = [formats.TraceFrame(f.t, truth_shape(f, specs, points, base)) for f in frames]

    alpha_min = config.estimator.alpha_min
    modal = [
        _truth_record(f.t, i, profile, alpha_min) for f in frames for i, profile in enumerate(f.segments)
    ]

    sites = config.sensor_sites()
    noise_deg = config.noise.orientation_deg if args.noise_deg is None else args.noise_deg
    streams = synth_sensor_stream(frames, sites, noise_deg, seed=args.seed, base=config.base_quaternion)
    imu = synth_imu_raw(
        frames,
        sites,
        gyro_noise_deg_s=config.noise.gyro_deg_s,
        accel_noise=config.noise.accel,
        rate_hz=config.simulation.imu_rate_hz,
        seed=args.seed + 1,
        mag_noise=config.noise.mag,
        base=config.base_quaternion,
        gravity=config.filter.gravity,
    )

    out = Path(args.out)
    files = {
        "truth": out / "truth.csv",
        "truth_modal": out / "truth_modal.csv",
        "sensors": out / SENSORS_FILE,
        "imu": out / IMU_FILE,
    }
    formats.write_trace(files["truth"], truth)
    formats.write_modal_trace(files["truth_modal"], modal)
    formats.write_orientation_streams(files["sensors"], streams)
    formats.write_imu_streams(files["imu"], imu)
    return {
        "ok": True,
        "scenario": spec.kind,
        "frames": len(frames),
        "seed": args.seed,
        "files": {k: str(v) for k, v in files.items()},
    }


def _sensor_file(path: Path, raw_imu: bool) -> Path:
    if path.is_dir():
        return path / (IMU_FILE if raw_imu else SENSORS_FILE)
    return path


def cmd_estimate(args: argparse.Namespace) -> Dict[str, Any]:
    config = load_robot_config(args.config)
    source = _sensor_file(Path(args.sensors), args.raw_imu)
    if args.raw_imu:
        streams = orientation_streams_from_imu(formats.read_imu_streams(source), config)
    else:
        streams = formats.read_orientation_streams(source)

    result = estimate_stream(config, streams, interpolate=True if args.slerp else None)

    out = Path(args.out)
    modal_path = Path(args.modal_out) if args.modal_out else _sibling(out, "_modal.csv")
    diagnostics_path = Path(args.diagnostics_out) if args.diagnostics_out else _sibling(out, "_diagnostics.jsonl")
    formats.write_trace(out, result.frames)
    formats.write_modal_trace(modal_path, result.modal)
    formats.write_diagnostics(diagnostics_path, result.diagnostics)
    return {
        "ok": True,
        "frames": len(result.frames),
        "diagnostics": len(result.diagnostics),
        "files": {"trace": str(out), "modal": str(modal_path), "diagnostics": str(diagnostics_path)},
    }


def cmd_evaluate(args: argparse.Namespace) -> Dict[str, Any]:
    estimated = formats.read_trace(args.estimated)
    truth = formats.read_trace(args.truth)
    total_length = load_robot_config(args.config).total_length if args.config else None
    report = evaluate(
        estimated,
        truth,
        n_eval_points=args.points,
        total_length=total_length,
        window=tuple(args.window) if args.window else None,
        scenario=args.scenario,
        label=args.label,
    )
    out = Path(args.out)
    frames_path = Path(args.frames_out) if args.frames_out else _sibling(out, "_frames.csv")
    payload = report.to_dict()
    formats.write_report(out, payload)
    formats.write_frame_errors(frames_path, report.frame_rows)
    return {"ok": True, "report": payload, "files": {"report": str(out), "frames": str(frames_path)}}


def _theta_from_args(args: argparse.Namespace, config: RobotConfig) -> tuple:
    if args.theta:
        return ModalConfig(tuple(args.theta)), None
    if not args.state:
        raise InvalidArgumentError("ellipse needs --state <modal trace> or --theta values")
    records = [r for r in formats.read_modal_trace(args.state) if r.segment == args.segment]
    if not records:
        raise InvalidArgumentError(f"No records for segment {args.segment} in {args.state}")
    record = records[0] if args.t is None else min(records, key=lambda r: abs(r.t - args.t))
    order = config.segments[args.segment].order
    return ModalConfig(record.theta).truncate(order), record.t


def cmd_ellipse(args: argparse.Namespace) -> Dict[str, Any]:
    config = load_robot_config(args.config)
    if not 0 <= args.segment < len(config.segments):
        raise InvalidArgumentError(f"Segment {args.segment} out of range for {len(config.segments)} segments")
    segment = config.segments[args.segment]
    theta, t = _theta_from_args(args, config)

    w, signs = w_from_modal(theta, segment.placement)
    alphas = theta.orientation(segment.placement.as_array())
    # orientation noise is an RMS angle; one rotation axis carries a third of its variance
    sigma_axis = config.noise.orientation_deg / math.sqrt(3.0)
    noise = QuatNoise(tuple(sigma_w_from_angle(alphas, sigma_axis)))
    cov = position_covariance(
        segment.placement, w, theta, args.s, segment.length_m, noise, signs, config.estimator.quadrature_tol
    )
    ellipse = uncertainty_ellipse(cov, args.confidence)
    center = planar_positions(theta, [args.s], segment.length_m)[0]

    payload: Dict[str, Any] = {
        "ok": True,
        "segment": args.segment,
        "t": t,
        "s": args.s,
        "theta": list(theta.coeffs),
        "confidence": args.confidence,
        "center_m": center.tolist(),
        "covariance_m2": cov.tolist(),
        "semi_axes_m": list(ellipse.semi_axes),
        "angle_rad": ellipse.angle,
    }
    if args.polygon > 0:
        payload["polygon_m"] = ellipse_points(center, ellipse, args.polygon).tolist()
    return payload


def _placement(text: str) -> SensorPlacement:
    try:
        values = [_fraction(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidArgumentError(f"Cannot parse placement {text!r}") from exc
    return SensorPlacement(tuple(values))


def _fraction(text: str) -> float:
    """Parse '0.5' or '5/14'."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def cmd_conditioning(args: argparse.Namespace) -> Dict[str, Any]:
    placements = [_placement(p) for p in args.placements]
    return {"ok": True, "placements": compare_placements(placements, args.threshold)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cli_ppc",
        description="Continuum-robot shape sensing with piecewise polynomial curvature.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate ground truth and synthetic sensor streams")
    p.add_argument("--config", required=True, help="config name (configs/<name>.yaml) or path")
    p.add_argument("--scenario", required=True, choices=KINDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--noise-deg", type=float, default=None, help="override orientation noise (deg)")
    p.add_argument("--duration", type=float, default=None, help="override duration (s)")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate shape traces from sensor streams")
    p.add_argument("--config", required=True)
    p.add_argument("--sensors", required=True, help="sensor JSON Lines file or simulate output directory")
    p.add_argument("--out", required=True, help="trace CSV")
    p.add_argument("--raw-imu", action="store_true", help="run the attitude filter on raw inertial streams")
    p.add_argument("--slerp", action="store_true", help="slerp sensors onto the reference timeline")
    p.add_argument("--modal-out", default=None)
    p.add_argument("--diagnostics-out", default=None)
    p.set_defaults(handler=cmd_estimate)

    p = sub.add_parser("evaluate", help="compare an estimated trace with the truth trace")
    p.add_argument("--estimated", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--frames-out", default=None, help="per-frame error CSV")
    p.add_argument("--config", default=None, help="take the total robot length from this config")
    p.add_argument("--points", type=int, default=50, help="evaluation points per segment")
    p.add_argument("--window", type=float, nargs=2, metavar=("T0", "T1"), default=None)
    p.add_argument("--scenario", default=None)
    p.add_argument("--label", default=None)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("ellipse", help="planar position uncertainty ellipse at one location")
    p.add_argument("--config", required=True)
    p.add_argument("--state", default=None, help="modal trace CSV")
    p.add_argument("--t", type=float, default=None, help="time of the state (nearest record)")
    p.add_argument("--theta", type=float, nargs="+", default=None, help="modal coefficients instead of --state")
    p.add_argument("--segment", type=int, default=0)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--polygon", type=int, default=0, help="include this many outline points")
    p.set_defaults(handler=cmd_ellipse)

    p = sub.add_parser("conditioning", help="compare sensor arrangements")
    p.add_argument("--placements", nargs="+", required=True, help="comma-separated locations, e.g. 5/14,10/14,1")
    p.add_argument("--threshold", type=float, default=1e8)
    p.set_defaults(handler=cmd_conditioning)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        payload = args.handler(args)
    except ShapeSensingError as exc:
        logger.exception("%s failed:", args.command)
        print(json.dumps(exc.to_record()), file=sys.stderr)
        return 1
    except OSError as exc:
        logger.exception("%s failed:", args.command)
        print(json.dumps({"ok": False, "error": "io_error", "detail": str(exc)}), file=sys.stderr)
        return 1
    _emit(payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
