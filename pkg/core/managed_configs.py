# core/managed_configs.py
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import yaml

from core.errors import ConfigurationError, ShapeSensingError
from core.settings import config_dir
from tools.chain.kinematics import DEFAULT_POINTS_PER_SEGMENT, Pose, SegmentSpec
from tools.modal.solver import DEFAULT_CONDITIONING_THRESHOLD, SensorPlacement
from tools.orientation.attitude_filter import FilterGains
from tools.orientation.quaternion import Quaternion
from tools.sim.sensors import SensorSite
from tools.sim.trajectories import TrajectorySpec, scenario_spec


@dataclass(frozen=True)
class SegmentConfig:
    length_m: float
    order: int
    placement: SensorPlacement
    sensor_ids: Tuple[str, ...]
    extrinsics: Tuple[Quaternion, ...]
    phi: float = 0.0


@dataclass(frozen=True)
class EstimatorSettings:
    conditioning_threshold: float = DEFAULT_CONDITIONING_THRESHOLD
    alpha_min_deg: float = 0.5
    twist_tol: float = 0.02
    least_squares: bool = False
    points_per_segment: int = DEFAULT_POINTS_PER_SEGMENT
    interpolate: bool = False
    quadrature_tol: float = 1e-10

    @property
    def alpha_min(self) -> float:
        return math.radians(self.alpha_min_deg)


@dataclass(frozen=True)
class NoiseSettings:
    orientation_deg: float = 0.5
    gyro_deg_s: float = 0.5
    accel: float = 0.05
    mag: float = 0.0


@dataclass(frozen=True)
class SimulationSettings:
    rate_hz: float = 60.0
    duration_s: float = 10.0
    imu_rate_hz: Optional[float] = None


@dataclass(frozen=True)
class RobotConfig:
    name: str
    segments: Tuple[SegmentConfig, ...]
    estimator: EstimatorSettings = field(default_factory=EstimatorSettings)
    filter: FilterGains = field(default_factory=FilterGains)
    noise: NoiseSettings = field(default_factory=NoiseSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    scenarios: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    base_quaternion: Quaternion = field(default_factory=Quaternion.identity)
    source: Optional[Path] = None

    @property
    def total_length(self) -> float:
        return sum(seg.length_m for seg in self.segments)

    def segment_specs(self) -> List[SegmentSpec]:
        return [
            SegmentSpec(seg.length_m, seg.order, seg.placement, least_squares=self.estimator.least_squares)
            for seg in self.segments
        ]

    def sensor_sites(self) -> List[SensorSite]:
        return [
            SensorSite(id=sensor_id, segment=i, s=s, extrinsic=ext)
            for i, seg in enumerate(self.segments)
            for sensor_id, s, ext in zip(seg.sensor_ids, seg.placement.locations, seg.extrinsics)
        ]

    def base_pose(self) -> Pose:
        return Pose([0.0, 0.0, 0.0], self.base_quaternion)

    def scenario(self, kind: str) -> TrajectorySpec:
        return scenario_spec(
            kind,
            self.scenarios.get(kind),
            rate_hz=self.simulation.rate_hz,
            duration_s=self.simulation.duration_s,
        )


def _section(data: Mapping[str, Any], key: str, cls: type) -> Any:
    raw = data.get(key) or {}
    if not isinstance(raw, Mapping):
        raise ConfigurationError(f"'{key}' must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"Unknown keys in '{key}': {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"Invalid '{key}' section: {exc}") from exc


def _quaternion(value: Any, where: str) -> Quaternion:
    try:
        return Quaternion.from_array([float(v) for v in value], normalize=True)
    except (TypeError, ValueError, ShapeSensingError) as exc:
        raise ConfigurationError(f"{where}: expected a quaternion [w, x, y, z], got {value!r}") from exc


def _extrinsics(raw: Any, count: int, where: str) -> Tuple[Quaternion, ...]:
    if raw is None:
        return (Quaternion.identity(),) * count
    if isinstance(raw, Sequence) and raw and isinstance(raw[0], Sequence):
        if len(raw) != count:
            raise ConfigurationError(f"{where}: {len(raw)} extrinsic quaternions for {count} sensors")
        return tuple(_quaternion(q, where) for q in raw)
    return (_quaternion(raw, where),) * count


def _segment(index: int, raw: Mapping[str, Any], least_squares: bool) -> SegmentConfig:
    where = f"segments[{index}]"
    if not isinstance(raw, Mapping):
        raise ConfigurationError(f"{where} must be a mapping")
    try:
        length = float(raw["length_m"])
        order = int(raw["order"])
        locations = raw["sensor_locations"]
    except KeyError as exc:
        raise ConfigurationError(f"{where}: missing key {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{where}: {exc}") from exc

    placement = SensorPlacement(tuple(float(s) for s in locations))
    count = len(placement)
    ids = tuple(str(v) for v in raw.get("sensor_ids") or [f"seg{index}_s{j}" for j in range(count)])
    if len(ids) != count:
        raise ConfigurationError(f"{where}: {len(ids)} sensor ids for {count} locations")

    # raises the placement error before any processing starts
    SegmentSpec(length, order, placement, least_squares=least_squares)

    return SegmentConfig(
        length_m=length,
        order=order,
        placement=placement,
        sensor_ids=ids,
        extrinsics=_extrinsics(raw.get("sensor_extrinsic_quaternion"), count, where),
        phi=float(raw.get("phi", 0.0)),
    )


def parse_robot_config(data: Mapping[str, Any], source: Optional[Path] = None) -> RobotConfig:
    if not isinstance(data, Mapping):
        raise ConfigurationError("A robot configuration must be a mapping")
    raw_segments = data.get("segments")
    if not raw_segments:
        raise ConfigurationError("A robot configuration needs at least one segment")

    estimator = _section(data, "estimator", EstimatorSettings)
    segments = tuple(_segment(i, raw, estimator.least_squares) for i, raw in enumerate(raw_segments))

    all_ids = [sid for seg in segments for sid in seg.sensor_ids]
    duplicates = sorted({sid for sid in all_ids if all_ids.count(sid) > 1})
    if duplicates:
        raise ConfigurationError(f"Duplicate sensor ids: {duplicates}")

    scenarios = data.get("scenarios") or {}
    if not isinstance(scenarios, Mapping):
        raise ConfigurationError("'scenarios' must be a mapping from trajectory kind to parameters")

    config = RobotConfig(
        name=str(data.get("name") or (source.stem if source else "robot")),
        segments=segments,
        estimator=estimator,
        filter=_section(data, "filter", FilterGains),
        noise=_section(data, "noise", NoiseSettings),
        simulation=_section(data, "simulation", SimulationSettings),
        scenarios={str(k): dict(v or {}) for k, v in scenarios.items()},
        base_quaternion=_quaternion(data.get("base_quaternion", [1.0, 0.0, 0.0, 0.0]), "base_quaternion"),
        source=source,
    )
    for kind in config.scenarios:
        config.scenario(kind)
    return config


def resolve_config_path(name_or_path: Union[str, Path]) -> Path:
    """A bare name such as `planar` resolves to <config dir>/planar.yaml; paths are used as given."""
    candidate = Path(name_or_path)
    if candidate.suffix or candidate.parent != Path("."):
        path = candidate
    else:
        path = config_dir() / f"{candidate}.yaml"
    if not path.is_file():
        raise ConfigurationError(f"Configuration not found: {path}")
    return path


def load_robot_config(name_or_path: Union[str, Path]) -> RobotConfig:
    path = resolve_config_path(name_or_path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: invalid YAML ({exc})") from exc
    return parse_robot_config(data, source=path)
