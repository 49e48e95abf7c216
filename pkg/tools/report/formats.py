from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np

from core.errors import FormatError
from tools.chain.kinematics import ShapeArrays
from tools.sim.sensors import ImuStream, OrientationStream

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TRACE_HEADER = ["t", "segment", "s", "px", "py", "pz", "qw", "qx", "qy", "qz"]
MODAL_HEADER = ["t", "segment", "phi", "phi_defined"]
FRAME_ERROR_HEADER = ["t", "shape_rmse_m", "tip_error_m", "bending_direction_error_deg"]


@dataclass(frozen=True, eq=False)
class TraceFrame:
    """Sampled robot shape at one timestamp."""

    t: float
    shape: ShapeArrays


@dataclass(frozen=True)
class ModalRecord:
    t: float
    segment: int
    phi: float
    phi_defined: bool
    theta: Tuple[float, ...]


# sensor streams (JSON Lines)


def _write_jsonl(path: PathLike, records: Iterable[Mapping[str, Any]]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
            count += 1
    logger.info("Wrote %d records to %s", count, path)
    return count


def _read_jsonl(path: PathLike) -> Iterable[Tuple[int, Dict[str, Any]]]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})", line=lineno) from exc
            if not isinstance(record, dict):
                raise FormatError(f"{path}:{lineno}: expected a JSON object", line=lineno)
            yield lineno, record


def _time_ordered(rows: List[Tuple[float, int, Dict[str, Any]]]) -> List[Dict[str, Any]]:
    rows.sort(key=lambda row: (row[0], row[1]))
    return [row[2] for row in rows]


def write_orientation_streams(path: PathLike, streams: Mapping[str, OrientationStream]) -> int:
    """One {t, sensor_id, q: [w, x, y, z]} record per sample, ordered by time."""
    rows = []
    for order, (sensor_id, stream) in enumerate(streams.items()):
        for t, q in zip(stream.t, stream.q):
            rows.append((float(t), order, {"t": float(t), "sensor_id": sensor_id, "q": [float(v) for v in q]}))
    return _write_jsonl(path, _time_ordered(rows))


def write_imu_streams(path: PathLike, streams: Mapping[str, ImuStream]) -> int:
    rows = []
    for order, (sensor_id, stream) in enumerate(streams.items()):
        for k in range(len(stream)):
            t = float(stream.t[k])
            record: Dict[str, Any] = {
                "t": t,
                "sensor_id": sensor_id,
                "gyro": [float(v) for v in stream.gyro[k]],
                "accel": [float(v) for v in stream.accel[k]],
            }
            if stream.mag is not None:
                record["mag"] = [float(v) for v in stream.mag[k]]
            rows.append((t, order, record))
    return _write_jsonl(path, _time_ordered(rows))


def _vector_field(record: Mapping[str, Any], key: str, size: int, where: str) -> List[float]:
    value = record.get(key)
    if not isinstance(value, list) or len(value) != size:
        raise FormatError(f"{where}: '{key}' must be a list of {size} numbers")
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: '{key}' must be numeric") from exc


def _common_fields(path: PathLike, lineno: int, record: Mapping[str, Any]) -> Tuple[float, str]:
    where = f"{path}:{lineno}"
    if "t" not in record or "sensor_id" not in record:
        raise FormatError(f"{where}: records need 't' and 'sensor_id'", line=lineno)
    try:
        return float(record["t"]), str(record["sensor_id"])
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: 't' must be numeric", line=lineno) from exc


def read_orientation_streams(path: PathLike) -> Dict[str, OrientationStream]:
    grouped: Dict[str, Tuple[List[float], List[List[float]]]] = {}
    for lineno, record in _read_jsonl(path):
        t, sensor_id = _common_fields(path, lineno, record)
        q = _vector_field(record, "q", 4, f"{path}:{lineno}")
        times, quats = grouped.setdefault(sensor_id, ([], []))
        times.append(t)
        quats.append(q)
    return {sid: _orientation_stream(path, sid, t, q) for sid, (t, q) in grouped.items()}


def _orientation_stream(path: PathLike, sensor_id: str, t: List[float], q: List[List[float]]) -> OrientationStream:
    try:
        return OrientationStream(sensor_id, np.array(t), np.array(q))
    except ValueError as exc:
        raise FormatError(f"{path}: sensor {sensor_id}: {exc}") from exc


def read_imu_streams(path: PathLike) -> Dict[str, ImuStream]:
    grouped: Dict[str, Dict[str, list]] = {}
    for lineno, record in _read_jsonl(path):
        where = f"{path}:{lineno}"
        t, sensor_id = _common_fields(path, lineno, record)
        bucket = grouped.setdefault(sensor_id, {"t": [], "gyro": [], "accel": [], "mag": []})
        bucket["t"].append(t)
        bucket["gyro"].append(_vector_field(record, "gyro", 3, where))
        bucket["accel"].append(_vector_field(record, "accel", 3, where))
        if "mag" in record:
            bucket["mag"].append(_vector_field(record, "mag", 3, where))

    streams: Dict[str, ImuStream] = {}
    for sensor_id, bucket in grouped.items():
        t = np.array(bucket["t"])
        if np.any(np.diff(t) <= 0):
            raise FormatError(f"{path}: sensor {sensor_id}: timestamps must be strictly increasing")
        mag = None
        if bucket["mag"]:
            if len(bucket["mag"]) != t.size:
                raise FormatError(f"{path}: sensor {sensor_id}: 'mag' present on only some records")
            mag = np.array(bucket["mag"])
        streams[sensor_id] = ImuStream(sensor_id, t, np.array(bucket["gyro"]), np.array(bucket["accel"]), mag)
    return streams


def detect_stream_kind(path: PathLike) -> str:
    """'orientation' or 'imu', judged from the first record."""
    for lineno, record in _read_jsonl(path):
        if "q" in record:
            return "orientation"
        if "gyro" in record:
            return "imu"
        raise FormatError(f"{path}:{lineno}: record has neither 'q' nor 'gyro'", line=lineno)
    raise FormatError(f"{path}: no sensor records")


# shape traces (CSV)


def write_trace(path: PathLike, frames: Iterable[TraceFrame]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = 0
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for frame in frames:
            shape = frame.shape
            for k in range(shape.s.size):
                writer.writerow(
                    [repr(float(frame.t)), int(shape.segment[k]), repr(float(shape.s[k]))]
                    + [repr(float(v)) for v in shape.positions[k]]
                    + [repr(float(v)) for v in shape.quaternions[k]]
                )
                rows += 1
    logger.info("Wrote %d trace rows to %s", rows, path)
    return rows


def _check_header(path: PathLike, header: Sequence[str], expected: Sequence[str]) -> None:
    if list(header[: len(expected)]) != list(expected):
        raise FormatError(f"{path}: expected header starting with {','.join(expected)}, got {','.join(header)}")


def read_trace(path: PathLike) -> List[TraceFrame]:
    """Frames in file order; consecutive rows with one timestamp form a frame."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path}: empty trace")
        _check_header(path, header, TRACE_HEADER)
        try:
            data = [[float(v) for v in row] for row in reader if row]
        except ValueError as exc:
            raise FormatError(f"{path}: non-numeric trace value ({exc})") from exc

    if not data:
        return []
    table = np.array(data)
    if table.shape[1] != len(TRACE_HEADER):
        raise FormatError(f"{path}: expected {len(TRACE_HEADER)} columns, got {table.shape[1]}")

    frames: List[TraceFrame] = []
    breaks = np.flatnonzero(np.diff(table[:, 0]) != 0) + 1
    for block in np.split(table, breaks):
        shape = ShapeArrays(
            segment=block[:, 1].astype(int),
            s=block[:, 2].copy(),
            positions=block[:, 3:6].copy(),
            quaternions=block[:, 6:10].copy(),
        )
        frames.append(TraceFrame(t=float(block[0, 0]), shape=shape))
    return frames


def write_modal_trace(path: PathLike, records: Iterable[ModalRecord]) -> int:
    records = list(records)
    width = max((len(r.theta) for r in records), default=1)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MODAL_HEADER + [f"theta_{k}" for k in range(width)])
        for r in records:
            theta = [repr(float(v)) for v in r.theta] + [""] * (width - len(r.theta))
            writer.writerow([repr(float(r.t)), r.segment, repr(float(r.phi)), int(r.phi_defined)] + theta)
    return len(records)


def read_modal_trace(path: PathLike) -> List[ModalRecord]:
    path = Path(path)
    records: List[ModalRecord] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path}: empty modal trace")
        _check_header(path, header, MODAL_HEADER)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                theta = tuple(float(v) for v in row[4:] if v != "")
                records.append(ModalRecord(float(row[0]), int(row[1]), float(row[2]), row[3] == "1", theta))
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{lineno}: malformed modal row ({exc})", line=lineno) from exc
    return records


def write_diagnostics(path: PathLike, records: Iterable[Mapping[str, Any]]) -> int:
    return _write_jsonl(path, records)


def read_diagnostics(path: PathLike) -> List[Dict[str, Any]]:
    return [record for _, record in _read_jsonl(path)]


# reports


def write_report(path: PathLike, report: Mapping[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    logger.info("Wrote report to %s", path)


def read_report(path: PathLike) -> Dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid report JSON ({exc.msg})") from exc


def write_frame_errors(path: PathLike, rows: Iterable[Sequence[float]]) -> int:
    """Per-frame error table for external plotting; NaN marks an undefined direction error."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FRAME_ERROR_HEADER)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
            count += 1
    return count
