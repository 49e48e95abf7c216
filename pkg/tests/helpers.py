from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from core.managed_configs import RobotConfig, parse_robot_config

ROOT = Path(__file__).resolve().parent.parent
CONFIG_DIR = ROOT / "configs"

PLANAR_LENGTH = 0.48
PLANAR_PLACEMENT = (5 / 14, 10 / 14, 1.0)


def robot_config(
    locations,
    order: Optional[int] = None,
    length: float = PLANAR_LENGTH,
    **sections: Any,
) -> RobotConfig:
    """Single-segment RobotConfig built in memory."""
    locations = [float(s) for s in locations]
    data: Dict[str, Any] = {
        "name": "test",
        "segments": [
            {
                "length_m": length,
                "order": len(locations) - 1 if order is None else order,
                "sensor_locations": locations,
            }
        ],
    }
    data.update(sections)
    return parse_robot_config(data)


def chain_config(segments: List[Dict[str, Any]], **sections: Any) -> RobotConfig:
    data: Dict[str, Any] = {"name": "chain", "segments": segments}
    data.update(sections)
    return parse_robot_config(data)


def shape_rmse(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.asarray(a) - np.asarray(b)
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))
