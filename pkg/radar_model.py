# radar_model.py
import math
from typing import Sequence, Union

import numpy as np

from data import Pose2, PolarGrid, RadarConfig
from errors import DomainError


def grid_from_config(cfg: RadarConfig) -> PolarGrid:
    range_centers = (np.arange(cfg.n_range, dtype=np.float64) + 0.5) * cfg.range_res
    azimuth_centers = np.linspace(-cfg.azimuth_fov / 2.0, cfg.azimuth_fov / 2.0, cfg.n_azimuth)
    doppler_centers = (np.arange(cfg.n_doppler, dtype=np.float64) - (cfg.n_doppler - 1) / 2.0) * cfg.doppler_res
    for arr in (range_centers, azimuth_centers, doppler_centers):
        arr.setflags(write=False)
    return PolarGrid(range_centers, azimuth_centers, doppler_centers)


def received_power(sigma: float, range_m: float, cfg: RadarConfig) -> float:
    """Radar equation with the constant terms folded into cfg.power_const: C * sigma / R^4."""
    if not range_m > 0.0:
        raise DomainError(f"range must be positive, got {range_m}")
    if sigma < 0.0:
        raise DomainError(f"radar cross-section must be nonnegative, got {sigma}")
    return cfg.power_const * sigma / range_m ** 4


def pose_compose(a: Pose2, b: Pose2) -> Pose2:
    c, s = math.cos(a.yaw), math.sin(a.yaw)
    return Pose2(a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.yaw + b.yaw)


def pose_inverse(a: Pose2) -> Pose2:
    c, s = math.cos(a.yaw), math.sin(a.yaw)
    return Pose2(-(c * a.x + s * a.y), s * a.x - c * a.y, -a.yaw)


def pose_between(a: Pose2, b: Pose2) -> Pose2:
    """Relative pose taking a to b, so that pose_compose(a, pose_between(a, b)) == b."""
    return pose_compose(pose_inverse(a), b)


PointLike = Union[Sequence[float], np.ndarray]


def world_to_sensor(p_world: PointLike, pose: Pose2) -> np.ndarray:
    """Rot(-yaw) (p - t); accepts a single point or an (N, 2) array."""
    p = np.asarray(p_world, dtype=np.float64)
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    dx = p[..., 0] - pose.x
    dy = p[..., 1] - pose.y
    return np.stack([c * dx + s * dy, -s * dx + c * dy], axis=-1)


def sensor_to_world(p_sensor: PointLike, pose: Pose2) -> np.ndarray:
    p = np.asarray(p_sensor, dtype=np.float64)
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return np.stack([pose.x + c * p[..., 0] - s * p[..., 1], pose.y + s * p[..., 0] + c * p[..., 1]], axis=-1)


def polar_to_sensor(range_m: Union[float, np.ndarray], azimuth: Union[float, np.ndarray]) -> np.ndarray:
    r = np.asarray(range_m, dtype=np.float64)
    a = np.asarray(azimuth, dtype=np.float64)
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=-1)
