import math
from typing import Callable, Dict, List, Sequence

import numpy as np
import pytest

from Config import Settings, Value, build_settings, load_settings
from data import GaussianScene, LossWeights, Pose2, RadarConfig


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h_rel: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function, step h_rel * max(1, |x_i|)."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        h = h_rel * max(1.0, abs(float(x[i])))
        plus, minus = x.copy(), x.copy()
        plus[i] += h
        minus[i] -= h
        grad[i] = (f(plus) - f(minus)) / (2.0 * h)
    return grad


def assert_grad_close(analytic: np.ndarray, numeric: np.ndarray, rtol: float = 1e-4, atol: float = 1e-7) -> None:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    assert analytic.shape == numeric.shape
    bound = rtol * np.maximum(np.abs(numeric), np.abs(analytic)) + atol
    worst = np.max(np.abs(analytic - numeric) - bound) if analytic.size else -1.0
    assert worst <= 0.0, f"analytic {analytic} vs finite difference {numeric}"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg() -> RadarConfig:
    """Coarse grid on which wide Gaussians cover every bin inside their 3-sigma footprint."""
    return RadarConfig(
        n_range=6, n_azimuth=5, n_doppler=7,
        range_res=0.25, azimuth_fov=0.6, doppler_res=0.2,
        power_const=1.0, noise_floor=1e-3, bin_window=7,
    )


@pytest.fixture
def fd_weights() -> LossWeights:
    return LossWeights(lambda_ssim=0.0, lambda_scale=0.1, ssim_window=3, rd_weight=0.7, scale_reg=1.0)


def wide_scene(rng: np.random.Generator, n: int = 3, scale_range: Sequence[float] = (0.8, 1.2)) -> GaussianScene:
    """Gaussians about 1 m in front of the origin, broad enough that no bin of a small grid is truncated."""
    ranges = rng.uniform(0.8, 1.2, n)
    bearings = rng.uniform(-0.2, 0.2, n)
    means = np.stack([ranges * np.cos(bearings), ranges * np.sin(bearings)], axis=-1)
    return GaussianScene(
        means=means,
        orient=rng.uniform(-math.pi, math.pi, n),
        scales=rng.uniform(scale_range[0], scale_range[1], (n, 2)),
        power=rng.uniform(0.5, 2.0, n),
    )


def nearby_poses(rng: np.random.Generator, k: int) -> List[Pose2]:
    poses = [Pose2(0.0, 0.0, 0.0)]
    for i in range(1, k):
        poses.append(Pose2(-0.05 * i + rng.uniform(-0.02, 0.02), rng.uniform(-0.03, 0.03), rng.uniform(-0.05, 0.05)))
    return poses


def point_scene(points: Sequence[Sequence[float]], scales: float = 0.05, power: float = 1.0,
                bounds: Sequence[float] = (-200.0, -200.0, 200.0, 200.0)) -> GaussianScene:
    n = len(points)
    return GaussianScene(
        means=np.asarray(points, dtype=np.float64).reshape(n, 2),
        orient=np.zeros(n),
        scales=np.full((n, 2), scales),
        power=np.full(n, power),
        bounds=(bounds[0], bounds[1], bounds[2], bounds[3]),
    )


TINY_OVERRIDES = {
    "N_RANGE": "40", "N_AZIMUTH": "32", "N_DOPPLER": "16", "RANGE_RES": "0.2",
    "SSIM_WINDOW": "3", "ITERS_POSE": "3", "ITERS_MAP": "3", "ITERS_BA": "3",
    "KEYFRAME_TRANSLATION": "0.25", "KEYFRAME_STRIDE": "3", "DENSIFY_EVERY": "2",
    "MAPPING_WINDOW": "sliding:3", "BA_WINDOW": "sliding:3", "BA_EVERY": "1",
    "SIM_KIND": "small-loop", "SIM_MAX_FRAMES": "12", "SIM_SEED": "4",
}


def tiny_flat(**overrides: str) -> Dict[str, Value]:
    """Validated flat settings for a short, coarse run."""
    values: Dict[str, Value] = dict(TINY_OVERRIDES)
    values.update(overrides)
    return load_settings(None, values)


def tiny_settings(**overrides: str) -> Settings:
    return build_settings(tiny_flat(**overrides))
