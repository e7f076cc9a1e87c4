# scene.py
import math
import os
from typing import List, Optional, Tuple

import numpy as np

from data import Bounds, Gaussian2D, GaussianScene, Pose2, RAImage, RadarConfig, SceneParams
from errors import DomainError, SceneFormatError
import logger
from radar_model import grid_from_config, polar_to_sensor, sensor_to_world

log = logger.get_logger()


def covariance(g: Gaussian2D) -> np.ndarray:
    """Sigma = Rot(theta) diag(S^2) Rot(theta)^T."""
    c, s = math.cos(g.orient), math.sin(g.orient)
    rot = np.array([[c, -s], [s, c]])
    cov = rot @ np.diag([g.scales[0] ** 2, g.scales[1] ** 2]) @ rot.T
    return 0.5 * (cov + cov.T)


def local_maxima(image: np.ndarray, threshold: float) -> List[Tuple[int, int]]:
    """Bins above threshold that dominate their 8-neighbourhood.

    A plateau yields a single peak: a bin must be strictly greater than the
    neighbours that precede it in (range, azimuth) order and at least equal
    to the ones that follow it.
    """
    img = np.asarray(image, dtype=np.float64)
    n_r, n_a = img.shape
    padded = np.full((n_r + 2, n_a + 2), -np.inf)
    padded[1:-1, 1:-1] = img
    peak = img > threshold
    for dr in (-1, 0, 1):
        for da in (-1, 0, 1):
            if dr == 0 and da == 0:
                continue
            neighbour = padded[1 + dr:1 + dr + n_r, 1 + da:1 + da + n_a]
            if (dr, da) < (0, 0):
                peak &= img > neighbour
            else:
                peak &= img >= neighbour
    rows, cols = np.nonzero(peak)
    return [(int(r), int(a)) for r, a in zip(rows, cols)]


def _spawn(peaks: List[Tuple[int, int]], power: np.ndarray, pose: Pose2, cfg: RadarConfig, params: SceneParams) -> GaussianScene:
    grid = grid_from_config(cfg)
    if not peaks:
        return GaussianScene.empty(params.bounds, params.max_gaussians)
    r_idx = np.array([p[0] for p in peaks])
    a_idx = np.array([p[1] for p in peaks])
    ranges = grid.range_centers[r_idx]
    azimuths = grid.azimuth_centers[a_idx]
    world = sensor_to_world(polar_to_sensor(ranges, azimuths), pose)
    scales = np.stack([
        np.full_like(ranges, cfg.range_res),
        ranges * abs(grid.azimuth_step),
    ], axis=-1).clip(params.s_min, params.s_max)
    sigma = power * ranges ** 4 / cfg.power_const if cfg.power_const > 0 else np.zeros_like(power)
    spawned = GaussianScene(
        means=world,
        orient=np.array([pose.yaw + a for a in azimuths]),
        scales=scales,
        power=sigma,
        bounds=params.bounds,
        max_gaussians=max(params.max_gaussians, len(peaks)),
    )
    return spawned.subset(spawned.inside_bounds())


def init_from_frame(frame_ra: RAImage, pose: Pose2, cfg: RadarConfig, tau_init: float, params: Optional[SceneParams] = None) -> GaussianScene:
    params = params or SceneParams()
    img = frame_ra.data
    peaks = local_maxima(img, tau_init)
    peaks.sort(key=lambda p: -img[p])
    peaks = peaks[:params.max_gaussians]
    power = np.array([img[p] for p in peaks], dtype=np.float64)
    scene = _spawn(peaks, power, pose, cfg, params)
    log.info(f"Initialised scene with {len(scene)} Gaussians from {len(peaks)} peaks")
    return GaussianScene(scene.means, scene.orient, scene.scales, scene.power, params.bounds, params.max_gaussians)


def densify(scene: GaussianScene, frame_ra: RAImage, rendered_ra: RAImage, pose: Pose2, cfg: RadarConfig, tau_d: float, params: Optional[SceneParams] = None) -> GaussianScene:
    """Spawn a Gaussian at every bin with measured - rendered > tau_d, highest residual first, up to the budget."""
    params = params or SceneParams()
    if frame_ra.data.shape != rendered_ra.data.shape:
        raise DomainError(f"densify: image shapes differ {frame_ra.data.shape} vs {rendered_ra.data.shape}")
    budget = scene.max_gaussians - len(scene)
    if budget <= 0:
        return scene
    residual = frame_ra.data - rendered_ra.data
    rows, cols = np.nonzero(residual > tau_d)
    if rows.size == 0:
        return scene
    order = np.argsort(-residual[rows, cols], kind="stable")[:budget]
    peaks = [(int(rows[k]), int(cols[k])) for k in order]
    power = np.array([residual[p] for p in peaks], dtype=np.float64)
    spawned = _spawn(peaks, power, pose, cfg, params)
    log.debug(f"Densify spawned {len(spawned)} Gaussians")
    return GaussianScene(
        np.concatenate([scene.means, spawned.means]),
        np.concatenate([scene.orient, spawned.orient]),
        np.concatenate([scene.scales, spawned.scales]),
        np.concatenate([scene.power, spawned.power]),
        scene.bounds,
        scene.max_gaussians,
    )


def prune(scene: GaussianScene, tau_p: float) -> GaussianScene:
    keep = (scene.power >= tau_p) & scene.inside_bounds()
    removed = len(scene) - int(keep.sum())
    if removed:
        log.debug(f"Pruned {removed} Gaussians")
    return scene.subset(keep)


def save_scene(scene: GaussianScene, path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        f.write(",".join([str(len(scene))] + [repr(float(b)) for b in scene.bounds]) + "\n")
        for i in range(len(scene)):
            values = (scene.means[i, 0], scene.means[i, 1], scene.orient[i], scene.scales[i, 0], scene.scales[i, 1], scene.power[i])
            f.write(",".join(repr(float(v)) for v in values) + "\n")


def _parse_floats(text: str, expected: int, line: int) -> List[float]:
    parts = text.strip().split(",")
    if len(parts) != expected:
        raise SceneFormatError(f"expected {expected} comma-separated fields, found {len(parts)}", line)
    try:
        values = [float(p) for p in parts]
    except ValueError as e:
        raise SceneFormatError(f"not a number: {e}", line) from e
    if not all(math.isfinite(v) for v in values):
        raise SceneFormatError("non-finite value", line)
    return values


def load_scene(path: str, max_gaussians: int = 5000) -> GaussianScene:
    try:
        with open(path) as f:
            lines = [ln for ln in f.read().splitlines()]
    except OSError as e:
        raise SceneFormatError(f"cannot read scene file {path}: {e}", 0) from e
    if not lines:
        raise SceneFormatError("missing header line", 1)

    header = _parse_floats(lines[0], 5, 1)
    count = int(header[0])
    if count != header[0] or count < 0:
        raise SceneFormatError(f"invalid Gaussian count {header[0]}", 1)
    bounds: Bounds = (header[1], header[2], header[3], header[4])
    if not (bounds[0] < bounds[2] and bounds[1] < bounds[3]):
        raise SceneFormatError(f"invalid bounds {bounds}", 1)

    body = [(i + 2, ln) for i, ln in enumerate(lines[1:]) if ln.strip()]
    if len(body) != count:
        raise SceneFormatError(f"header announces {count} Gaussians, file holds {len(body)}", len(lines))

    gaussians: List[Gaussian2D] = []
    for line_no, text in body:
        mx, my, orient, s1, s2, power = _parse_floats(text, 6, line_no)
        if s1 <= 0 or s2 <= 0:
            raise SceneFormatError(f"scales must be positive, got ({s1}, {s2})", line_no)
        if power < 0:
            raise SceneFormatError(f"power ratio must be nonnegative, got {power}", line_no)
        if not (bounds[0] <= mx <= bounds[2] and bounds[1] <= my <= bounds[3]):
            raise SceneFormatError(f"mean ({mx}, {my}) lies outside the scene bounds", line_no)
        gaussians.append(Gaussian2D((mx, my), orient, (s1, s2), power))
    if count > max_gaussians:
        raise SceneFormatError(f"{count} Gaussians exceed the budget of {max_gaussians}", 1)
    return GaussianScene.from_gaussians(gaussians, bounds, max_gaussians)
