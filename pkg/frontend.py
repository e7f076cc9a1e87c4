# frontend.py
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from data import DopplerPoint, FrontendParams, GyroSample, Pose2, RadarConfig, RadarFrame, RAImage, RDImage, Vel2
from errors import DegenerateGeometryError, DomainError
import logger
from radar_model import grid_from_config, polar_to_sensor
from renderer import DOPPLER_SIGN
from scene import local_maxima

log = logger.get_logger()

MAX_CONDITION = 1e8


def _cfar_threshold(image: np.ndarray, guard: int, train: int) -> np.ndarray:
    """Training-ring mean around every cell; border cells average only the ring cells inside the image."""
    size = 2 * (guard + train) + 1
    kernel = np.ones((size, size))
    kernel[train:train + 2 * guard + 1, train:train + 2 * guard + 1] = 0.0
    ring_sum = ndimage.convolve(image, kernel, mode="constant", cval=0.0)
    ring_count = ndimage.convolve(np.ones_like(image), kernel, mode="constant", cval=0.0)
    return ring_sum / np.maximum(ring_count, 1.0)


def cfar_detect(ra: RAImage, guard: int, train: int, alpha: float) -> List[Tuple[int, int]]:
    """2-D cell-averaging CFAR: a cell is detected when it exceeds alpha times its training-ring mean."""
    if train < 1 or guard < 0:
        raise DomainError(f"CFAR needs train >= 1 and guard >= 0, got train={train}, guard={guard}")
    image = ra.data
    size = 2 * (guard + train) + 1
    if size > min(image.shape):
        raise DomainError(f"CFAR window of {size} bins exceeds the {image.shape} image")
    mean = _cfar_threshold(image, guard, train)
    rows, cols = np.nonzero(image > alpha * mean)
    return [(int(r), int(a)) for r, a in zip(rows, cols)]


def cfar_peaks(ra: RAImage, guard: int, train: int, alpha: float, max_points: Optional[int] = None) -> List[Tuple[int, int]]:
    """CFAR detections reduced to one bin per target: local maxima, strongest first."""
    detected = np.zeros(ra.data.shape, dtype=bool)
    for r, a in cfar_detect(ra, guard, train, alpha):
        detected[r, a] = True
    peaks = [p for p in local_maxima(ra.data, 0.0) if detected[p]]
    peaks.sort(key=lambda p: -ra.data[p])
    return peaks if max_points is None else peaks[:max_points]


def ego_velocity_lsq(points: Sequence[DopplerPoint]) -> Tuple[Vel2, float]:
    """Least-squares ego-velocity from the Doppler of static points: doppler_i = s * r_i . v."""
    if len(points) < 2:
        raise DegenerateGeometryError(f"ego-velocity needs at least 2 Doppler points, got {len(points)}")
    pos = np.array([p.pos for p in points], dtype=np.float64)
    H = pos / np.linalg.norm(pos, axis=1, keepdims=True)
    y = np.array([p.doppler for p in points], dtype=np.float64) / DOPPLER_SIGN
    if np.linalg.cond(H) > MAX_CONDITION:
        raise DegenerateGeometryError("Doppler directions are collinear; ego-velocity is unobservable")
    v, _, rank, _ = np.linalg.lstsq(H, y, rcond=None)
    if rank < 2:
        raise DegenerateGeometryError("Doppler direction matrix is rank deficient")
    residual = y - H @ v
    rms = float(np.sqrt(np.mean(residual ** 2)))
    return Vel2(float(v[0]), float(v[1])), rms


def dead_reckon(prev: Pose2, v: Vel2, gyro: GyroSample, dt: float) -> Pose2:
    """Explicit Euler step: rotate body velocity by the previous yaw, integrate the gyro rate."""
    if not dt > 0.0:
        raise DomainError(f"time step must be positive, got {dt}")
    c, s = math.cos(prev.yaw), math.sin(prev.yaw)
    return Pose2(
        prev.x + (c * v.vx - s * v.vy) * dt,
        prev.y + (s * v.vx + c * v.vy) * dt,
        prev.yaw + gyro.omega * dt,
    )


def points_from_images(ra: RAImage, rd: RDImage, cfg: RadarConfig, params: FrontendParams,
                       max_points: Optional[int] = None) -> List[DopplerPoint]:
    """Doppler points extracted from the measured images.

    CFAR peaks of the RA image give positions; the Doppler of a peak is
    the RD peak of its range row, which is only unambiguous when the row
    holds a single detection.
    """
    grid = grid_from_config(cfg)
    peaks = cfar_peaks(ra, params.cfar_guard, params.cfar_train, params.cfar_alpha, max_points)
    per_row: Dict[int, List[int]] = {}
    for r, a in peaks:
        per_row.setdefault(r, []).append(a)
    points: List[DopplerPoint] = []
    for r, azimuths in sorted(per_row.items()):
        if len(azimuths) != 1:
            continue
        d = int(np.argmax(rd.data[r]))
        pos = polar_to_sensor(grid.range_centers[r], grid.azimuth_centers[azimuths[0]])
        points.append(DopplerPoint((float(pos[0]), float(pos[1])), float(grid.doppler_centers[d])))
    return points


class FrontendTracker:
    """Doppler + gyro odometry; holds only the previous estimate.

    The first frame defines the estimate frame (identity pose, zero
    velocity). Frames whose Doppler geometry is degenerate keep the
    previous velocity.
    """

    def __init__(self, cfg: RadarConfig, params: Optional[FrontendParams] = None, max_points: Optional[int] = None) -> None:
        self.cfg = cfg
        self.params = params or FrontendParams()
        self.max_points = max_points
        self.pose: Optional[Pose2] = None
        self.velocity: Vel2 = Vel2.zero()
        self.timestamp: Optional[float] = None
        self.degenerate_frames: int = 0

    def _points(self, frame: RadarFrame) -> List[DopplerPoint]:
        if self.params.source == "images":
            if frame.rd is None:
                raise DomainError(f"frame {frame.frame_id} has no RD image for the image frontend")
            return points_from_images(frame.ra, frame.rd, self.cfg, self.params, self.max_points)
        return frame.points

    def step(self, frame: RadarFrame) -> Tuple[Pose2, Vel2]:
        if self.pose is None or self.timestamp is None:
            self.pose = Pose2.identity()
            self.velocity = Vel2.zero()
            self.timestamp = frame.timestamp
            return self.pose, self.velocity

        dt = frame.timestamp - self.timestamp
        try:
            self.velocity, rms = ego_velocity_lsq(self._points(frame))
            log.debug(f"Frame {frame.frame_id}: ego-velocity ({self.velocity.vx:.3f}, {self.velocity.vy:.3f}) m/s, residual {rms:.4f}")
        except DegenerateGeometryError as e:
            self.degenerate_frames += 1
            log.warning(f"Frame {frame.frame_id}: {e}; keeping previous velocity")
        self.pose = dead_reckon(self.pose, self.velocity, frame.gyro, dt)
        self.timestamp = frame.timestamp
        return self.pose, self.velocity
