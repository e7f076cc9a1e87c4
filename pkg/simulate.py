# simulate.py
"""Synthetic ground truth: corridor scenes, smooth trajectories and noisy radar frames."""
from dataclasses import dataclass, field
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from Config import Settings
from data import (Bounds, DopplerPoint, FrontendParams, GaussianScene, GyroSample, NoiseParams, Pose2, RadarConfig,
                  RadarFrame, RAImage, TimedPose, Vel2, wrap_angle)
from errors import DomainError
from frontend import cfar_peaks
import logger
from radar_model import grid_from_config, polar_to_sensor
from renderer import DOPPLER_SIGN, ego_velocity_from_poses, render_doppler_map, render_ra, render_rd

log = logger.get_logger()

WALL_OFFSET = 1.5   # corridor half-width, meters
WALL_SPACING = 0.25
BOUNDS_MARGIN = 5.0

# (width, height, corner radius) of the corridor centreline
LOOP_SHAPES = {
    "small-loop": (30.0, 15.0, 2.0),
    "large-loop": (45.0, 25.0, 2.0),
}
ROOM_SIZE = (12.0, 10.0)
ROOM_LEG = 8.0
ROOM_TURN_RADIUS = 1.0
ROOM_LEGS = 4

Segment = Tuple[float, float]  # (length, curvature)


@dataclass(frozen=True)
class Path:
    """Planar path built from straight and circular pieces, parametrised by arc length."""
    start: Pose2
    segments: Tuple[Segment, ...]

    @property
    def length(self) -> float:
        return sum(length for length, _ in self.segments)

    def pose_at(self, s: float) -> Pose2:
        x, y, heading = self.start.x, self.start.y, self.start.yaw
        remaining = min(max(s, 0.0), self.length)
        for length, curvature in self.segments:
            step = min(remaining, length)
            if curvature == 0.0:
                x += step * math.cos(heading)
                y += step * math.sin(heading)
            else:
                end = heading + curvature * step
                x += (math.sin(end) - math.sin(heading)) / curvature
                y -= (math.cos(end) - math.cos(heading)) / curvature
                heading = end
            remaining -= step
            if remaining <= 0.0:
                break
        return Pose2(x, y, heading)


def rounded_rectangle(width: float, height: float, radius: float) -> Path:
    """Counter-clockwise loop starting mid bottom edge, heading +x."""
    quarter = (0.5 * math.pi * radius, 1.0 / radius)
    horizontal, vertical = width - 2.0 * radius, height - 2.0 * radius
    segments = (
        (horizontal / 2.0, 0.0), quarter,
        (vertical, 0.0), quarter,
        (horizontal, 0.0), quarter,
        (vertical, 0.0), quarter,
        (horizontal / 2.0, 0.0),
    )
    return Path(Pose2(0.0, -height / 2.0, 0.0), segments)


def room_scan() -> Path:
    turn = math.pi * ROOM_TURN_RADIUS
    segments: List[Segment] = []
    for leg in range(ROOM_LEGS):
        segments.append((ROOM_LEG, 0.0))
        if leg < ROOM_LEGS - 1:
            side = 1.0 if leg % 2 == 0 else -1.0
            segments.append((turn, side / ROOM_TURN_RADIUS))
    first_y = -ROOM_TURN_RADIUS * (ROOM_LEGS - 1)
    return Path(Pose2(-ROOM_LEG / 2.0, first_y, 0.0), tuple(segments))


def centerline(kind: str) -> Path:
    if kind in LOOP_SHAPES:
        return rounded_rectangle(*LOOP_SHAPES[kind])
    if kind == "room":
        return room_scan()
    raise DomainError(f"unknown scenario kind '{kind}'")


def scene_bounds(kind: str) -> Bounds:
    if kind in LOOP_SHAPES:
        width, height, _ = LOOP_SHAPES[kind]
        half_w, half_h = width / 2.0 + WALL_OFFSET, height / 2.0 + WALL_OFFSET
    else:
        half_w, half_h = ROOM_SIZE[0] / 2.0, ROOM_SIZE[1] / 2.0
    return (-half_w - BOUNDS_MARGIN, -half_h - BOUNDS_MARGIN, half_w + BOUNDS_MARGIN, half_h + BOUNDS_MARGIN)


def _sample_wall(path: Path, rng: np.random.Generator) -> List[Tuple[float, float, float]]:
    count = max(int(round(path.length / WALL_SPACING)), 1)
    samples = []
    for i in range(count):
        pose = path.pose_at((i + rng.uniform(-0.2, 0.2)) * path.length / count)
        samples.append((pose.x, pose.y, pose.yaw))
    return samples


def make_loop_scene(kind: str, seed: int) -> GaussianScene:
    """Wall Gaussians every ~0.25 m plus brighter clutter; identical for identical seeds."""
    rng = np.random.default_rng([seed, 17])
    walls: List[Tuple[float, float, float]] = []
    clutter: List[Tuple[float, float, float]] = []
    if kind in LOOP_SHAPES:
        width, height, radius = LOOP_SHAPES[kind]
        for offset in (-WALL_OFFSET, WALL_OFFSET):
            walls += _sample_wall(rounded_rectangle(width + 2 * offset, height + 2 * offset, radius + offset), rng)
        path = centerline(kind)
        for _ in range(int(path.length / 4.0)):
            pose = path.pose_at(rng.uniform(0.0, path.length))
            side = 1.0 if rng.uniform() < 0.5 else -1.0
            offset = side * rng.uniform(0.9, 1.3)
            clutter.append((pose.x - offset * math.sin(pose.yaw), pose.y + offset * math.cos(pose.yaw), rng.uniform(-math.pi, math.pi)))
    elif kind == "room":
        half_w, half_h = ROOM_SIZE[0] / 2.0, ROOM_SIZE[1] / 2.0
        walls += _sample_wall(rounded_rectangle(ROOM_SIZE[0], ROOM_SIZE[1], 0.25), rng)
        legs_y = [-ROOM_TURN_RADIUS * (ROOM_LEGS - 1) + 2.0 * ROOM_TURN_RADIUS * i for i in range(ROOM_LEGS)]
        while len(clutter) < 12:
            x, y = rng.uniform(-half_w + 0.5, half_w - 0.5), rng.uniform(-half_h + 0.5, half_h - 0.5)
            if min(abs(y - ly) for ly in legs_y) > 0.6 and abs(x) < half_w - 0.5:
                clutter.append((x, y, rng.uniform(-math.pi, math.pi)))
    else:
        raise DomainError(f"unknown scenario kind '{kind}'")

    n_walls, n_clutter = len(walls), len(clutter)
    means = np.array([(x, y) for x, y, _ in walls + clutter], dtype=np.float64)
    orient = np.array([o for _, _, o in walls + clutter], dtype=np.float64)
    scales = np.concatenate([
        np.stack([rng.uniform(0.12, 0.3, n_walls), rng.uniform(0.05, 0.1, n_walls)], axis=-1),
        np.stack([rng.uniform(0.1, 0.25, n_clutter), rng.uniform(0.1, 0.25, n_clutter)], axis=-1),
    ]).reshape(-1, 2)
    power = np.concatenate([rng.uniform(0.5, 2.0, n_walls), rng.uniform(2.0, 4.0, n_clutter)])
    return GaussianScene(means, orient, scales, power, scene_bounds(kind), max(5000, len(means)))


def _mirrored(pose: Pose2) -> Pose2:
    return Pose2(pose.x, -pose.y, -pose.yaw)


def make_trajectory(kind: str, speed: float, frame_rate: float, seed: int) -> List[TimedPose]:
    """Constant-speed samples of the centreline; odd seeds traverse it mirrored (clockwise)."""
    if speed <= 0 or frame_rate <= 0:
        raise DomainError("speed and frame_rate must be positive")
    path = centerline(kind)
    step = speed / frame_rate
    count = int(math.floor(path.length / step + 1e-9)) + 1
    mirror = seed % 2 == 1
    trajectory: List[TimedPose] = []
    for k in range(count):
        pose = path.pose_at(k * step)
        trajectory.append(TimedPose(k / frame_rate, _mirrored(pose) if mirror else pose))
    return trajectory


def jitter_scene(scene: GaussianScene, jitter: float, seed: int) -> GaussianScene:
    if jitter <= 0.0 or len(scene) == 0:
        return scene
    rng = np.random.default_rng([seed, 29])
    return scene.replace(means=scene.means + rng.normal(0.0, jitter, scene.means.shape))


def apply_speckle(clean: np.ndarray, speckle: float, floor_std: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean multiplicative speckle plus a clipped additive floor."""
    exponential = rng.exponential(1.0, clean.shape)
    floor = np.maximum(0.0, floor_std * rng.standard_normal(clean.shape))
    return clean * (1.0 + speckle * (exponential - 1.0)) + floor


@dataclass(frozen=True)
class SimScenario:
    gt_scene: GaussianScene
    gt_trajectory: List[TimedPose]
    frame_rate: float
    noise: NoiseParams
    seed: int
    kind: str = "small-loop"
    speed: float = 1.0
    radar: RadarConfig = field(default_factory=RadarConfig)
    frontend: FrontendParams = field(default_factory=FrontendParams)
    points_per_frame: int = 24
    measured_scene: Optional[GaussianScene] = None  # gt_scene after jitter; None means unjittered

    def __len__(self) -> int:
        return len(self.gt_trajectory)

    @property
    def scene_for_measurements(self) -> GaussianScene:
        return self.measured_scene if self.measured_scene is not None else self.gt_scene


def make_scenario(settings: Settings) -> SimScenario:
    sim = settings.sim
    scene = make_loop_scene(sim.kind, sim.seed)
    trajectory = make_trajectory(sim.kind, sim.speed, sim.frame_rate, sim.seed)
    if sim.max_frames:
        trajectory = trajectory[:sim.max_frames]
    log.info(f"Scenario {sim.kind} seed {sim.seed}: {len(scene)} Gaussians, {len(trajectory)} frames")
    return SimScenario(
        gt_scene=scene,
        gt_trajectory=trajectory,
        frame_rate=sim.frame_rate,
        noise=settings.noise,
        seed=sim.seed,
        kind=sim.kind,
        speed=sim.speed,
        radar=settings.radar,
        frontend=settings.frontend,
        points_per_frame=sim.points_per_frame,
        measured_scene=jitter_scene(scene, settings.noise.scene_jitter, sim.seed),
    )


def true_velocity(scenario: SimScenario, k: int) -> Vel2:
    if k == 0:
        return Vel2(scenario.speed, 0.0)
    dt = scenario.gt_trajectory[k].timestamp - scenario.gt_trajectory[k - 1].timestamp
    return ego_velocity_from_poses(scenario.gt_trajectory[k].pose, scenario.gt_trajectory[k - 1].pose, dt)


def true_yaw_rate(scenario: SimScenario, k: int) -> float:
    traj = scenario.gt_trajectory
    if len(traj) < 2:
        return 0.0
    a, b = (k - 1, k) if k > 0 else (0, 1)
    return wrap_angle(traj[b].pose.yaw - traj[a].pose.yaw) / (traj[b].timestamp - traj[a].timestamp)


def doppler_points(clean: RAImage, v: Vel2, scenario: SimScenario, rng: np.random.Generator) -> List[DopplerPoint]:
    cfg, params, noise = scenario.radar, scenario.frontend, scenario.noise
    grid = grid_from_config(cfg)
    peaks = cfar_peaks(clean, params.cfar_guard, params.cfar_train, params.cfar_alpha, scenario.points_per_frame)
    v_err = rng.normal(0.0, noise.vel_std, 2) if noise.vel_std > 0 else np.zeros(2)
    points: List[DopplerPoint] = []
    for r, a in peaks:
        pos = polar_to_sensor(grid.range_centers[r], grid.azimuth_centers[a])
        direction = pos / np.linalg.norm(pos)
        doppler = DOPPLER_SIGN * float(direction @ (np.array([v.vx, v.vy]) + v_err))
        if noise.doppler_std > 0:
            doppler += float(rng.normal(0.0, noise.doppler_std))
        points.append(DopplerPoint((float(pos[0]), float(pos[1])), doppler))
    return points


def synthesize_frame(scenario: SimScenario, k: int) -> RadarFrame:
    if not 0 <= k < len(scenario.gt_trajectory):
        raise DomainError(f"frame index {k} outside 0..{len(scenario.gt_trajectory) - 1}")
    rng = np.random.default_rng([scenario.seed, k])
    noise = scenario.noise
    timed = scenario.gt_trajectory[k]

    clean = render_ra(scenario.scene_for_measurements, timed.pose, scenario.radar)
    if noise.speckle > 0 or noise.floor_std > 0:
        ra = RAImage(apply_speckle(clean.data, noise.speckle, noise.floor_std, rng))
    else:
        ra = clean
    v = true_velocity(scenario, k)
    rd = render_rd(ra, render_doppler_map(v, scenario.radar), scenario.radar)

    omega = true_yaw_rate(scenario, k) + noise.gyro_bias
    if noise.gyro_std > 0:
        omega += float(rng.normal(0.0, noise.gyro_std))
    return RadarFrame(
        frame_id=k,
        timestamp=timed.timestamp,
        ra=ra,
        rd=rd,
        points=doppler_points(clean, v, scenario, rng),
        gyro=GyroSample(omega, timed.timestamp),
    )


def synthesize(scenario: SimScenario, indices: Optional[Sequence[int]] = None) -> List[RadarFrame]:
    return [synthesize_frame(scenario, k) for k in (indices if indices is not None else range(len(scenario)))]
