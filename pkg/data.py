# data.py
from dataclasses import dataclass, field
import math
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from errors import DomainError

Bounds = Tuple[float, float, float, float]  # (x_min, y_min, x_max, y_max)


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def raised_cosine_gain(n_azimuth: int, azimuth_fov: float) -> np.ndarray:
    """cos^2 antenna profile sampled at the azimuth bin centres, normalised to a peak of 1."""
    centers = np.linspace(-azimuth_fov / 2.0, azimuth_fov / 2.0, n_azimuth)
    gain = np.cos(np.pi * centers / azimuth_fov) ** 2
    peak = float(gain.max())
    if peak <= 0.0:
        raise DomainError(f"raised-cosine gain vanishes on a {n_azimuth}-bin azimuth grid")
    return gain / peak


@dataclass(frozen=True)
class Pose2:
    x: float    # meters
    y: float    # meters
    yaw: float  # radians, kept in (-pi, pi]

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.yaw)):
            raise DomainError(f"Pose2 components must be finite, got ({self.x}, {self.y}, {self.yaw})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @staticmethod
    def identity() -> "Pose2":
        return Pose2(0.0, 0.0, 0.0)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Vel2:
    vx: float  # m/s, body frame
    vy: float  # m/s, body frame

    def __post_init__(self) -> None:
        if not (math.isfinite(self.vx) and math.isfinite(self.vy)):
            raise DomainError(f"Vel2 components must be finite, got ({self.vx}, {self.vy})")
        object.__setattr__(self, "vx", float(self.vx))
        object.__setattr__(self, "vy", float(self.vy))

    @staticmethod
    def zero() -> "Vel2":
        return Vel2(0.0, 0.0)

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass(frozen=True, eq=False)
class RadarConfig:
    n_range: int = 64
    n_azimuth: int = 64
    n_doppler: int = 32
    range_res: float = 0.15                # m per range bin
    azimuth_fov: float = 2.0943951023931953  # radians, symmetric about boresight
    doppler_res: float = 0.1               # m/s per Doppler bin
    gain_table: Optional[np.ndarray] = None  # per azimuth bin, None selects the raised-cosine preset
    power_const: float = 100.0             # C of the radar equation
    noise_floor: float = 1e-3
    bin_window: int = 10                   # b nearest Doppler bins that receive kernel mass
    kernel_sigma_factor: float = 3.0       # soft-binning std in Doppler bins

    def __post_init__(self) -> None:
        for name in ("n_range", "n_azimuth", "n_doppler"):
            if int(getattr(self, name)) < 2:
                raise DomainError(f"{name} must be at least 2")
        if self.range_res <= 0 or self.doppler_res <= 0:
            raise DomainError("range_res and doppler_res must be positive")
        if not 0.0 < self.azimuth_fov <= math.pi:
            raise DomainError(f"azimuth_fov must lie in (0, pi], got {self.azimuth_fov}")
        if self.power_const < 0 or self.noise_floor < 0:
            raise DomainError("power_const and noise_floor must be nonnegative")
        if self.bin_window < 1:
            raise DomainError("bin_window must be at least 1")
        if self.kernel_sigma_factor <= 0:
            raise DomainError("kernel_sigma_factor must be positive")

        if self.gain_table is None:
            gain = raised_cosine_gain(self.n_azimuth, self.azimuth_fov)
        else:
            gain = np.asarray(self.gain_table, dtype=np.float64).reshape(-1)
            if gain.shape[0] != self.n_azimuth:
                raise DomainError(f"gain_table has {gain.shape[0]} entries, expected {self.n_azimuth}")
            if np.any(~np.isfinite(gain)) or np.any(gain < 0):
                raise DomainError("gain_table entries must be finite and nonnegative")
            if abs(float(gain.max()) - 1.0) > 1e-12:
                raise DomainError("gain_table must be normalised to a maximum of 1")
        gain.setflags(write=False)
        object.__setattr__(self, "gain_table", gain)

    @property
    def gain(self) -> np.ndarray:
        assert self.gain_table is not None
        return self.gain_table

    @property
    def max_range(self) -> float:
        return self.n_range * self.range_res

    @property
    def kernel_sigma(self) -> float:
        return self.kernel_sigma_factor * self.doppler_res


@dataclass(frozen=True, eq=False)
class PolarGrid:
    range_centers: np.ndarray    # R_n, meters
    azimuth_centers: np.ndarray  # theta_a, radians
    doppler_centers: np.ndarray  # v_d, m/s

    @property
    def azimuth_step(self) -> float:
        return float(self.azimuth_centers[1] - self.azimuth_centers[0])


@dataclass(frozen=True)
class Gaussian2D:
    mean: Tuple[float, float]    # world frame, meters
    orient: float                # radians
    scales: Tuple[float, float]  # meters, both > 0
    power_ratio: float           # RCS-like sigma >= 0

    def __post_init__(self) -> None:
        if self.scales[0] <= 0 or self.scales[1] <= 0:
            raise DomainError(f"Gaussian scales must be positive, got {self.scales}")
        if self.power_ratio < 0:
            raise DomainError(f"Gaussian power_ratio must be nonnegative, got {self.power_ratio}")


@dataclass(frozen=True, eq=False)
class GaussianScene:
    means: np.ndarray   # (N, 2)
    orient: np.ndarray  # (N,)
    scales: np.ndarray  # (N, 2)
    power: np.ndarray   # (N,)
    bounds: Bounds = (-200.0, -200.0, 200.0, 200.0)
    max_gaussians: int = 5000

    def __post_init__(self) -> None:
        means = np.asarray(self.means, dtype=np.float64).reshape(-1, 2)
        n = means.shape[0]
        orient = np.asarray(self.orient, dtype=np.float64).reshape(n)
        scales = np.asarray(self.scales, dtype=np.float64).reshape(n, 2)
        power = np.asarray(self.power, dtype=np.float64).reshape(n)
        for name, arr in (("means", means), ("orient", orient), ("scales", scales), ("power", power)):
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"scene {name} contain non-finite values")
        if np.any(scales <= 0):
            raise DomainError("scene scales must be positive")
        if np.any(power < 0):
            raise DomainError("scene power ratios must be nonnegative")
        if n > self.max_gaussians:
            raise DomainError(f"scene holds {n} Gaussians, budget is {self.max_gaussians}")
        x_min, y_min, x_max, y_max = self.bounds
        if not (x_min < x_max and y_min < y_max):
            raise DomainError(f"invalid scene bounds {self.bounds}")
        for name, arr in (("means", means), ("orient", orient), ("scales", scales), ("power", power)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))

    @staticmethod
    def empty(bounds: Bounds = (-200.0, -200.0, 200.0, 200.0), max_gaussians: int = 5000) -> "GaussianScene":
        return GaussianScene(np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)), np.zeros(0), bounds, max_gaussians)

    @staticmethod
    def from_gaussians(gaussians: Sequence[Gaussian2D], bounds: Bounds = (-200.0, -200.0, 200.0, 200.0), max_gaussians: int = 5000) -> "GaussianScene":
        if not gaussians:
            return GaussianScene.empty(bounds, max_gaussians)
        return GaussianScene(
            means=np.array([g.mean for g in gaussians], dtype=np.float64),
            orient=np.array([g.orient for g in gaussians], dtype=np.float64),
            scales=np.array([g.scales for g in gaussians], dtype=np.float64),
            power=np.array([g.power_ratio for g in gaussians], dtype=np.float64),
            bounds=bounds,
            max_gaussians=max_gaussians,
        )

    def __len__(self) -> int:
        return int(self.means.shape[0])

    def __getitem__(self, i: int) -> Gaussian2D:
        return Gaussian2D(
            mean=(float(self.means[i, 0]), float(self.means[i, 1])),
            orient=float(self.orient[i]),
            scales=(float(self.scales[i, 0]), float(self.scales[i, 1])),
            power_ratio=float(self.power[i]),
        )

    def __iter__(self) -> Iterator[Gaussian2D]:
        for i in range(len(self)):
            yield self[i]

    def inside_bounds(self) -> np.ndarray:
        x_min, y_min, x_max, y_max = self.bounds
        return (
            (self.means[:, 0] >= x_min) & (self.means[:, 0] <= x_max)
            & (self.means[:, 1] >= y_min) & (self.means[:, 1] <= y_max)
        )

    def subset(self, keep: np.ndarray) -> "GaussianScene":
        return GaussianScene(self.means[keep], self.orient[keep], self.scales[keep], self.power[keep], self.bounds, self.max_gaussians)

    def concat(self, other: "GaussianScene") -> "GaussianScene":
        return GaussianScene(
            np.concatenate([self.means, other.means]),
            np.concatenate([self.orient, other.orient]),
            np.concatenate([self.scales, other.scales]),
            np.concatenate([self.power, other.power]),
            self.bounds,
            self.max_gaussians,
        )

    def replace(self, **arrays: np.ndarray) -> "GaussianScene":
        fields: Dict[str, np.ndarray] = {"means": self.means, "orient": self.orient, "scales": self.scales, "power": self.power}
        fields.update(arrays)
        return GaussianScene(bounds=self.bounds, max_gaussians=self.max_gaussians, **fields)


def _checked_image(data: np.ndarray, name: str, nonnegative: bool) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DomainError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    if nonnegative and np.any(arr < 0):
        raise DomainError(f"{name} contains negative power")
    return arr


@dataclass(frozen=True, eq=False)
class RAImage:
    data: np.ndarray  # (N_r, N_a) power

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _checked_image(self.data, "RAImage", nonnegative=True))


@dataclass(frozen=True, eq=False)
class DopplerMap:
    data: np.ndarray  # (N_r, N_a) m/s

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _checked_image(self.data, "DopplerMap", nonnegative=False))


@dataclass(frozen=True, eq=False)
class RDImage:
    data: np.ndarray  # (N_r, N_d) power

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _checked_image(self.data, "RDImage", nonnegative=True))


@dataclass
class GradientBundle:
    d_pose: Optional[np.ndarray] = None    # (K, 3): d/dx, d/dy, d/dyaw per keyframe
    d_mean: Optional[np.ndarray] = None    # (N, 2)
    d_orient: Optional[np.ndarray] = None  # (N,)
    d_scales: Optional[np.ndarray] = None  # (N, 2)
    d_power: Optional[np.ndarray] = None   # (N,)


@dataclass(frozen=True)
class LossWeights:
    lambda_ssim: float = 0.2
    lambda_scale: float = 0.1
    ssim_window: int = 11
    rd_weight: float = 1.0
    scale_reg: float = 1.0  # s_reg, meters

    def __post_init__(self) -> None:
        if not 0.0 <= self.lambda_ssim <= 1.0:
            raise DomainError("lambda_ssim must lie in [0, 1]")
        if self.lambda_scale < 0 or self.rd_weight < 0:
            raise DomainError("lambda_scale and rd_weight must be nonnegative")
        if self.ssim_window < 1 or self.ssim_window % 2 == 0:
            raise DomainError("ssim_window must be a positive odd count")
        if self.scale_reg <= 0:
            raise DomainError("scale_reg must be positive")


@dataclass(frozen=True)
class LossSpec:
    stage: str                  # "pose", "map" or "ba"
    use_rd: bool = True         # RD term participates where the stage allows it
    grad_poses: bool = True
    grad_gaussians: bool = True

    def __post_init__(self) -> None:
        if self.stage not in ("pose", "map", "ba"):
            raise DomainError(f"unknown stage '{self.stage}'")


@dataclass(frozen=True)
class WindowView:
    """One keyframe observation inside an optimisation window."""
    pose: Pose2
    measured_ra: RAImage
    measured_rd: Optional[RDImage] = None
    previous: Optional[int] = None          # index of the predecessor keyframe inside the same window
    previous_pose: Optional[Pose2] = None   # fixed predecessor pose when it lies outside the window
    dt: float = 0.0                         # seconds since the predecessor keyframe
    fixed: bool = False                     # gauge-fixed pose


@dataclass(frozen=True)
class DopplerPoint:
    pos: Tuple[float, float]  # sensor frame, meters
    doppler: float            # m/s

    def __post_init__(self) -> None:
        if math.hypot(self.pos[0], self.pos[1]) <= 0.0:
            raise DomainError("DopplerPoint position must not be the sensor origin")


@dataclass(frozen=True)
class GyroSample:
    omega: float      # yaw rate, rad/s
    timestamp: float  # s

    def __post_init__(self) -> None:
        if not (math.isfinite(self.omega) and math.isfinite(self.timestamp)):
            raise DomainError("GyroSample must be finite")


@dataclass(frozen=True)
class RadarFrame:
    frame_id: int
    timestamp: float
    ra: RAImage
    rd: Optional[RDImage]
    points: List[DopplerPoint]
    gyro: GyroSample


@dataclass
class Keyframe:
    id: int
    timestamp: float
    pose: Pose2                 # optimised estimate
    frame: RadarFrame
    velocity: Vel2 = field(default_factory=Vel2.zero)  # derived from (pose_k, pose_k-1, dt)


@dataclass(frozen=True)
class OptimizerConfig:
    lr_pose_xy: float = 1e-2
    lr_pose_yaw: float = 5e-3
    lr_mean: float = 1e-2
    lr_orient: float = 1e-3
    lr_scale: float = 5e-3
    lr_power: float = 5e-2
    iters_pose: int = 50
    iters_map: int = 100
    iters_ba: int = 100
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        for name in ("lr_pose_xy", "lr_pose_yaw", "lr_mean", "lr_orient", "lr_scale", "lr_power", "adam_eps"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        for name in ("iters_pose", "iters_map", "iters_ba"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative")
        if not (0.0 < self.adam_beta1 < 1.0 and 0.0 < self.adam_beta2 < 1.0):
            raise DomainError("Adam betas must lie in (0, 1)")


@dataclass(frozen=True)
class WindowSpec:
    kind: str = "radius"              # "radius" or "sliding"
    r_ba: float = 10.0                # meters
    n_sliding: Optional[int] = 10     # None keeps every keyframe

    def __post_init__(self) -> None:
        if self.kind not in ("radius", "sliding"):
            raise DomainError(f"unknown window kind '{self.kind}'")
        if self.r_ba <= 0:
            raise DomainError("r_ba must be positive")
        if self.n_sliding is not None and self.n_sliding < 1:
            raise DomainError("n_sliding must be at least 1")

    @staticmethod
    def parse(text: str) -> "WindowSpec":
        """Parse 'radius:<meters>', 'sliding:<count>' or 'sliding:inf'."""
        kind, _, value = text.strip().partition(":")
        kind = kind.strip().lower()
        value = value.strip().lower()
        try:
            if kind == "radius":
                return WindowSpec(kind="radius", r_ba=float(value) if value else 10.0)
            if kind == "sliding":
                if value in ("inf", "all"):
                    return WindowSpec(kind="sliding", n_sliding=None)
                return WindowSpec(kind="sliding", n_sliding=int(value) if value else 10)
        except ValueError as e:
            raise DomainError(f"invalid window '{text}': {e}") from e
        raise DomainError(f"invalid window '{text}', expected radius:<m> or sliding:<n>")

    def label(self) -> str:
        if self.kind == "radius":
            return f"radius:{self.r_ba:g}"
        return "sliding:inf" if self.n_sliding is None else f"sliding:{self.n_sliding}"


@dataclass(frozen=True)
class SceneParams:
    s_min: float = 0.05
    s_max: float = 2.0
    max_gaussians: int = 5000
    init_threshold_factor: float = 5.0     # tau_init = factor * noise_floor
    densify_threshold_factor: float = 3.0  # tau_d = factor * noise_floor
    prune_threshold: float = 1e-4          # tau_p
    densify_every: int = 5                 # keyframes
    bounds: Bounds = (-200.0, -200.0, 200.0, 200.0)

    def __post_init__(self) -> None:
        if not 0.0 < self.s_min <= self.s_max:
            raise DomainError("scale limits must satisfy 0 < s_min <= s_max")
        if self.max_gaussians < 1 or self.densify_every < 1:
            raise DomainError("max_gaussians and densify_every must be positive")
        if self.prune_threshold < 0:
            raise DomainError("prune_threshold must be nonnegative")


@dataclass(frozen=True)
class FrontendParams:
    cfar_guard: int = 2
    cfar_train: int = 6
    cfar_alpha: float = 8.0
    source: str = "points"  # "points" uses simulator Doppler points, "images" runs CFAR on RA/RD

    def __post_init__(self) -> None:
        if self.source not in ("points", "images"):
            raise DomainError(f"unknown frontend source '{self.source}'")
        if self.cfar_guard < 0 or self.cfar_train < 1 or self.cfar_alpha <= 1.0:
            raise DomainError("CFAR needs guard >= 0, train >= 1 and alpha > 1")


@dataclass(frozen=True)
class BackendParams:
    keyframe_translation: float = 0.5   # meters
    keyframe_rotation: float = math.radians(10.0)
    keyframe_stride: int = 5            # frames between keyframes without a frontend
    mapping_window: WindowSpec = WindowSpec(kind="sliding", n_sliding=10)
    ba_window: WindowSpec = WindowSpec(kind="radius", r_ba=10.0)
    ba_every: int = 5                   # keyframes between bundle adjustments
    use_rd_loss: bool = True
    enable_frontend: bool = True
    enable_local: bool = True           # pose refinement and mapping
    enable_ba: bool = True
    stage_timeout: float = 3600.0       # seconds per pipeline module

    def __post_init__(self) -> None:
        if self.keyframe_translation <= 0 or self.keyframe_rotation <= 0 or self.keyframe_stride < 1:
            raise DomainError("keyframe thresholds must be positive")
        if self.ba_every < 1:
            raise DomainError("ba_every must be at least 1")


@dataclass(frozen=True)
class NoiseParams:
    speckle: float = 0.2       # multiplicative, unit-mean exponential
    floor_std: float = 1e-3    # additive power std
    doppler_std: float = 0.02  # m/s
    gyro_std: float = 0.005    # rad/s
    gyro_bias: float = 0.003   # rad/s
    vel_std: float = 0.03      # m/s, shared by every Doppler point of a frame
    scene_jitter: float = 0.02 # meters

    def __post_init__(self) -> None:
        for name in ("speckle", "floor_std", "doppler_std", "gyro_std", "gyro_bias", "vel_std", "scene_jitter"):
            if getattr(self, name) < 0:
                raise DomainError(f"noise parameter {name} must be nonnegative")
        if self.speckle > 1.0:
            raise DomainError("speckle must not exceed 1")

    @staticmethod
    def noiseless() -> "NoiseParams":
        return NoiseParams(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SimParams:
    kind: str = "small-loop"
    speed: float = 1.0          # m/s
    frame_rate: float = 10.0    # Hz
    seed: int = 0
    points_per_frame: int = 24
    max_frames: int = 0         # 0 keeps the whole trajectory

    def __post_init__(self) -> None:
        if self.kind not in ("room", "small-loop", "large-loop"):
            raise DomainError(f"unknown scenario kind '{self.kind}'")
        if self.speed <= 0 or self.frame_rate <= 0:
            raise DomainError("speed and frame_rate must be positive")
        if self.points_per_frame < 2 or self.max_frames < 0:
            raise DomainError("points_per_frame must be >= 2 and max_frames >= 0")


@dataclass(frozen=True)
class TimedPose:
    timestamp: float
    pose: Pose2


@dataclass(frozen=True)
class LossRecord:
    frame_id: int
    stage: str
    iteration: int
    loss: float


@dataclass
class ApeResult:
    trans_rmse: float                                   # meters
    rot_rmse: float                                     # degrees
    per_pose_errors: List[Tuple[float, float, float]]   # (timestamp, translation m, rotation deg)
    matched: int = 0
    dropped: int = 0


@dataclass
class RadarData:
    frame: RadarFrame                               # Measurement entering the pipeline
    predicted_pose: Optional[Pose2] = None          # Frontend prediction in the estimate frame
    velocity: Optional[Vel2] = None                 # Frontend ego-velocity
    keyframe: Optional[Keyframe] = None             # Set when the frame was promoted to a keyframe
    stage_losses: Dict[str, float] = field(default_factory=dict)  # Best loss per backend stage
    error: Optional[Exception] = None               # Domain or numerical failure raised by a stage
