# Config.py
from dataclasses import dataclass, field
import logging
import os
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from dotenv import dotenv_values

from data import (BackendParams, FrontendParams, LossWeights, NoiseParams, OptimizerConfig, RadarConfig,
                  SceneParams, SimParams, WindowSpec)
from errors import ConfigError, DomainError

ENV_PREFIX = "RADARBA_"

Value = Union[str, int, float, bool]


@dataclass(frozen=True)
class Settings:
    radar: RadarConfig = field(default_factory=RadarConfig)
    scene: SceneParams = field(default_factory=SceneParams)
    losses: LossWeights = field(default_factory=LossWeights)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    frontend: FrontendParams = field(default_factory=FrontendParams)
    backend: BackendParams = field(default_factory=BackendParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    sim: SimParams = field(default_factory=SimParams)


# key -> (default, validator name)
DEFAULTS: Dict[str, Tuple[Value, str]] = {
    'N_RANGE': (64, 'int'),
    'N_AZIMUTH': (64, 'int'),
    'N_DOPPLER': (32, 'int'),
    'RANGE_RES': (0.15, 'float'),
    'AZIMUTH_FOV': (2.0943951023931953, 'float'),
    'DOPPLER_RES': (0.1, 'float'),
    'GAIN_TABLE': ('raised-cosine', 'gain'),
    'POWER_CONST': (100.0, 'float'),
    'NOISE_FLOOR': (1e-3, 'float'),
    'BIN_WINDOW': (10, 'int'),
    'KERNEL_SIGMA_FACTOR': (3.0, 'float'),

    'SCALE_MIN': (0.05, 'float'),
    'SCALE_MAX': (2.0, 'float'),
    'MAX_GAUSSIANS': (5000, 'int'),
    'INIT_THRESHOLD_FACTOR': (5.0, 'float'),
    'DENSIFY_THRESHOLD_FACTOR': (3.0, 'float'),
    'PRUNE_THRESHOLD': (1e-4, 'float'),
    'DENSIFY_EVERY': (5, 'int'),
    'SCENE_BOUNDS': ('-200,-200,200,200', 'bounds'),

    'LAMBDA_SSIM': (0.2, 'float'),
    'LAMBDA_SCALE': (0.1, 'float'),
    'SSIM_WINDOW': (11, 'int'),
    'RD_WEIGHT': (1.0, 'float'),
    'SCALE_REG': (1.0, 'float'),

    'LR_POSE_XY': (1e-2, 'float'),
    'LR_POSE_YAW': (5e-3, 'float'),
    'LR_MEAN': (1e-2, 'float'),
    'LR_ORIENT': (1e-3, 'float'),
    'LR_SCALE': (5e-3, 'float'),
    'LR_POWER': (5e-2, 'float'),
    'ITERS_POSE': (50, 'int'),
    'ITERS_MAP': (100, 'int'),
    'ITERS_BA': (100, 'int'),
    'ADAM_BETA1': (0.9, 'float'),
    'ADAM_BETA2': (0.999, 'float'),
    'ADAM_EPS': (1e-8, 'float'),

    'CFAR_GUARD': (2, 'int'),
    'CFAR_TRAIN': (6, 'int'),
    'CFAR_ALPHA': (8.0, 'float'),
    'FRONTEND_SOURCE': ('points', 'source'),

    'KEYFRAME_TRANSLATION': (0.5, 'float'),
    'KEYFRAME_ROTATION': (0.17453292519943295, 'float'),
    'KEYFRAME_STRIDE': (5, 'int'),
    'MAPPING_WINDOW': ('sliding:10', 'window'),
    'BA_WINDOW': ('radius:10', 'window'),
    'BA_EVERY': (5, 'int'),
    'USE_RD_LOSS': (True, 'bool'),
    'ENABLE_FRONTEND': (True, 'bool'),
    'ENABLE_LOCAL': (True, 'bool'),
    'ENABLE_BA': (True, 'bool'),
    'STAGE_TIMEOUT': (3600.0, 'float'),

    'NOISE_SPECKLE': (0.2, 'float'),
    'NOISE_FLOOR_STD': (1e-3, 'float'),
    'NOISE_DOPPLER_STD': (0.02, 'float'),
    'NOISE_GYRO_STD': (0.005, 'float'),
    'NOISE_GYRO_BIAS': (0.003, 'float'),
    'NOISE_VEL_STD': (0.03, 'float'),
    'NOISE_SCENE_JITTER': (0.02, 'float'),

    'SIM_KIND': ('small-loop', 'kind'),
    'SIM_SPEED': (1.0, 'float'),
    'SIM_FRAME_RATE': (10.0, 'float'),
    'SIM_SEED': (0, 'int'),
    'SIM_POINTS_PER_FRAME': (24, 'int'),
    'SIM_MAX_FRAMES': (0, 'int'),
}


def load_settings(path: Optional[str] = None, overrides: Optional[Dict[str, Value]] = None) -> Dict[str, Value]:
    """Read the key-value config file, fill gaps from RADARBA_<KEY> variables and defaults, validate every key.

    Every invalid key is logged; ConfigError is raised once all keys have been checked.
    """
    file_values: Dict[str, Optional[str]] = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"Config file not found: {path}")
        file_values = dict(dotenv_values(path))
    unknown = sorted(k for k in file_values if k not in DEFAULTS)
    errors: List[str] = []
    for key in unknown:
        errors.append(f"Unknown setting: {key}")
        logging.error(f"Unknown setting: {key}")

    def fail(env_var: str, message: str) -> None:
        errors.append(f"{env_var}: {message}")
        logging.error(f"Invalid setting {env_var}: {message}")

    def validate_float(value: Value, default: Value, env_var: str) -> Value:
        try:
            return float(value)
        except (TypeError, ValueError):
            fail(env_var, f"expected a float, got '{value}'")
            return default

    def validate_int(value: Value, default: Value, env_var: str) -> Value:
        try:
            if isinstance(value, float) or (isinstance(value, str) and not value.strip().lstrip('+-').isdigit()):
                raise ValueError(value)
            return int(value)
        except (TypeError, ValueError):
            fail(env_var, f"expected an integer, got '{value}'")
            return default

    def validate_bool(value: Value, default: Value, env_var: str) -> Value:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.strip().lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.strip().lower() in ("true", "1", "yes")
        fail(env_var, f"expected 'true' or 'false', got '{value}'")
        return default

    def validate_choice(choices: List[str]) -> Callable[[Value, Value, str], Value]:
        def validate(value: Value, default: Value, env_var: str) -> Value:
            text = str(value).strip().lower()
            if text not in choices:
                fail(env_var, f"must be one of {choices}, got '{value}'")
                return default
            return text
        return validate

    def validate_gain(value: Value, default: Value, env_var: str) -> Value:
        text = str(value).strip()
        if text.lower() == "raised-cosine":
            return "raised-cosine"
        try:
            [float(v) for v in text.split(",")]
        except ValueError:
            fail(env_var, "expected 'raised-cosine' or a comma-separated list of gains")
            return default
        return text

    def validate_window(value: Value, default: Value, env_var: str) -> Value:
        try:
            return WindowSpec.parse(str(value)).label()
        except DomainError as e:
            fail(env_var, str(e))
            return default

    def validate_bounds(value: Value, default: Value, env_var: str) -> Value:
        parts = str(value).split(",")
        try:
            numbers = [float(p) for p in parts]
        except ValueError:
            numbers = []
        if len(numbers) != 4 or not (numbers[0] < numbers[2] and numbers[1] < numbers[3]):
            fail(env_var, "expected x_min,y_min,x_max,y_max with min < max")
            return default
        return ",".join(repr(n) for n in numbers)

    validators: Dict[str, Callable[[Value, Value, str], Value]] = {
        'float': validate_float,
        'int': validate_int,
        'bool': validate_bool,
        'gain': validate_gain,
        'window': validate_window,
        'bounds': validate_bounds,
        'source': validate_choice(['points', 'images']),
        'kind': validate_choice(['room', 'small-loop', 'large-loop']),
    }

    def get_variable(env_var: str, default: Value, validate_func: Callable[[Value, Value, str], Value]) -> Value:
        value: Optional[Value] = None
        if overrides is not None and env_var in overrides:
            value = overrides[env_var]
        elif file_values.get(env_var) is not None:
            value = file_values[env_var]
        elif os.getenv(ENV_PREFIX + env_var) is not None:
            value = os.getenv(ENV_PREFIX + env_var)
        if value is None:
            return default
        return validate_func(value, default, env_var)

    if overrides is not None:
        for key in overrides:
            if key not in DEFAULTS:
                errors.append(f"Unknown setting: {key}")
                logging.error(f"Unknown setting: {key}")

    settings: Dict[str, Value] = {
        key: get_variable(key, default, validators[kind]) for key, (default, kind) in DEFAULTS.items()
    }

    if errors:
        logging.error("Invalid config. Please fix the errors and try again.")
        raise ConfigError("; ".join(errors))

    return settings


def _gain(value: Value) -> Optional[np.ndarray]:
    text = str(value)
    if text == "raised-cosine":
        return None
    return np.array([float(v) for v in text.split(",")])


def build_settings(flat: Dict[str, Value]) -> Settings:
    """Turn the validated flat dictionary into the typed bundle; invariant violations become ConfigError."""
    def f(key: str) -> float:
        return float(flat[key])

    def i(key: str) -> int:
        return int(flat[key])

    def b(key: str) -> bool:
        return bool(flat[key])

    try:
        x_min, y_min, x_max, y_max = (float(v) for v in str(flat['SCENE_BOUNDS']).split(","))
        return Settings(
            radar=RadarConfig(
                n_range=i('N_RANGE'), n_azimuth=i('N_AZIMUTH'), n_doppler=i('N_DOPPLER'),
                range_res=f('RANGE_RES'), azimuth_fov=f('AZIMUTH_FOV'), doppler_res=f('DOPPLER_RES'),
                gain_table=_gain(flat['GAIN_TABLE']), power_const=f('POWER_CONST'), noise_floor=f('NOISE_FLOOR'),
                bin_window=i('BIN_WINDOW'), kernel_sigma_factor=f('KERNEL_SIGMA_FACTOR'),
            ),
            scene=SceneParams(
                s_min=f('SCALE_MIN'), s_max=f('SCALE_MAX'), max_gaussians=i('MAX_GAUSSIANS'),
                init_threshold_factor=f('INIT_THRESHOLD_FACTOR'), densify_threshold_factor=f('DENSIFY_THRESHOLD_FACTOR'),
                prune_threshold=f('PRUNE_THRESHOLD'), densify_every=i('DENSIFY_EVERY'),
                bounds=(x_min, y_min, x_max, y_max),
            ),
            losses=LossWeights(
                lambda_ssim=f('LAMBDA_SSIM'), lambda_scale=f('LAMBDA_SCALE'), ssim_window=i('SSIM_WINDOW'),
                rd_weight=f('RD_WEIGHT'), scale_reg=f('SCALE_REG'),
            ),
            optimizer=OptimizerConfig(
                lr_pose_xy=f('LR_POSE_XY'), lr_pose_yaw=f('LR_POSE_YAW'), lr_mean=f('LR_MEAN'),
                lr_orient=f('LR_ORIENT'), lr_scale=f('LR_SCALE'), lr_power=f('LR_POWER'),
                iters_pose=i('ITERS_POSE'), iters_map=i('ITERS_MAP'), iters_ba=i('ITERS_BA'),
                adam_beta1=f('ADAM_BETA1'), adam_beta2=f('ADAM_BETA2'), adam_eps=f('ADAM_EPS'),
            ),
            frontend=FrontendParams(
                cfar_guard=i('CFAR_GUARD'), cfar_train=i('CFAR_TRAIN'), cfar_alpha=f('CFAR_ALPHA'),
                source=str(flat['FRONTEND_SOURCE']),
            ),
            backend=BackendParams(
                keyframe_translation=f('KEYFRAME_TRANSLATION'), keyframe_rotation=f('KEYFRAME_ROTATION'),
                keyframe_stride=i('KEYFRAME_STRIDE'),
                mapping_window=WindowSpec.parse(str(flat['MAPPING_WINDOW'])),
                ba_window=WindowSpec.parse(str(flat['BA_WINDOW'])),
                ba_every=i('BA_EVERY'),
                use_rd_loss=b('USE_RD_LOSS'), enable_frontend=b('ENABLE_FRONTEND'),
                enable_local=b('ENABLE_LOCAL'), enable_ba=b('ENABLE_BA'), stage_timeout=f('STAGE_TIMEOUT'),
            ),
            noise=NoiseParams(
                speckle=f('NOISE_SPECKLE'), floor_std=f('NOISE_FLOOR_STD'), doppler_std=f('NOISE_DOPPLER_STD'),
                gyro_std=f('NOISE_GYRO_STD'), gyro_bias=f('NOISE_GYRO_BIAS'), vel_std=f('NOISE_VEL_STD'),
                scene_jitter=f('NOISE_SCENE_JITTER'),
            ),
            sim=SimParams(
                kind=str(flat['SIM_KIND']), speed=f('SIM_SPEED'), frame_rate=f('SIM_FRAME_RATE'),
                seed=i('SIM_SEED'), points_per_frame=i('SIM_POINTS_PER_FRAME'), max_frames=i('SIM_MAX_FRAMES'),
            ),
        )
    except DomainError as e:
        logging.error(f"Invalid config: {e}")
        raise ConfigError(str(e)) from e


def settings_from(path: Optional[str] = None, overrides: Optional[Dict[str, Value]] = None) -> Settings:
    return build_settings(load_settings(path, overrides))


def dump_settings(flat: Dict[str, Value], path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        f.write("# radar bundle-adjustment configuration\n")
        for key in DEFAULTS:
            value = flat.get(key, DEFAULTS[key][0])
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            f.write(f"{key}={value}\n")
