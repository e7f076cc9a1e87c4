# measurements.py
"""Measurement directory I/O: per-frame RA/RD images, Doppler points, gyro log and ground truth."""
import csv
import glob
import os
import re
from typing import Dict, List, Optional, Sequence

import numpy as np

from Config import Value, dump_settings
from data import DopplerPoint, GyroSample, RadarFrame, RAImage, RDImage
from errors import DomainError, MeasurementError
from evaluation import write_tum
import logger
from scene import save_scene
from simulate import SimScenario, synthesize_frame

log = logger.get_logger()

FRAMES_DIR = "frames"
GYRO_FILE = "gyro.csv"
GROUNDTRUTH_FILE = "groundtruth.tum"
SCENE_FILE = "gt_scene.txt"
SCENARIO_FILE = "scenario.env"
PGM_MAX = 65535


def _frame_file(directory: str, prefix: str, frame_id: int, ext: str) -> str:
    return os.path.join(directory, FRAMES_DIR, f"{prefix}_{frame_id:05d}.{ext}")


def write_pgm(image: np.ndarray, path: str) -> None:
    """16-bit binary PGM, scaled so the brightest bin maps to 65535. For viewing only."""
    peak = float(image.max()) if image.size else 0.0
    scaled = np.zeros(image.shape) if peak <= 0.0 else image / peak * PGM_MAX
    pixels = np.clip(np.round(scaled), 0, PGM_MAX).astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{image.shape[1]} {image.shape[0]}\n{PGM_MAX}\n".encode("ascii"))
        f.write(pixels.tobytes())


def _write_image(image: np.ndarray, directory: str, prefix: str, frame_id: int) -> None:
    np.savetxt(_frame_file(directory, prefix, frame_id, "csv"), image, delimiter=",", fmt="%.17g")
    write_pgm(image, _frame_file(directory, prefix, frame_id, "pgm"))


def write_frame(frame: RadarFrame, directory: str) -> None:
    _write_image(frame.ra.data, directory, "ra", frame.frame_id)
    if frame.rd is not None:
        _write_image(frame.rd.data, directory, "rd", frame.frame_id)
    with open(_frame_file(directory, "points", frame.frame_id, "csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "y", "doppler"])
        for p in frame.points:
            writer.writerow([repr(p.pos[0]), repr(p.pos[1]), repr(p.doppler)])


def write_measurements(scenario: SimScenario, directory: str, flat_config: Optional[Dict[str, Value]] = None,
                       indices: Optional[Sequence[int]] = None) -> int:
    """Synthesize and write every frame of the scenario; returns the number of frames written."""
    os.makedirs(os.path.join(directory, FRAMES_DIR), exist_ok=True)
    frame_ids = list(indices) if indices is not None else list(range(len(scenario)))
    with open(os.path.join(directory, GYRO_FILE), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "timestamp", "omega"])
        for k in frame_ids:
            frame = synthesize_frame(scenario, k)
            write_frame(frame, directory)
            writer.writerow([frame.frame_id, repr(frame.timestamp), repr(frame.gyro.omega)])
            if k % 100 == 0:
                log.info(f"Wrote frame {k}/{len(frame_ids)}")
    write_tum(scenario.gt_trajectory, os.path.join(directory, GROUNDTRUTH_FILE))
    save_scene(scenario.gt_scene, os.path.join(directory, SCENE_FILE))
    if flat_config is not None:
        dump_settings(flat_config, os.path.join(directory, SCENARIO_FILE))
    log.info(f"Measurement directory {directory}: {len(frame_ids)} frames")
    return len(frame_ids)


def _read_image(path: str) -> np.ndarray:
    try:
        image = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except (OSError, ValueError) as e:
        raise MeasurementError(f"cannot read image {path}: {e}") from e
    return image


def _read_points(path: str) -> List[DopplerPoint]:
    if not os.path.exists(path):
        return []
    points: List[DopplerPoint] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["x", "y", "doppler"]:
            raise MeasurementError(f"{path}: expected header x,y,doppler, got {header}")
        for row_number, row in enumerate(reader, start=2):
            try:
                x, y, doppler = (float(v) for v in row)
            except ValueError as e:
                raise MeasurementError(f"{path} line {row_number}: {e}") from e
            points.append(DopplerPoint((x, y), doppler))
    return points


def _read_gyro(path: str) -> Dict[int, GyroSample]:
    if not os.path.exists(path):
        raise MeasurementError(f"missing gyro log {path}")
    samples: Dict[int, GyroSample] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        for row_number, row in enumerate(reader, start=2):
            try:
                samples[int(row["frame"])] = GyroSample(float(row["omega"]), float(row["timestamp"]))
            except (KeyError, TypeError, ValueError) as e:
                raise MeasurementError(f"{path} line {row_number}: malformed gyro row") from e
    return samples


def read_measurements(directory: str) -> List[RadarFrame]:
    """Frames of a measurement directory in frame order."""
    if not os.path.isdir(os.path.join(directory, FRAMES_DIR)):
        raise MeasurementError(f"{directory} is not a measurement directory (no {FRAMES_DIR}/)")
    gyro = _read_gyro(os.path.join(directory, GYRO_FILE))
    pattern = re.compile(r"ra_(\d+)\.csv$")
    frame_ids = sorted(int(m.group(1)) for m in
                       (pattern.search(p) for p in glob.glob(os.path.join(directory, FRAMES_DIR, "ra_*.csv"))) if m)
    if not frame_ids:
        raise MeasurementError(f"{directory} holds no RA frames")

    frames: List[RadarFrame] = []
    for frame_id in frame_ids:
        if frame_id not in gyro:
            raise MeasurementError(f"frame {frame_id} has no gyro sample")
        rd_path = _frame_file(directory, "rd", frame_id, "csv")
        try:
            ra = RAImage(_read_image(_frame_file(directory, "ra", frame_id, "csv")))
            rd = RDImage(_read_image(rd_path)) if os.path.exists(rd_path) else None
        except DomainError as e:
            raise MeasurementError(f"frame {frame_id}: {e}") from e
        frames.append(RadarFrame(
            frame_id=frame_id,
            timestamp=gyro[frame_id].timestamp,
            ra=ra,
            rd=rd,
            points=_read_points(_frame_file(directory, "points", frame_id, "csv")),
            gyro=gyro[frame_id],
        ))
    log.info(f"Read {len(frames)} frames from {directory}")
    return frames


def scenario_config(directory: str) -> Optional[str]:
    path = os.path.join(directory, SCENARIO_FILE)
    return path if os.path.exists(path) else None
