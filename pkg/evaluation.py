# evaluation.py
"""Trajectory association, rigid SE(2) alignment and absolute pose error."""
import bisect
import csv
from dataclasses import dataclass
import math
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np

from data import ApeResult, Pose2, TimedPose, wrap_angle
from errors import DegenerateGeometryError, MeasurementError
import logger
from radar_model import pose_compose

log = logger.get_logger()

Match = Tuple[float, Pose2, Pose2]  # (timestamp, estimate, ground truth)


def frame_period(trajectory: Sequence[TimedPose]) -> float:
    if len(trajectory) < 2:
        return math.inf
    return float(np.median(np.diff(sorted(p.timestamp for p in trajectory))))


def associate(est: Sequence[TimedPose], gt: Sequence[TimedPose], max_gap: Optional[float] = None) -> Tuple[List[Match], int]:
    """Nearest-timestamp matches within max_gap (default: half the ground-truth frame period) and the dropped count."""
    if max_gap is None:
        max_gap = 0.5 * frame_period(gt)
    gt_sorted = sorted(gt, key=lambda p: p.timestamp)
    times = [p.timestamp for p in gt_sorted]
    matches: List[Match] = []
    for p in est:
        i = bisect.bisect_left(times, p.timestamp)
        candidates = [j for j in (i - 1, i) if 0 <= j < len(times)]
        if not candidates:
            continue
        j = min(candidates, key=lambda c: abs(times[c] - p.timestamp))
        if abs(times[j] - p.timestamp) <= max_gap + 1e-9:
            matches.append((p.timestamp, p.pose, gt_sorted[j].pose))
    dropped = len(est) - len(matches)
    if dropped:
        log.warning(f"Dropped {dropped} of {len(est)} estimated poses without a ground-truth match")
    return matches, dropped


def _align(matches: Sequence[Match]) -> Pose2:
    if len(matches) < 2:
        raise DegenerateGeometryError(f"alignment needs at least 2 matched poses, got {len(matches)}")
    p = np.array([[e.x, e.y] for _, e, _ in matches])
    q = np.array([[g.x, g.y] for _, _, g in matches])
    p_mean, q_mean = p.mean(axis=0), q.mean(axis=0)
    pc, qc = p - p_mean, q - q_mean
    theta = math.atan2(float(np.sum(qc[:, 1] * pc[:, 0] - qc[:, 0] * pc[:, 1])),
                       float(np.sum(qc[:, 0] * pc[:, 0] + qc[:, 1] * pc[:, 1])))
    c, s = math.cos(theta), math.sin(theta)
    t = q_mean - np.array([[c, -s], [s, c]]) @ p_mean
    return Pose2(float(t[0]), float(t[1]), theta)


def align_se2(est: Sequence[TimedPose], gt: Sequence[TimedPose], max_gap: Optional[float] = None) -> Pose2:
    """Rigid transform T (no scale) minimising sum |T p_est - p_gt|^2 over timestamp-matched poses."""
    matches, _ = associate(est, gt, max_gap)
    return _align(matches)


def ape(est: Sequence[TimedPose], gt: Sequence[TimedPose], max_gap: Optional[float] = None) -> ApeResult:
    """Absolute pose error after alignment, RMSE of translation (m) and yaw (deg)."""
    matches, dropped = associate(est, gt, max_gap)
    align = _align(matches)
    errors: List[Tuple[float, float, float]] = []
    for t, e, g in matches:
        aligned = pose_compose(align, e)
        trans = math.hypot(aligned.x - g.x, aligned.y - g.y)
        rot = math.degrees(abs(wrap_angle(e.yaw + align.yaw - g.yaw)))
        errors.append((t, trans, rot))
    trans_rmse = math.sqrt(sum(e[1] ** 2 for e in errors) / len(errors))
    rot_rmse = math.sqrt(sum(e[2] ** 2 for e in errors) / len(errors))
    return ApeResult(trans_rmse, rot_rmse, errors, matched=len(matches), dropped=dropped)


def write_tum(trajectory: Sequence[TimedPose], path: str) -> None:
    """t x y z qx qy qz qw with z = 0 and a rotation about z."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        f.write("# timestamp x y z qx qy qz qw\n")
        for p in trajectory:
            half = 0.5 * p.pose.yaw
            f.write(f"{p.timestamp!r} {p.pose.x!r} {p.pose.y!r} 0.0 0.0 0.0 {math.sin(half)!r} {math.cos(half)!r}\n")


def read_tum(path: str) -> List[TimedPose]:
    if not os.path.exists(path):
        raise MeasurementError(f"trajectory file {path} does not exist")
    trajectory: List[TimedPose] = []
    with open(path) as f:
        for line_number, line in enumerate(f, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split()
            if len(fields) != 8:
                raise MeasurementError(f"{path} line {line_number}: expected 8 fields, got {len(fields)}")
            try:
                t, x, y, _, qx, qy, qz, qw = (float(v) for v in fields)
            except ValueError as e:
                raise MeasurementError(f"{path} line {line_number}: {e}") from e
            yaw = math.atan2(2.0 * (qw * qz + qx * qy), 1.0 - 2.0 * (qy * qy + qz * qz))
            trajectory.append(TimedPose(t, Pose2(x, y, yaw)))
    return trajectory


@dataclass(frozen=True)
class MetricsRow:
    scenario: str
    mode: str
    result: ApeResult


METRICS_COLUMNS = ["scenario", "mode", "trans_rmse_m", "rot_rmse_deg"]


def write_metrics_csv(rows: Sequence[MetricsRow], path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow([row.scenario, row.mode, f"{row.result.trans_rmse:.6f}", f"{row.result.rot_rmse:.6f}"])


def format_table(rows: Sequence[MetricsRow]) -> str:
    headers = ["scenario", "mode", "APE trans RMSE (m)", "APE rot RMSE (deg)"]
    body = [[r.scenario, r.mode, f"{r.result.trans_rmse:.4f}", f"{r.result.rot_rmse:.4f}"] for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)), "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(lines)
