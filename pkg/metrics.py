# metrics.py
from prometheus_client import Counter, Gauge, Histogram, start_http_server

import logger

log = logger.get_logger()

STAGE_SECONDS = Histogram(
    "radar_ba_stage_seconds",
    "Wall time of one backend stage",
    ["stage"],
    buckets=(0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0, 300.0),
)
STAGE_ITERATIONS = Counter("radar_ba_stage_iterations_total", "Optimizer iterations run per stage", ["stage"])
STAGE_LOSS = Gauge("radar_ba_stage_loss", "Best loss of the most recent run of a stage", ["stage"])
KEYFRAMES = Counter("radar_ba_keyframes_total", "Keyframes created")
FRAMES = Counter("radar_ba_frames_total", "Frames processed", ["mode"])


def observe_stage(stage: str, seconds: float, iterations: int, best_loss: float) -> None:
    STAGE_SECONDS.labels(stage=stage).observe(seconds)
    STAGE_ITERATIONS.labels(stage=stage).inc(iterations)
    STAGE_LOSS.labels(stage=stage).set(best_loss)


def start_metrics_server(port: int) -> None:
    start_http_server(port)
    log.info(f"Serving metrics on port {port}")
