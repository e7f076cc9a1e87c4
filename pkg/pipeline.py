# pipeline.py
"""stream_pipeline wiring of the backend stages and the frame-by-frame driver."""
import dataclasses
import threading
from typing import List, Sequence

from stream_pipeline.data_package import DataPackage
from stream_pipeline.pipeline import Pipeline, ControllerMode, PipelinePhase, PipelineController

from Config import Settings
from backend import BackendSession, process_frame
from data import RadarData, RadarFrame, TimedPose
from errors import DomainError, RadarBAError
from m_bundle_adjustment import Bundle_Adjustment
from m_frontend import Frontend_Tracking
from m_keyframe import Keyframe_Selection
from m_mapping import Local_Mapping
from m_pose_refinement import Pose_Refinement
import logger

log = logger.get_logger()

RUN_MODES = ["full", "no-backend", "no-ba", "no-frontend-init"]


def apply_mode(settings: Settings, mode: str) -> Settings:
    """Switch the backend flags for a run mode; everything else is left as configured."""
    backend = settings.backend
    if mode == "full":
        return settings
    if mode == "no-backend":
        backend = dataclasses.replace(backend, enable_local=False, enable_ba=False)
    elif mode == "no-ba":
        backend = dataclasses.replace(backend, enable_ba=False)
    elif mode == "no-frontend-init":
        backend = dataclasses.replace(backend, enable_frontend=False)
    else:
        raise DomainError(f"unknown run mode '{mode}', expected one of {', '.join(RUN_MODES)}")
    return dataclasses.replace(settings, backend=backend)


def build_pipeline(session: BackendSession) -> Pipeline[RadarData]:
    params = session.params
    timeout = params.stage_timeout
    phases = [
        PipelinePhase(name="FrontendPhase", modules=[Frontend_Tracking(session)]),
        PipelinePhase(name="KeyframePhase", modules=[Keyframe_Selection(session)]),
    ]
    if params.enable_local:
        phases.append(PipelinePhase(name="PoseRefinementPhase", modules=[Pose_Refinement(session, timeout)]))
        phases.append(PipelinePhase(name="MappingPhase", modules=[Local_Mapping(session, timeout)]))
    if params.enable_ba:
        phases.append(PipelinePhase(name="BundleAdjustmentPhase", modules=[Bundle_Adjustment(session, timeout)]))

    controllers = [
        PipelineController(
            mode=ControllerMode.NOT_PARALLEL,
            max_workers=1,
            queue_size=1,
            name="BackendController",
            phases=phases,
        )
    ]
    return Pipeline[RadarData](controllers, name=f"RadarBAPipeline-{session.mode}")


def run_pipeline(frames: Sequence[RadarFrame], session: BackendSession) -> List[TimedPose]:
    """Feed frames one at a time and wait for each to leave the pipeline before sending the next."""
    pipeline = build_pipeline(session)
    instance = pipeline.register_instance()
    done = threading.Event()
    failures: List[Exception] = []

    def callback(dp: DataPackage[RadarData]) -> None:
        done.set()

    def exit_callback(dp: DataPackage[RadarData]) -> None:
        if dp.data and dp.data.error is not None:
            failures.append(dp.data.error)
        done.set()

    def overflow_callback(dp: DataPackage[RadarData]) -> None:
        failures.append(RadarBAError("pipeline queue overflow"))
        done.set()

    def outdated_callback(dp: DataPackage[RadarData]) -> None:
        failures.append(RadarBAError("pipeline dropped an outdated frame"))
        done.set()

    def error_callback(dp: DataPackage[RadarData]) -> None:
        log.error("Pipeline error", extra={"data_package": dp})
        frame_id = dp.data.frame.frame_id if dp.data else -1
        failures.append(RadarBAError(f"pipeline error on frame {frame_id}"))
        done.set()

    wait_limit = session.params.stage_timeout * 5
    try:
        for frame in frames:
            done.clear()
            pipeline.execute(
                            RadarData(frame=frame),
                            instance,
                            callback=callback,
                            exit_callback=exit_callback,
                            overflow_callback=overflow_callback,
                            outdated_callback=outdated_callback,
                            error_callback=error_callback
                            )
            if not done.wait(wait_limit):
                raise RadarBAError(f"frame {frame.frame_id} did not leave the pipeline within {wait_limit:.0f} s")
            if failures:
                raise failures[0]
    finally:
        pipeline.unregister_instance(instance)
    log.info(f"Pipeline {pipeline.get_id()} processed {len(frames)} frames, {len(session.keyframes)} keyframes")
    return session.trajectory()


def run_sequence(frames: Sequence[RadarFrame], settings: Settings, mode: str = "full", use_pipeline: bool = True) -> BackendSession:
    """Process a whole sequence in one run mode; the returned session holds trajectory, scene and loss log."""
    session = BackendSession(apply_mode(settings, mode), mode=mode)
    if use_pipeline:
        run_pipeline(frames, session)
    else:
        for frame in frames:
            process_frame(frame, session)
    return session
