# backend.py
import dataclasses
import math
import time
from typing import Dict, List, Optional, Sequence, Tuple

import torch

from Config import Settings
from data import (GaussianScene, Keyframe, LossRecord, LossSpec, LossWeights, OptimizerConfig, Pose2, RadarConfig,
                  RadarData, RadarFrame, SceneParams, TimedPose, Vel2, WindowSpec, WindowView, wrap_angle)
from errors import DomainError, NumericalError
from frontend import FrontendTracker
import logger
import metrics
from radar_model import pose_between, pose_compose
from renderer import WindowProblem, ego_velocity_from_poses, render_ra
from scene import densify, init_from_frame, prune

log = logger.get_logger()


def should_create_keyframe(last_kf: Pose2, current: Pose2, tau_t: float = 0.5, tau_r: float = math.radians(10.0)) -> bool:
    translation = math.hypot(current.x - last_kf.x, current.y - last_kf.y)
    rotation = abs(wrap_angle(current.yaw - last_kf.yaw))
    return translation >= tau_t or rotation >= tau_r


def select_window(store: Sequence[Keyframe], newest: Keyframe, spec: WindowSpec) -> List[Keyframe]:
    """Keyframes up to newest that fall inside the radius around it, or the last N of them."""
    position = next((i for i, kf in enumerate(store) if kf is newest), None)
    if position is None:
        raise DomainError(f"keyframe {newest.id} is not part of the store")
    candidates = list(store[:position + 1])
    if spec.kind == "radius":
        return [kf for kf in candidates
                if math.hypot(kf.pose.x - newest.pose.x, kf.pose.y - newest.pose.y) <= spec.r_ba]
    if spec.n_sliding is None:
        return candidates
    return candidates[-spec.n_sliding:]


def _learning_rates(opt: OptimizerConfig) -> Dict[str, float]:
    return {
        "pose.xy": opt.lr_pose_xy,
        "pose.yaw": opt.lr_pose_yaw,
        "gaussian.mean": opt.lr_mean,
        "gaussian.orient": opt.lr_orient,
        "gaussian.scales": opt.lr_scale,
        "gaussian.power": opt.lr_power,
    }


def _optimize(problem: WindowProblem, opt: OptimizerConfig, iterations: int, frame_id: int,
              scene_params: SceneParams, loss_log: Optional[List[LossRecord]]) -> Tuple[float, float]:
    # Adam; the best iterate is left in place
    stage = problem.spec.stage
    started = time.perf_counter()
    initial_state = problem.snapshot()
    groups = problem.parameter_groups(_learning_rates(opt))

    def record(iteration: int, value: float) -> None:
        if loss_log is not None:
            loss_log.append(LossRecord(frame_id, stage, iteration, value))

    try:
        if not groups or iterations == 0:
            value = problem.evaluate(backward=False)
            record(0, value)
            return value, value

        optimizer = torch.optim.Adam(groups, betas=(opt.adam_beta1, opt.adam_beta2), eps=opt.adam_eps)  # type: ignore[arg-type]
        best = math.inf
        best_state = initial_state
        initial = math.nan
        for iteration in range(iterations):
            value = problem.evaluate(backward=True)
            record(iteration, value)
            if iteration == 0:
                initial = value
            if value < best:
                best = value
                best_state = problem.snapshot()
            optimizer.step()
            problem.project_(scene_params.s_min, scene_params.s_max)

        value = problem.evaluate(backward=False)
        record(iterations, value)
        if value < best:
            best = value
            best_state = problem.snapshot()
        problem.restore(best_state)
    except NumericalError as e:
        problem.restore(initial_state)
        log.error(f"Frame {frame_id}: {stage} stage aborted: {e}", extra={"stage": stage, "frame_id": frame_id})
        raise

    seconds = time.perf_counter() - started
    metrics.observe_stage(stage, seconds, iterations, best)
    log.info(
        f"Frame {frame_id}: {stage} stage {iterations} iterations, loss {initial:.6g} -> {best:.6g}",
        extra={"stage": stage, "frame_id": frame_id, "iterations": iterations, "initial_loss": initial,
               "best_loss": best, "seconds": seconds},
    )
    return initial, best


def _views(window: Sequence[Keyframe], store: Optional[Sequence[Keyframe]], with_rd: bool,
           optimize_poses: bool) -> List[WindowView]:
    ordered = sorted(window, key=lambda kf: kf.id)
    anchor = ordered[0].id if ordered else None
    index_in_window = {kf.id: i for i, kf in enumerate(ordered)}
    known = {kf.id: kf for kf in (store if store is not None else ordered)}
    views: List[WindowView] = []
    for kf in ordered:
        previous: Optional[int] = None
        previous_pose: Optional[Pose2] = None
        dt = 0.0
        predecessor = known.get(kf.id - 1)
        if predecessor is not None:
            dt = kf.timestamp - predecessor.timestamp
            if kf.id - 1 in index_in_window:
                previous = index_in_window[kf.id - 1]
            else:
                previous_pose = predecessor.pose
        views.append(WindowView(
            pose=kf.pose,
            measured_ra=kf.frame.ra,
            measured_rd=kf.frame.rd if with_rd else None,
            previous=previous,
            previous_pose=previous_pose,
            dt=dt,
            fixed=(kf.id == anchor) or not optimize_poses,
        ))
    return views


def refine_pose(newest: Keyframe, scene: GaussianScene, cfg: RadarConfig, w: LossWeights, opt: OptimizerConfig, *,
                previous: Optional[Keyframe], use_rd: bool = True, scene_params: Optional[SceneParams] = None,
                loss_log: Optional[List[LossRecord]] = None) -> Pose2:
    if previous is None:
        raise DomainError(f"pose refinement of keyframe {newest.id} needs a previous keyframe")
    if len(scene) == 0:
        log.warning(f"Keyframe {newest.id}: empty scene, pose refinement skipped")
        return newest.pose
    view = WindowView(
        pose=newest.pose,
        measured_ra=newest.frame.ra,
        measured_rd=newest.frame.rd,
        previous_pose=previous.pose,
        dt=newest.timestamp - previous.timestamp,
    )
    problem = WindowProblem(scene, [view], cfg, LossSpec("pose", use_rd=use_rd, grad_poses=True, grad_gaussians=False), w)
    _optimize(problem, opt, opt.iters_pose, newest.frame.frame_id, scene_params or SceneParams(), loss_log)
    return problem.poses()[0]


def update_map(window: Sequence[Keyframe], scene: GaussianScene, cfg: RadarConfig, w: LossWeights, opt: OptimizerConfig, *,
               scene_params: Optional[SceneParams] = None, densify_scene: bool = False,
               loss_log: Optional[List[LossRecord]] = None) -> GaussianScene:
    """Optimise Gaussian parameters with the window's poses frozen, then densify (optional) and prune."""
    if not window:
        raise DomainError("mapping window is empty")
    params = scene_params or SceneParams()
    newest = max(window, key=lambda kf: kf.id)
    if len(scene) > 0:
        problem = WindowProblem(scene, _views(window, None, with_rd=False, optimize_poses=False), cfg,
                                LossSpec("map", use_rd=False, grad_poses=False, grad_gaussians=True), w)
        _optimize(problem, opt, opt.iters_map, newest.frame.frame_id, params, loss_log)
        scene = problem.scene()
    if densify_scene:
        rendered = render_ra(scene, newest.pose, cfg)
        scene = densify(scene, newest.frame.ra, rendered, newest.pose, cfg,
                        params.densify_threshold_factor * cfg.noise_floor, params)
    return prune(scene, params.prune_threshold)


def bundle_adjust(window: Sequence[Keyframe], scene: GaussianScene, cfg: RadarConfig, w: LossWeights, opt: OptimizerConfig, *,
                  store: Optional[Sequence[Keyframe]] = None, use_rd: bool = True,
                  scene_params: Optional[SceneParams] = None,
                  loss_log: Optional[List[LossRecord]] = None) -> Tuple[List[Pose2], GaussianScene]:
    """Jointly optimise window poses and the scene. The oldest keyframe of the window
    anchors the gauge, so keyframe 0 stays fixed whenever it takes part.

    Poses are returned in the order of `window`.
    """
    if not window:
        raise DomainError("bundle-adjustment window is empty")
    ordered = sorted(window, key=lambda kf: kf.id)
    newest = ordered[-1]
    problem = WindowProblem(scene, _views(ordered, store, with_rd=use_rd, optimize_poses=True), cfg,
                            LossSpec("ba", use_rd=use_rd, grad_poses=True, grad_gaussians=True), w)
    _optimize(problem, opt, opt.iters_ba, newest.frame.frame_id, scene_params or SceneParams(), loss_log)
    by_id = {kf.id: pose for kf, pose in zip(ordered, problem.poses())}
    return [by_id[kf.id] for kf in window], problem.scene()


@dataclasses.dataclass(frozen=True)
class TrajectoryEntry:
    frame_id: int
    timestamp: float
    anchor: int      # keyframe id
    relative: Pose2  # frame pose expressed in the anchor keyframe


class BackendSession:
    """State of one sequence: frontend, keyframe store, scene, trajectory and loss log.

    The stage methods are called in order for every frame, either by
    process_frame or by the pipeline modules.
    """

    def __init__(self, settings: Settings, mode: str = "full") -> None:
        self.settings = settings
        self.mode = mode
        self.params = settings.backend
        self.tracker = FrontendTracker(settings.radar, settings.frontend)
        self.keyframes: List[Keyframe] = []
        self.scene: GaussianScene = GaussianScene.empty(settings.scene.bounds, settings.scene.max_gaussians)
        self.entries: List[TrajectoryEntry] = []
        self.frontend_trajectory: List[TimedPose] = []
        self.loss_log: List[LossRecord] = []
        self._anchor_frontend: Optional[Pose2] = None
        self._frames_since_keyframe: int = 0

    @property
    def backend_enabled(self) -> bool:
        return self.params.enable_local or self.params.enable_ba

    # stages

    def track(self, item: RadarData) -> RadarData:
        frame = item.frame
        metrics.FRAMES.labels(mode=self.mode).inc()
        if self.params.enable_frontend:
            pose, velocity = self.tracker.step(frame)
            self.frontend_trajectory.append(TimedPose(frame.timestamp, pose))
            item.velocity = velocity
        if not self.keyframes:
            item.predicted_pose = Pose2.identity()
        elif self.params.enable_frontend:
            assert self._anchor_frontend is not None and self.tracker.pose is not None
            relative = pose_between(self._anchor_frontend, self.tracker.pose)
            item.predicted_pose = pose_compose(self.keyframes[-1].pose, relative)
        else:
            item.predicted_pose = self.keyframes[-1].pose
        return item

    def is_keyframe(self, item: RadarData) -> bool:
        if not self.keyframes:
            return True
        self._frames_since_keyframe += 1
        if not self.params.enable_frontend:
            return self._frames_since_keyframe >= self.params.keyframe_stride
        assert item.predicted_pose is not None
        return should_create_keyframe(self.keyframes[-1].pose, item.predicted_pose,
                                      self.params.keyframe_translation, self.params.keyframe_rotation)

    def record_frame(self, item: RadarData) -> None:
        assert item.predicted_pose is not None
        last = self.keyframes[-1]
        self.entries.append(TrajectoryEntry(item.frame.frame_id, item.frame.timestamp, last.id,
                                            pose_between(last.pose, item.predicted_pose)))

    def add_keyframe(self, item: RadarData) -> Keyframe:
        assert item.predicted_pose is not None
        frame = item.frame
        keyframe = Keyframe(id=len(self.keyframes), timestamp=frame.timestamp, pose=item.predicted_pose, frame=frame)
        if self.keyframes:
            previous = self.keyframes[-1]
            if not frame.timestamp > previous.timestamp:
                raise DomainError(f"frame {frame.frame_id} is not later than keyframe {previous.id}")
            keyframe.velocity = ego_velocity_from_poses(keyframe.pose, previous.pose, frame.timestamp - previous.timestamp)
        elif self.backend_enabled:
            tau_init = self.settings.scene.init_threshold_factor * self.settings.radar.noise_floor
            self.scene = init_from_frame(frame.ra, keyframe.pose, self.settings.radar, tau_init, self.settings.scene)
        self.keyframes.append(keyframe)
        self.entries.append(TrajectoryEntry(frame.frame_id, frame.timestamp, keyframe.id, Pose2.identity()))
        self._anchor_frontend = self.tracker.pose
        self._frames_since_keyframe = 0
        item.keyframe = keyframe
        metrics.KEYFRAMES.inc()
        log.debug(f"Keyframe {keyframe.id} at frame {frame.frame_id}", extra={"keyframe": keyframe.id})
        return keyframe

    def refine(self, keyframe: Keyframe) -> Optional[float]:
        if not self.params.enable_local or keyframe.id == 0:
            return None
        s = self.settings
        mark = len(self.loss_log)
        keyframe.pose = refine_pose(keyframe, self.scene, s.radar, s.losses, s.optimizer,
                                    previous=self.keyframes[keyframe.id - 1], use_rd=self.params.use_rd_loss,
                                    scene_params=s.scene, loss_log=self.loss_log)
        self.refresh_velocities()
        return self._best_since(mark)

    def map(self, keyframe: Keyframe) -> Optional[float]:
        if not self.params.enable_local:
            return None
        s = self.settings
        mark = len(self.loss_log)
        window = select_window(self.keyframes, keyframe, self.params.mapping_window)
        densify_now = (keyframe.id + 1) % s.scene.densify_every == 0
        self.scene = update_map(window, self.scene, s.radar, s.losses, s.optimizer, scene_params=s.scene,
                                densify_scene=densify_now, loss_log=self.loss_log)
        return self._best_since(mark)

    def adjust(self, keyframe: Keyframe) -> Optional[float]:
        if not self.params.enable_ba or keyframe.id % self.params.ba_every != 0:
            return None
        s = self.settings
        mark = len(self.loss_log)
        window = select_window(self.keyframes, keyframe, self.params.ba_window)
        poses, scene = bundle_adjust(window, self.scene, s.radar, s.losses, s.optimizer, store=self.keyframes,
                                     use_rd=self.params.use_rd_loss, scene_params=s.scene, loss_log=self.loss_log)
        for kf, pose in zip(window, poses):
            kf.pose = pose
        self.scene = prune(scene, 0.0)
        self.refresh_velocities()
        return self._best_since(mark)

    def _best_since(self, mark: int) -> Optional[float]:
        values = [r.loss for r in self.loss_log[mark:]]
        return min(values) if values else None

    def refresh_velocities(self) -> None:
        for previous, kf in zip(self.keyframes, self.keyframes[1:]):
            kf.velocity = ego_velocity_from_poses(kf.pose, previous.pose, kf.timestamp - previous.timestamp)
        if self.keyframes:
            self.keyframes[0].velocity = Vel2.zero()

    # results

    def trajectory(self) -> List[TimedPose]:
        return [TimedPose(e.timestamp, pose_compose(self.keyframes[e.anchor].pose, e.relative)) for e in self.entries]

    def keyframe_trajectory(self) -> List[TimedPose]:
        return [TimedPose(kf.timestamp, kf.pose) for kf in self.keyframes]


def process_frame(frame: RadarFrame, session: BackendSession) -> List[TimedPose]:
    """Frontend, keyframe decision, pose refinement, mapping and bundle adjustment for one frame."""
    item = session.track(RadarData(frame=frame))
    if not session.is_keyframe(item):
        session.record_frame(item)
        return session.trajectory()
    keyframe = session.add_keyframe(item)
    for stage, run in (("pose", session.refine), ("map", session.map), ("ba", session.adjust)):
        best = run(keyframe)
        if best is not None:
            item.stage_losses[stage] = best
    return session.trajectory()
