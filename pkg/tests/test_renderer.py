import math
from typing import List, Optional

import numpy as np
import pytest
import torch

from conftest import assert_grad_close, central_difference, nearby_poses, point_scene, wide_scene
from data import (DopplerMap, Gaussian2D, GaussianScene, LossSpec, LossWeights, Pose2, RAImage, RadarConfig, Vel2,
                  WindowView)
from errors import DomainError, NumericalError
from radar_model import grid_from_config, pose_compose, received_power, sensor_to_world
from renderer import (WindowProblem, _scene_tensors, doppler_map_t, doppler_row_t, ego_velocity_from_poses,
                      gaussian_doppler, project_to_polar, render_doppler_map, render_ra, render_ra_batch_t, render_rd,
                      render_rd_t, render_with_grads)

DT = 0.1


# projection

def test_project_to_polar_ahead():
    result = project_to_polar(Gaussian2D((5.0, 0.0), 0.0, (1.0, 1.0), 1.0), Pose2.identity())
    assert result is not None
    rng, phi, cov = result
    assert rng == pytest.approx(5.0, abs=1e-12)
    assert phi == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(cov, np.diag([1.0, 1.0 / 25.0]), atol=1e-12)


def test_project_to_polar_axis_and_degenerate():
    result = project_to_polar(Gaussian2D((0.0, 3.0), 0.3, (0.5, 0.2), 1.0), Pose2.identity())
    assert result is not None
    assert result[1] == pytest.approx(math.pi / 2, abs=1e-12)
    assert project_to_polar(Gaussian2D((2.0, 1.0), 0.0, (0.5, 0.5), 1.0), Pose2(2.0, 1.0, 0.4)) is None


def test_project_to_polar_matches_jacobian_form(rng):
    for _ in range(10):
        g = Gaussian2D(tuple(rng.uniform(-5, 5, 2)), rng.uniform(-3, 3), tuple(rng.uniform(0.1, 1.0, 2)), 1.0)
        pose = Pose2(*rng.uniform(-1, 1, 2), rng.uniform(-3, 3))
        result = project_to_polar(g, pose)
        assert result is not None
        rng_g, phi, cov = result
        c, s = math.cos(g.orient), math.sin(g.orient)
        rot = np.array([[c, -s], [s, c]])
        sigma_world = rot @ np.diag(np.square(g.scales)) @ rot.T
        cy, sy = math.cos(pose.yaw), math.sin(pose.yaw)
        to_sensor = np.array([[cy, sy], [-sy, cy]])
        jac = np.array([[math.cos(phi), math.sin(phi)], [-math.sin(phi) / rng_g, math.cos(phi) / rng_g]])
        expected = jac @ to_sensor @ sigma_world @ to_sensor.T @ jac.T
        np.testing.assert_allclose(cov, expected, rtol=1e-9, atol=1e-12)


# RA rendering

def test_render_ra_empty_scene():
    cfg = RadarConfig(n_range=16, n_azimuth=12, n_doppler=8)
    assert np.all(render_ra(GaussianScene.empty(), Pose2.identity(), cfg).data == 0.0)


def test_render_ra_delta_at_bin_center():
    cfg = RadarConfig(n_range=16, n_azimuth=13, n_doppler=8, range_res=0.25, azimuth_fov=1.2)
    grid = grid_from_config(cfg)
    r, a = 7, 4
    mean = sensor_to_world(np.array([grid.range_centers[r] * math.cos(grid.azimuth_centers[a]),
                                     grid.range_centers[r] * math.sin(grid.azimuth_centers[a])]), Pose2.identity())
    scene = point_scene([mean], scales=1e-3, power=2.0)
    image = render_ra(scene, Pose2.identity(), cfg).data
    expected = received_power(2.0, grid.range_centers[r], cfg)
    assert image[r, a] == pytest.approx(expected, rel=1e-9)
    image[r, a] = 0.0
    assert np.max(image) < 1e-12 * expected


def test_render_ra_is_additive(rng):
    cfg = RadarConfig(n_range=24, n_azimuth=16, n_doppler=8, range_res=0.2)
    pose = Pose2(0.2, -0.1, 0.1)
    a = GaussianScene(rng.uniform(0.5, 4.0, (4, 2)), rng.uniform(-3, 3, 4), rng.uniform(0.05, 0.6, (4, 2)), rng.uniform(0, 2, 4))
    b = GaussianScene(rng.uniform(0.5, 4.0, (3, 2)), rng.uniform(-3, 3, 3), rng.uniform(0.05, 0.6, (3, 2)), rng.uniform(0, 2, 3))
    both = render_ra(a.concat(b), pose, cfg).data
    np.testing.assert_allclose(both, render_ra(a, pose, cfg).data + render_ra(b, pose, cfg).data, rtol=1e-10, atol=1e-12)

    twice = render_ra(a.concat(a), pose, cfg).data
    np.testing.assert_allclose(twice, 2.0 * render_ra(a, pose, cfg).data, rtol=1e-12, atol=1e-12)


def test_render_ra_gauge_invariance(rng):
    cfg = RadarConfig(n_range=24, n_azimuth=16, n_doppler=8, range_res=0.2)
    scene = GaussianScene(rng.uniform(0.5, 4.0, (5, 2)), rng.uniform(-3, 3, 5), rng.uniform(0.05, 0.6, (5, 2)), rng.uniform(0, 2, 5))
    pose = Pose2(0.3, 0.2, -0.2)
    g = Pose2(7.0, -3.0, 1.1)
    moved = scene.replace(means=sensor_to_world(scene.means, g), orient=scene.orient + g.yaw)
    np.testing.assert_allclose(render_ra(moved, pose_compose(g, pose), cfg).data, render_ra(scene, pose, cfg).data, rtol=1e-9, atol=1e-9)


def test_render_ra_linear_in_power():
    cfg = RadarConfig(n_range=16, n_azimuth=12, n_doppler=8, range_res=0.25)
    base = point_scene([[2.0, 0.3], [1.5, -0.4]], scales=0.3)
    images = [render_ra(base.replace(power=np.array([p, 1.0])), Pose2.identity(), cfg).data for p in (1.0, 2.0, 3.0)]
    np.testing.assert_allclose(images[1] - images[0], images[2] - images[1], atol=1e-12)


def test_render_ra_outside_fov_and_range_contributes_nothing():
    cfg = RadarConfig(n_range=16, n_azimuth=12, n_doppler=8, range_res=0.25)
    behind = point_scene([[-2.0, 0.0], [40.0, 0.0]], scales=0.1)
    assert np.all(render_ra(behind, Pose2.identity(), cfg).data == 0.0)


def ra_oracle(scene: GaussianScene, pose: Pose2, cfg: RadarConfig) -> np.ndarray:
    grid = grid_from_config(cfg)
    image = np.zeros((cfg.n_range, cfg.n_azimuth))
    for g in scene:
        polar = project_to_polar(g, pose)
        if polar is None:
            continue
        r, phi, cov = polar
        inv = np.linalg.inv(cov + 1e-8 * np.eye(2))
        d_r = grid.range_centers[:, None] - r
        d_a = np.remainder(grid.azimuth_centers[None, :] - phi + math.pi, 2 * math.pi) - math.pi
        q = inv[0, 0] * d_r ** 2 + 2 * inv[0, 1] * d_r * d_a + inv[1, 1] * d_a ** 2
        image += np.where(q <= 9.0, cfg.power_const * g.power_ratio / r ** 4 * np.exp(-0.5 * q), 0.0)
    return image


@pytest.mark.parametrize("n_azimuth,fov", [(16, 1.2), (9, 2 * math.pi - 0.3), (1, 0.5)])
def test_render_ra_patches_match_dense_evaluation(rng, n_azimuth, fov):
    cfg = RadarConfig(n_range=20, n_azimuth=n_azimuth, n_doppler=8, range_res=0.2, azimuth_fov=fov)
    n = 12
    means = np.concatenate([rng.uniform(-4.0, 4.0, (n - 2, 2)), [[0.05, 0.02], [3.0, -0.1]]])
    scales = np.concatenate([rng.uniform(0.02, 1.5, (n - 2, 2)), [[0.3, 0.3], [2.5, 0.01]]])
    scene = GaussianScene(means, rng.uniform(-3, 3, n), scales, rng.uniform(0.1, 2.0, n))
    poses = [Pose2.identity(), Pose2(0.4, -0.3, 2.0), Pose2(-1.0, 0.5, -0.7)]
    batch = render_ra_batch_t(*_scene_tensors(scene), torch.tensor([p.x for p in poses], dtype=torch.float64),
                              torch.tensor([p.y for p in poses], dtype=torch.float64),
                              torch.tensor([p.yaw for p in poses], dtype=torch.float64), cfg)
    assert batch.shape == (3, cfg.n_range, cfg.n_azimuth)
    for i, pose in enumerate(poses):
        expected = ra_oracle(scene, pose, cfg)
        np.testing.assert_allclose(batch[i].numpy(), expected, rtol=1e-10, atol=1e-12 * max(1.0, expected.max()))
        np.testing.assert_allclose(render_ra(scene, pose, cfg).data, batch[i].numpy(), rtol=1e-13)


# velocity and Doppler

def test_ego_velocity_from_poses_examples():
    assert ego_velocity_from_poses(Pose2(1, 2, 0.3), Pose2(1, 2, 0.1), 0.5) == Vel2(0.0, 0.0)
    v = ego_velocity_from_poses(Pose2(1, 0, 0), Pose2(0, 0, 0), 1.0)
    assert (v.vx, v.vy) == pytest.approx((1.0, 0.0), abs=1e-12)
    v = ego_velocity_from_poses(Pose2(1, 0, math.pi / 2), Pose2(0, 0, math.pi / 2), 1.0)
    assert (v.vx, v.vy) == pytest.approx((0.0, -1.0), abs=1e-12)
    with pytest.raises(DomainError):
        ego_velocity_from_poses(Pose2(1, 0, 0), Pose2(0, 0, 0), 0.0)


def test_gaussian_doppler_examples():
    ahead = Gaussian2D((5.0, 0.0), 0.0, (0.1, 0.1), 1.0)
    side = Gaussian2D((0.0, 5.0), 0.0, (0.1, 0.1), 1.0)
    assert gaussian_doppler(ahead, Pose2.identity(), Vel2(2.0, 0.0)) == pytest.approx(2.0)
    assert gaussian_doppler(ahead, Pose2.identity(), Vel2.zero()) == 0.0
    assert gaussian_doppler(side, Pose2.identity(), Vel2(2.0, 0.0)) == pytest.approx(0.0, abs=1e-12)
    assert gaussian_doppler(ahead, Pose2(5.0, 0.0, 0.0), Vel2(1.0, 0.0)) is None


def test_doppler_map_examples():
    cfg = RadarConfig(n_range=4, n_azimuth=3, n_doppler=8, azimuth_fov=math.pi)
    dop = render_doppler_map(Vel2(1.0, 0.0), cfg).data
    assert dop[0, 1] == pytest.approx(1.0)
    assert np.all(dop == dop[0])
    assert np.all(render_doppler_map(Vel2.zero(), cfg).data == 0.0)
    assert render_doppler_map(Vel2(0.0, 1.0), cfg).data[2, 2] == pytest.approx(1.0)


def test_doppler_map_magnitude_bound(rng):
    cfg = RadarConfig(n_range=8, n_azimuth=33, n_doppler=8)
    for _ in range(20):
        v = Vel2(*rng.normal(0, 3, 2))
        assert np.max(np.abs(render_doppler_map(v, cfg).data)) <= v.speed + 1e-12


# RD rendering

def rd_oracle(ra: np.ndarray, dop: np.ndarray, cfg: RadarConfig) -> np.ndarray:
    grid = grid_from_config(cfg)
    sigma = cfg.kernel_sigma
    out = np.zeros((cfg.n_range, cfg.n_doppler))
    for r in range(cfg.n_range):
        for d in range(cfg.n_doppler):
            for a in range(cfg.n_azimuth):
                diff = dop[r, a] - grid.doppler_centers[d]
                out[r, d] += cfg.gain[a] * ra[r, a] * math.exp(-diff * diff / (2 * sigma * sigma))
    return out


def test_render_rd_zero_image():
    cfg = RadarConfig(n_range=8, n_azimuth=6, n_doppler=7)
    rd = render_rd(RAImage(np.zeros((8, 6))), render_doppler_map(Vel2(1.0, 0.5), cfg), cfg)
    assert np.all(rd.data == 0.0)


def test_render_rd_single_bin_on_doppler_center():
    cfg = RadarConfig(n_range=8, n_azimuth=7, n_doppler=9, doppler_res=0.25, kernel_sigma_factor=0.01, bin_window=9)
    grid = grid_from_config(cfg)
    ra = np.zeros((8, 7))
    ra[3, 2] = 4.0
    dop = np.zeros((8, 7))
    dop[:, :] = grid.doppler_centers[6]
    rd = render_rd(RAImage(ra), DopplerMap(dop), cfg).data
    assert rd[3, 6] == pytest.approx(cfg.gain[2] * 4.0, rel=1e-12)
    assert rd[3].sum() == pytest.approx(cfg.gain[2] * 4.0, rel=1e-9)


@pytest.mark.parametrize("shape", [(8, 6, 7), (16, 12, 15)])
def test_render_rd_matches_brute_force(rng, shape):
    n_r, n_a, n_d = shape
    for _ in range(3):
        cfg = RadarConfig(n_range=n_r, n_azimuth=n_a, n_doppler=n_d, doppler_res=rng.uniform(0.05, 0.3), bin_window=n_d)
        ra = rng.uniform(0, 2, (n_r, n_a))
        dop = render_doppler_map(Vel2(*rng.uniform(-1, 1, 2)), cfg).data
        rd = render_rd(RAImage(ra), DopplerMap(dop), cfg).data
        np.testing.assert_allclose(rd, rd_oracle(ra, dop, cfg), atol=1e-6)


def test_render_rd_window_truncation_bounded_by_tail(rng):
    b = 10
    for _ in range(3):
        cfg = RadarConfig(n_range=16, n_azimuth=12, n_doppler=15, doppler_res=0.1, bin_window=b)
        ra = rng.uniform(0, 2, (16, 12))
        dop = DopplerMap(rng.uniform(-0.8, 0.8, (16, 12)))
        rd = render_rd(RAImage(ra), dop, cfg).data
        exact = rd_oracle(ra, dop.data, cfg)
        # the (b+1)-th nearest bin centre lies at least b/2 bins away
        tail = math.exp(-((b / 2) * cfg.doppler_res) ** 2 / (2 * cfg.kernel_sigma ** 2))
        bound = (ra * cfg.gain[None, :]).sum(axis=1, keepdims=True) * tail
        assert np.all(rd <= exact + 1e-12)
        assert np.all(exact - rd <= bound + 1e-12)


def test_render_rd_shape_mismatch():
    cfg = RadarConfig(n_range=8, n_azimuth=6, n_doppler=7)
    with pytest.raises(DomainError):
        render_rd(RAImage(np.zeros((8, 5))), render_doppler_map(Vel2.zero(), cfg), cfg)


def test_render_rd_row_kernel_matches_full_map(rng):
    cfg = RadarConfig(n_range=10, n_azimuth=8, n_doppler=9, doppler_res=0.2, bin_window=5)
    ra = torch.tensor(rng.uniform(0, 2, (3, 10, 8)), dtype=torch.float64)
    vx = torch.tensor(rng.uniform(-1, 1, 3), dtype=torch.float64)
    vy = torch.tensor(rng.uniform(-1, 1, 3), dtype=torch.float64)
    rows = doppler_row_t(vx, vy, cfg)
    assert rows.shape == (3, 8)
    batched = render_rd_t(ra, rows, cfg)
    for i in range(3):
        full = render_rd_t(ra[i], doppler_map_t(vx[i], vy[i], cfg), cfg)
        np.testing.assert_allclose(batched[i].numpy(), full.numpy(), rtol=1e-12, atol=1e-15)


# gradients

def _views(scene: GaussianScene, poses: List[Pose2], cfg: RadarConfig, brightness: float = 5.0,
           first_previous: Optional[Pose2] = None) -> List[WindowView]:
    views = []
    for i, pose in enumerate(poses):
        ra = render_ra(scene, pose, cfg)
        previous_pose = poses[i - 1] if i > 0 else first_previous
        if previous_pose is not None:
            v = ego_velocity_from_poses(pose, previous_pose, DT)
            rd = render_rd(ra, render_doppler_map(v, cfg), cfg)
        else:
            rd = None
        views.append(WindowView(
            pose=pose,
            measured_ra=RAImage(brightness * ra.data),
            measured_rd=None if rd is None else type(rd)(brightness * rd.data),
            previous=i - 1 if i > 0 else None,
            previous_pose=first_previous if i == 0 else None,
            dt=DT if previous_pose is not None else 0.0,
        ))
    return views


def _loss(scene: GaussianScene, views: List[WindowView], cfg: RadarConfig, spec: LossSpec, w: LossWeights) -> float:
    return WindowProblem(scene, views, cfg, spec, w).evaluate(backward=False)


def _perturbed(views: List[WindowView], rng: np.random.Generator) -> List[WindowView]:
    out = []
    for v in views:
        p = v.pose
        pose = Pose2(p.x + rng.uniform(-0.03, 0.03), p.y + rng.uniform(-0.03, 0.03), p.yaw + rng.uniform(-0.03, 0.03))
        out.append(WindowView(pose, v.measured_ra, v.measured_rd, v.previous, v.previous_pose, v.dt, v.fixed))
    return out


def _with_poses(views: List[WindowView], flat: np.ndarray) -> List[WindowView]:
    poses = flat.reshape(-1, 3)
    return [WindowView(Pose2(*poses[i]), v.measured_ra, v.measured_rd, v.previous, v.previous_pose, v.dt, v.fixed)
            for i, v in enumerate(views)]


def _check_all_gradients(scene, views, cfg, spec, w):
    loss, grads = render_with_grads(scene, views, cfg, spec, w)
    assert loss == pytest.approx(_loss(scene, views, cfg, spec, w), rel=1e-12)

    if spec.grad_poses:
        x0 = np.array([[v.pose.x, v.pose.y, v.pose.yaw] for v in views])
        numeric = central_difference(lambda x: _loss(scene, _with_poses(views, x), cfg, spec, w), x0)
        assert_grad_close(grads.d_pose, numeric)
    else:
        assert grads.d_pose is None

    if spec.grad_gaussians:
        checks = [
            ("means", grads.d_mean, lambda x: scene.replace(means=x)),
            ("orient", grads.d_orient, lambda x: scene.replace(orient=x)),
            ("scales", grads.d_scales, lambda x: scene.replace(scales=x)),
            ("power", grads.d_power, lambda x: scene.replace(power=x)),
        ]
        for name, analytic, build in checks:
            numeric = central_difference(lambda x: _loss(build(x), views, cfg, spec, w), getattr(scene, name))
            assert_grad_close(analytic, numeric)
    else:
        assert grads.d_mean is None

def test_stage_loss_is_gauge_invariant(rng, small_cfg):
    w = LossWeights(lambda_ssim=0.3, lambda_scale=0.1, ssim_window=3, scale_reg=0.9)
    scene = wide_scene(rng, 4)
    views = _perturbed(_views(scene, nearby_poses(rng, 3), small_cfg, first_previous=Pose2(0.04, 0.01, 0.0)), rng)
    for _ in range(5):
        g = Pose2(*rng.uniform(-20, 20, 2), rng.uniform(-math.pi, math.pi))
        moved_scene = scene.replace(means=sensor_to_world(scene.means, g), orient=scene.orient + g.yaw)
        moved = [WindowView(pose_compose(g, v.pose), v.measured_ra, v.measured_rd, v.previous,
                            None if v.previous_pose is None else pose_compose(g, v.previous_pose), v.dt, v.fixed)
                 for v in views]
        for stage in ("pose", "map", "ba"):
            spec = LossSpec(stage, use_rd=True)
            assert _loss(moved_scene, moved, small_cfg, spec, w) == pytest.approx(_loss(scene, views, small_cfg, spec, w), rel=1e-9)



def test_ba_gradients_match_finite_differences(rng, small_cfg, fd_weights):
    for trial in range(20):
        n = int(rng.integers(1, 6))
        k = int(rng.integers(1, 4))
        scene = wide_scene(rng, n)
        first_previous = Pose2(0.05, 0.0, 0.0) if trial % 2 else None
        views = _perturbed(_views(scene, nearby_poses(rng, k), small_cfg, first_previous=first_previous), rng)
        _check_all_gradients(scene, views, small_cfg, LossSpec("ba", use_rd=True), fd_weights)


def test_gradients_with_ssim_term(rng, small_cfg):
    w = LossWeights(lambda_ssim=0.3, lambda_scale=0.1, ssim_window=3, rd_weight=1.0, scale_reg=1.0)
    for _ in range(3):
        scene = wide_scene(rng, 3)
        views = _perturbed(_views(scene, nearby_poses(rng, 2), small_cfg), rng)
        _check_all_gradients(scene, views, small_cfg, LossSpec("ba", use_rd=True), w)


def test_pose_and_map_stage_gradients(rng, small_cfg, fd_weights):
    scene = wide_scene(rng, 3)
    views = _perturbed(_views(scene, nearby_poses(rng, 2), small_cfg), rng)
    _check_all_gradients(scene, views, small_cfg, LossSpec("pose", use_rd=True, grad_gaussians=False), fd_weights)
    _check_all_gradients(scene, views, small_cfg, LossSpec("map", use_rd=False, grad_poses=False), fd_weights)


def test_gradient_vanishes_at_ground_truth(rng, small_cfg):
    w = LossWeights(lambda_ssim=1.0, ssim_window=3)
    scene = wide_scene(rng, 3, scale_range=(0.6, 0.9))
    views = _views(scene, nearby_poses(rng, 3), small_cfg, brightness=1.0)
    loss, grads = render_with_grads(scene, views, small_cfg, LossSpec("ba", use_rd=True), w)
    assert loss == pytest.approx(0.0, abs=1e-12)
    for g in (grads.d_pose, grads.d_mean, grads.d_orient, grads.d_scales, grads.d_power):
        assert g is not None
        assert np.linalg.norm(g) < 1e-8


def test_fixed_pose_has_zero_gradient(rng, small_cfg, fd_weights):
    scene = wide_scene(rng, 2)
    views = _perturbed(_views(scene, nearby_poses(rng, 2), small_cfg), rng)
    views[0] = WindowView(views[0].pose, views[0].measured_ra, None, None, None, 0.0, fixed=True)
    _, grads = render_with_grads(scene, views, small_cfg, LossSpec("ba"), fd_weights)
    assert grads.d_pose is not None
    assert np.all(grads.d_pose[0] == 0.0)
    assert np.any(grads.d_pose[1] != 0.0)


def test_chunked_evaluation_matches_single_graph(rng, small_cfg, monkeypatch):
    import renderer

    w = LossWeights(lambda_ssim=0.3, lambda_scale=0.1, ssim_window=3)
    scene = wide_scene(rng, 4)
    views = _perturbed(_views(scene, nearby_poses(rng, 5), small_cfg, first_previous=Pose2(0.02, 0.0, 0.0)), rng)
    views[0] = WindowView(views[0].pose, views[0].measured_ra, views[0].measured_rd, None, views[0].previous_pose,
                          views[0].dt, fixed=True)
    spec = LossSpec("ba", use_rd=True)
    loss, grads = render_with_grads(scene, views, small_cfg, spec, w)
    monkeypatch.setattr(renderer, "VIEW_CHUNK", 2)
    chunked, chunked_grads = render_with_grads(scene, views, small_cfg, spec, w)
    assert chunked == pytest.approx(loss, rel=1e-12)
    for a, b in [(grads.d_pose, chunked_grads.d_pose), (grads.d_mean, chunked_grads.d_mean),
                 (grads.d_scales, chunked_grads.d_scales), (grads.d_power, chunked_grads.d_power)]:
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)
    assert grads.d_pose is not None
    assert np.all(grads.d_pose[0] == 0.0)


def test_window_problem_rejects_misshapen_measurements(small_cfg):
    view = WindowView(Pose2.identity(), RAImage(np.zeros((small_cfg.n_range + 1, small_cfg.n_azimuth))))
    with pytest.raises(DomainError):
        WindowProblem(GaussianScene.empty(), [view], small_cfg, LossSpec("ba"), LossWeights(ssim_window=3))


def test_non_finite_gradient_names_parameter(rng, small_cfg, fd_weights, monkeypatch):
    import renderer

    def broken_loss(rendered, measured, scale, w):
        return torch.sqrt((rendered - measured).abs().sum(dim=(-2, -1)) * 0.0)

    monkeypatch.setattr(renderer.losses, "image_loss_batch", broken_loss)
    scene = wide_scene(rng, 2)
    views = _perturbed(_views(scene, nearby_poses(rng, 1), small_cfg), rng)
    with pytest.raises(NumericalError) as excinfo:
        render_with_grads(scene, views, small_cfg, LossSpec("pose", grad_gaussians=False), fd_weights)
    assert excinfo.value.parameter is not None
    assert excinfo.value.parameter.startswith("pose[0]")


def test_window_problem_rejects_empty_window(small_cfg):
    with pytest.raises(DomainError):
        WindowProblem(GaussianScene.empty(), [], small_cfg, LossSpec("ba"), LossWeights())
