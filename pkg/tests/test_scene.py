import math

import numpy as np
import pytest

from data import Gaussian2D, GaussianScene, Pose2, RAImage, RadarConfig, SceneParams
from errors import DomainError, SceneFormatError
from radar_model import grid_from_config, polar_to_sensor, sensor_to_world, world_to_sensor
from renderer import render_ra
from scene import covariance, densify, init_from_frame, load_scene, local_maxima, prune, save_scene

CFG = RadarConfig(n_range=16, n_azimuth=12, n_doppler=8, range_res=0.25, power_const=100.0)


def test_covariance():
    cov = covariance(Gaussian2D((0.0, 0.0), math.pi / 2, (2.0, 1.0), 1.0))
    np.testing.assert_allclose(cov, np.diag([1.0, 4.0]), atol=1e-12)
    assert np.all(np.linalg.eigvalsh(covariance(Gaussian2D((0.0, 0.0), 0.3, (0.2, 0.1), 1.0))) > 0)


def test_scene_rejects_invalid_parameters():
    with pytest.raises(DomainError):
        Gaussian2D((0.0, 0.0), 0.0, (0.0, 1.0), 1.0)
    with pytest.raises(DomainError):
        GaussianScene(np.zeros((1, 2)), np.zeros(1), np.ones((1, 2)), -np.ones(1))
    with pytest.raises(DomainError):
        GaussianScene(np.zeros((3, 2)), np.zeros(3), np.ones((3, 2)), np.ones(3), max_gaussians=2)


def test_local_maxima_plateau_and_threshold():
    image = np.zeros((6, 6))
    image[2, 3] = image[2, 4] = 1.0
    image[4, 1] = 0.4
    assert local_maxima(image, 0.5) == [(2, 3)]
    assert sorted(local_maxima(image, 0.1)) == [(2, 3), (4, 1)]


def test_init_from_frame_inverts_radar_equation():
    image = np.zeros((16, 12))
    image[5, 6] = 3.0
    image[9, 2] = 0.5
    pose = Pose2(1.0, -2.0, 0.3)
    scene = init_from_frame(RAImage(image), pose, CFG, tau_init=1.0)
    assert len(scene) == 1

    grid = grid_from_config(CFG)
    r, a = grid.range_centers[5], grid.azimuth_centers[6]
    np.testing.assert_allclose(scene.means[0], sensor_to_world(polar_to_sensor(r, a), pose), atol=1e-12)
    assert scene.power[0] == pytest.approx(3.0 * r ** 4 / CFG.power_const)
    assert scene.orient[0] == pytest.approx(pose.yaw + a)
    np.testing.assert_allclose(scene.scales[0], [CFG.range_res, r * grid.azimuth_step])


def test_init_from_frame_respects_budget_and_scale_limits():
    image = np.zeros((16, 12))
    for r, a in ((2, 2), (6, 6), (10, 3), (13, 9)):
        image[r, a] = 1.0 + r
    params = SceneParams(s_min=0.3, s_max=0.4, max_gaussians=2)
    scene = init_from_frame(RAImage(image), Pose2.identity(), CFG, tau_init=0.5, params=params)
    assert len(scene) == 2
    assert scene.max_gaussians == 2
    assert np.all((scene.scales >= 0.3) & (scene.scales <= 0.4))
    # strongest peaks first
    grid = grid_from_config(CFG)
    ranges = np.hypot(scene.means[:, 0], scene.means[:, 1])
    np.testing.assert_allclose(sorted(ranges), [grid.range_centers[10], grid.range_centers[13]])


def test_init_from_frame_finds_rendered_targets():
    cfg = RadarConfig(n_range=48, n_azimuth=32, n_doppler=8, range_res=0.2, azimuth_fov=1.2, power_const=100.0)
    pose = Pose2(0.5, -0.2, 0.3)
    targets = [(3.0, -0.3), (5.5, 0.1), (7.0, 0.4)]
    world = sensor_to_world(polar_to_sensor(np.array([t[0] for t in targets]), np.array([t[1] for t in targets])), pose)
    image = render_ra(GaussianScene(world, np.zeros(3), np.full((3, 2), 0.1), np.ones(3)), pose, cfg)
    scene = init_from_frame(image, pose, cfg, tau_init=1e-3 * image.data.max())
    assert len(scene) >= len(targets)
    grid = grid_from_config(cfg)
    local = world_to_sensor(scene.means, pose)
    ranges = np.hypot(local[:, 0], local[:, 1])
    bearings = np.arctan2(local[:, 1], local[:, 0])
    for r, phi in targets:
        close = (np.abs(ranges - r) <= 2 * cfg.range_res) & (np.abs(bearings - phi) <= 2 * abs(grid.azimuth_step))
        assert close.any(), (r, phi)


def test_init_from_frame_empty_image():
    assert len(init_from_frame(RAImage(np.zeros((16, 12))), Pose2.identity(), CFG, tau_init=0.1)) == 0


def test_densify_spawns_at_every_residual_bin_within_budget():
    base = GaussianScene(np.array([[1.0, 0.0]]), np.zeros(1), np.full((1, 2), 0.2), np.ones(1), max_gaussians=3)
    measured = np.zeros((16, 12))
    measured[4, 5] = 2.0
    measured[4, 6] = 1.5    # next to a stronger bin, not a local maximum
    measured[8, 8] = 5.0
    measured[12, 2] = 1.0
    rendered = np.zeros((16, 12))
    rendered[8, 8] = 4.9
    out = densify(base, RAImage(measured), RAImage(rendered), Pose2.identity(), CFG, tau_d=0.5)
    assert len(out) == 3
    np.testing.assert_allclose(out.means[0], base.means[0])
    grid = grid_from_config(CFG)
    expected = sensor_to_world(polar_to_sensor(grid.range_centers[[4, 4]], grid.azimuth_centers[[5, 6]]), Pose2.identity())
    np.testing.assert_allclose(out.means[1:], expected, atol=1e-12)
    np.testing.assert_allclose(out.power[1:], np.array([2.0, 1.5]) * grid.range_centers[4] ** 4 / CFG.power_const)

    full = densify(out, RAImage(measured), RAImage(rendered), Pose2.identity(), CFG, tau_d=0.5)
    assert full is out

    roomy_base = GaussianScene(base.means, base.orient, base.scales, base.power, max_gaussians=10)
    roomy = densify(roomy_base, RAImage(measured), RAImage(rendered), Pose2.identity(), CFG, tau_d=0.5)
    assert len(roomy) == 4
    assert np.hypot(*roomy.means[-1]) == pytest.approx(grid.range_centers[12])


def test_densify_shape_mismatch():
    with pytest.raises(DomainError):
        densify(GaussianScene.empty(), RAImage(np.zeros((16, 12))), RAImage(np.zeros((16, 11))), Pose2.identity(), CFG, 0.1)


def test_prune_by_power_and_bounds():
    scene = GaussianScene(
        np.array([[0.0, 0.0], [1.0, 1.0], [50.0, 0.0]]), np.zeros(3), np.full((3, 2), 0.1), np.array([1.0, 1e-6, 1.0]),
        bounds=(-10.0, -10.0, 10.0, 10.0),
    )
    pruned = prune(scene, tau_p=1e-4)
    assert len(pruned) == 1
    np.testing.assert_allclose(pruned.means[0], [0.0, 0.0])


def test_scene_file_round_trip(tmp_path, rng):
    scene = GaussianScene(rng.uniform(-5, 5, (4, 2)), rng.uniform(-3, 3, 4), rng.uniform(0.1, 1, (4, 2)),
                          rng.uniform(0, 2, 4), bounds=(-6.0, -6.0, 6.0, 6.0))
    path = tmp_path / "scene.txt"
    save_scene(scene, str(path))
    loaded = load_scene(str(path))
    assert loaded.bounds == scene.bounds
    for name in ("means", "orient", "scales", "power"):
        np.testing.assert_array_equal(getattr(loaded, name), getattr(scene, name))

    save_scene(GaussianScene.empty(), str(path))
    assert len(load_scene(str(path))) == 0


@pytest.mark.parametrize("text, line", [
    ("", 1),
    ("2,-1,-1,1,1\n0,0,0,1,1,1\n", 2),
    ("1,-1,-1,1,1\n0,0,0,0,1,1\n", 2),
    ("1,-1,-1,1,1\n0,0,0,1,1,-1\n", 2),
    ("1,-1,-1,1,1\n5,0,0,1,1,1\n", 2),
    ("1,-1,-1,1,1\n0,x,0,1,1,1\n", 2),
    ("1,-1,-1,1,1\n0,0,1,1,1\n", 2),
    ("1,1,-1,-1,1\n0,0,0,1,1,1\n", 1),
])
def test_load_scene_errors(tmp_path, text, line):
    path = tmp_path / "scene.txt"
    path.write_text(text)
    with pytest.raises(SceneFormatError) as excinfo:
        load_scene(str(path))
    assert excinfo.value.line == line


def test_load_scene_budget(tmp_path):
    path = tmp_path / "scene.txt"
    path.write_text("2,-1,-1,1,1\n0,0,0,1,1,1\n0.5,0,0,1,1,1\n")
    with pytest.raises(SceneFormatError):
        load_scene(str(path), max_gaussians=1)
