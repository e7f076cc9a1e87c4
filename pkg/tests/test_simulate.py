import math

import numpy as np
import pytest

from conftest import tiny_settings
from data import GyroSample, Pose2, wrap_angle
from errors import DomainError
from frontend import dead_reckon, ego_velocity_lsq
from renderer import render_ra
from simulate import (LOOP_SHAPES, apply_speckle, centerline, make_loop_scene, make_scenario, make_trajectory,
                      scene_bounds, synthesize_frame, true_velocity, true_yaw_rate)

NOISELESS = dict(NOISE_SPECKLE="0", NOISE_FLOOR_STD="0", NOISE_DOPPLER_STD="0", NOISE_GYRO_STD="0",
                 NOISE_GYRO_BIAS="0", NOISE_VEL_STD="0", NOISE_SCENE_JITTER="0")


@pytest.mark.parametrize("kind", ["small-loop", "large-loop"])
def test_loop_centerline_closes(kind):
    path = centerline(kind)
    width, height, radius = LOOP_SHAPES[kind]
    assert path.length == pytest.approx(2 * (width + height) - 8 * radius + 2 * math.pi * radius)
    end = path.pose_at(path.length)
    assert (end.x, end.y) == pytest.approx((path.start.x, path.start.y), abs=1e-9)
    assert wrap_angle(end.yaw - path.start.yaw) == pytest.approx(0.0, abs=1e-9)


def test_trajectory_samples_are_equally_spaced():
    speed, rate = 1.0, 10.0
    step = speed / rate
    traj = make_trajectory("small-loop", speed, rate, seed=0)
    path = centerline("small-loop")
    assert len(traj) == int(math.floor(path.length / step + 1e-9)) + 1
    for a, b in zip(traj, traj[1:]):
        assert b.timestamp - a.timestamp == pytest.approx(1.0 / rate)
        chord = math.hypot(b.pose.x - a.pose.x, b.pose.y - a.pose.y)
        assert chord <= step + 1e-9
        if abs(wrap_angle(b.pose.yaw - a.pose.yaw)) < 1e-12:
            assert chord == pytest.approx(step, abs=1e-9)
        else:
            # no piece bends tighter than the corner radius
            assert chord >= 2 * 2.0 * math.sin(step / (2 * 2.0)) - 1e-9
    gap = math.hypot(traj[-1].pose.x - traj[0].pose.x, traj[-1].pose.y - traj[0].pose.y)
    assert gap < step


def test_room_scan_is_open():
    path = centerline("room")
    end = path.pose_at(path.length)
    assert math.hypot(end.x - path.start.x, end.y - path.start.y) > 1.0


def test_odd_seeds_mirror_the_trajectory():
    even = make_trajectory("small-loop", 1.0, 10.0, seed=2)
    odd = make_trajectory("small-loop", 1.0, 10.0, seed=3)
    assert len(even) == len(odd)
    for e, o in zip(even, odd):
        assert (o.pose.x, o.pose.y) == pytest.approx((e.pose.x, -e.pose.y), abs=1e-12)
        assert wrap_angle(o.pose.yaw + e.pose.yaw) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("kind", ["room", "small-loop", "large-loop"])
def test_scene_and_trajectory_inside_bounds(kind):
    scene = make_loop_scene(kind, seed=5)
    assert scene.bounds == scene_bounds(kind)
    assert np.all(scene.inside_bounds())
    assert np.all(scene.scales > 0) and np.all(scene.power > 0)
    x_min, y_min, x_max, y_max = scene.bounds
    for p in make_trajectory(kind, 1.0, 10.0, seed=5):
        assert x_min < p.pose.x < x_max and y_min < p.pose.y < y_max


def test_scene_is_seed_deterministic():
    a, b = make_loop_scene("small-loop", 7), make_loop_scene("small-loop", 7)
    np.testing.assert_array_equal(a.means, b.means)
    np.testing.assert_array_equal(a.power, b.power)
    assert not np.array_equal(a.means, make_loop_scene("small-loop", 8).means)


def test_unknown_kind():
    with pytest.raises(DomainError):
        centerline("spiral")
    with pytest.raises(DomainError):
        make_loop_scene("spiral", 0)


def test_noiseless_frames_match_forward_model():
    scenario = make_scenario(tiny_settings(**NOISELESS))
    assert scenario.scene_for_measurements is scenario.gt_scene
    for k in (0, 4, 9):
        frame = synthesize_frame(scenario, k)
        expected = render_ra(scenario.gt_scene, scenario.gt_trajectory[k].pose, scenario.radar)
        np.testing.assert_array_equal(frame.ra.data, expected.data)
        assert frame.gyro.omega == true_yaw_rate(scenario, k)
        v, rms = ego_velocity_lsq(frame.points)
        truth = true_velocity(scenario, k)
        assert (v.vx, v.vy) == pytest.approx((truth.vx, truth.vy), abs=1e-9)
        assert rms == pytest.approx(0.0, abs=1e-9)


def test_frames_are_deterministic():
    scenario = make_scenario(tiny_settings())
    a, b = synthesize_frame(scenario, 3), synthesize_frame(scenario, 3)
    np.testing.assert_array_equal(a.ra.data, b.ra.data)
    assert a.rd is not None and b.rd is not None
    np.testing.assert_array_equal(a.rd.data, b.rd.data)
    assert a.points == b.points
    assert a.gyro == b.gyro
    with pytest.raises(DomainError):
        synthesize_frame(scenario, len(scenario))


def test_speckle_statistics():
    rng = np.random.default_rng(99)
    clean = np.ones((300, 300))
    noisy = apply_speckle(clean, 0.5, 0.0, rng)
    assert noisy.mean() == pytest.approx(1.0, rel=0.02)
    assert noisy.std() == pytest.approx(0.5, rel=0.02)
    assert np.all(noisy >= 0.5 - 1e-12)
    assert np.all(apply_speckle(clean, 0.0, 0.0, rng) == clean)


def test_dead_reckoning_on_true_motion_is_second_order():
    scenario = make_scenario(tiny_settings(**NOISELESS, SIM_MAX_FRAMES="0"))
    traj = scenario.gt_trajectory
    step = scenario.speed / scenario.frame_rate
    r_min = LOOP_SHAPES["small-loop"][2]
    for k in range(1, len(traj)):
        dt = traj[k].timestamp - traj[k - 1].timestamp
        predicted = dead_reckon(traj[k - 1].pose, true_velocity(scenario, k),
                                GyroSample(true_yaw_rate(scenario, k), traj[k].timestamp), dt)
        error = math.hypot(predicted.x - traj[k].pose.x, predicted.y - traj[k].pose.y)
        assert error <= 1.01 * step ** 2 / r_min + 1e-12
        assert wrap_angle(predicted.yaw - traj[k].pose.yaw) == pytest.approx(0.0, abs=1e-9)


def test_first_frame_velocity_is_nominal():
    scenario = make_scenario(tiny_settings(**NOISELESS))
    v = true_velocity(scenario, 0)
    assert (v.vx, v.vy) == (scenario.speed, 0.0)
    assert scenario.gt_trajectory[0].pose == Pose2(0.0, -LOOP_SHAPES["small-loop"][1] / 2.0, 0.0)
