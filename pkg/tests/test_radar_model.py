import math

import numpy as np
import pytest

from data import Pose2, RadarConfig, WindowSpec, raised_cosine_gain, wrap_angle
from errors import DomainError
from radar_model import (grid_from_config, polar_to_sensor, pose_between, pose_compose, pose_inverse, received_power,
                         sensor_to_world, world_to_sensor)


def test_grid_centers():
    cfg = RadarConfig(n_range=4, n_azimuth=5, n_doppler=4, range_res=0.5, azimuth_fov=1.0, doppler_res=0.2)
    grid = grid_from_config(cfg)
    np.testing.assert_allclose(grid.range_centers, [0.25, 0.75, 1.25, 1.75])
    np.testing.assert_allclose(grid.azimuth_centers, [-0.5, -0.25, 0.0, 0.25, 0.5])
    np.testing.assert_allclose(grid.doppler_centers, [-0.3, -0.1, 0.1, 0.3])
    assert grid.azimuth_step == pytest.approx(0.25)


def test_received_power():
    cfg = RadarConfig(power_const=16.0)
    assert received_power(2.0, 2.0, cfg) == pytest.approx(2.0)
    assert received_power(0.0, 3.0, cfg) == 0.0
    with pytest.raises(DomainError):
        received_power(1.0, 0.0, cfg)
    with pytest.raises(DomainError):
        received_power(-1.0, 1.0, cfg)


def test_raised_cosine_gain():
    gain = raised_cosine_gain(5, 1.0)
    assert gain[2] == pytest.approx(1.0)
    assert gain[0] == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(gain, gain[::-1])


def test_gain_table_validation():
    with pytest.raises(DomainError):
        RadarConfig(n_azimuth=4, gain_table=np.array([0.5, 1.0, 0.5]))
    with pytest.raises(DomainError):
        RadarConfig(n_azimuth=3, gain_table=np.array([0.5, 0.8, 0.5]))
    cfg = RadarConfig(n_azimuth=3, gain_table=np.array([0.5, 1.0, 0.5]))
    np.testing.assert_allclose(cfg.gain, [0.5, 1.0, 0.5])


def test_wrap_angle():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert Pose2(0, 0, 7.0).yaw == pytest.approx(7.0 - 2 * math.pi)


def test_pose_algebra(rng):
    for _ in range(20):
        a = Pose2(*rng.uniform(-5, 5, 2), rng.uniform(-3, 3))
        b = Pose2(*rng.uniform(-5, 5, 2), rng.uniform(-3, 3))
        ident = pose_compose(a, pose_inverse(a))
        assert (ident.x, ident.y) == pytest.approx((0.0, 0.0), abs=1e-12)
        assert wrap_angle(ident.yaw) == pytest.approx(0.0, abs=1e-12)
        back = pose_compose(a, pose_between(a, b))
        assert (back.x, back.y) == pytest.approx((b.x, b.y), abs=1e-12)
        assert wrap_angle(back.yaw - b.yaw) == pytest.approx(0.0, abs=1e-12)


def test_frame_transforms(rng):
    pose = Pose2(1.0, 2.0, math.pi / 2)
    np.testing.assert_allclose(world_to_sensor([1.0, 3.0], pose), [1.0, 0.0], atol=1e-12)
    points = rng.uniform(-10, 10, (7, 2))
    np.testing.assert_allclose(sensor_to_world(world_to_sensor(points, pose), pose), points, atol=1e-12)
    np.testing.assert_allclose(polar_to_sensor(2.0, math.pi / 2), [0.0, 2.0], atol=1e-12)


def test_pose_rejects_non_finite():
    with pytest.raises(DomainError):
        Pose2(math.nan, 0.0, 0.0)


def test_window_spec_parse_and_label():
    assert WindowSpec.parse("radius:5").r_ba == 5.0
    assert WindowSpec.parse("sliding:3").n_sliding == 3
    assert WindowSpec.parse("sliding:inf").n_sliding is None
    for text in ("radius:2.5", "sliding:7", "sliding:inf"):
        assert WindowSpec.parse(text).label() == text
    for bad in ("ring:3", "radius:abc", "sliding:0", "radius:-1"):
        with pytest.raises(DomainError):
            WindowSpec.parse(bad)


def test_pose_compose_is_associative(rng):
    for _ in range(50):
        a, b, c = (Pose2(*rng.uniform(-10, 10, 2), rng.uniform(-math.pi, math.pi)) for _ in range(3))
        left = pose_compose(pose_compose(a, b), c)
        right = pose_compose(a, pose_compose(b, c))
        assert (left.x, left.y) == pytest.approx((right.x, right.y), abs=1e-9)
        assert wrap_angle(left.yaw - right.yaw) == pytest.approx(0.0, abs=1e-12)
    ident = pose_compose(Pose2.identity(), a)
    assert (ident.x, ident.y, ident.yaw) == pytest.approx((a.x, a.y, a.yaw), abs=1e-12)
