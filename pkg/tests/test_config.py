"""Configuration dataclasses: defaults, validation, derived properties."""

import dataclasses
import math

import pytest

from saasim.config import ConfigError, FoamParams, SensorParams, SimConfig, VisionParams


class TestSensorParams:
    def test_defaults(self):
        p = SensorParams()
        assert p.lidar_beams == 360
        assert p.lidar_range == 40.0
        assert p.lidar_rate == 10.0
        assert p.camera_hfov == pytest.approx(math.pi / 2)
        assert p.camera_rate == 30.0
        assert (p.image_width, p.image_height) == (640, 480)

    def test_focal_length_at_default_fov(self):
        assert SensorParams().focal_px == pytest.approx(320.0)

    def test_focal_length_narrow_fov(self):
        p = SensorParams(camera_hfov=math.pi / 3)
        assert p.focal_px == pytest.approx(320.0 / math.tan(math.pi / 6))

    @pytest.mark.parametrize("kwargs, match", [
        ({"lidar_beams": 0}, "lidar_beams"),
        ({"lidar_range": 0.0}, "lidar_range"),
        ({"lidar_rate": -1.0}, "lidar_rate"),
        ({"camera_hfov": 0.0}, "camera_hfov"),
        ({"camera_hfov": math.pi}, "camera_hfov"),
        ({"camera_rate": 0.0}, "camera_rate"),
        ({"image_width": 31}, "image dimensions"),
        ({"image_height": 16}, "image dimensions"),
    ])
    def test_validation(self, kwargs, match):
        with pytest.raises(ConfigError, match=match):
            SensorParams(**kwargs)

    def test_frozen(self):
        with pytest.raises(dataclasses.FrozenInstanceError):
            SensorParams().lidar_beams = 10


class TestFoamParams:
    def test_defaults(self):
        p = FoamParams()
        assert p.sectors == 9
        assert p.camera_weight == p.lidar_weight == 0.5
        assert p.epsilon == 1e-6
        assert p.max_depth == 10.0
        assert p.yaw_step == pytest.approx(math.radians(10.0))
        assert p.free_threshold == 0.05

    @pytest.mark.parametrize("sectors, median", [(3, 2), (5, 3), (9, 5), (15, 8)])
    def test_median_sector(self, sectors, median):
        assert FoamParams(sectors=sectors).median_sector == median

    @pytest.mark.parametrize("kwargs, match", [
        ({"sectors": 1}, ">= 3"),
        ({"sectors": 8}, "odd"),
        ({"camera_weight": 0.6}, "sum to 1"),
        ({"camera_weight": -0.2, "lidar_weight": 1.2}, "nonnegative"),
        ({"epsilon": 0.0}, "epsilon"),
        ({"max_depth": 0.0}, "max_depth"),
        ({"yaw_step": 0.0}, "yaw_step"),
        ({"free_threshold": 1.5}, "free_threshold"),
    ])
    def test_validation(self, kwargs, match):
        with pytest.raises(ConfigError, match=match):
            FoamParams(**kwargs)

    def test_uneven_weights_accepted_when_they_sum_to_one(self):
        p = FoamParams(camera_weight=0.3, lidar_weight=0.7)
        assert p.camera_weight + p.lidar_weight == pytest.approx(1.0)


class TestVisionParams:
    def test_defaults(self):
        p = VisionParams()
        assert p.pyramid_levels == 3
        assert p.lk_window == 15
        assert p.lk_max_iterations == 20
        assert p.lk_epsilon == 0.01
        assert p.quality_level == 0.01
        assert p.max_corners == 400
        assert p.min_corner_distance == 8.0

    @pytest.mark.parametrize("kwargs, match", [
        ({"pyramid_levels": 0}, "pyramid_levels"),
        ({"lk_window": 14}, "odd"),
        ({"lk_window": 1}, "odd"),
        ({"lk_max_iterations": 0}, "lk_max_iterations"),
        ({"lk_epsilon": 0.0}, "lk_epsilon"),
        ({"quality_level": 0.0}, "quality_level"),
        ({"quality_level": 1.1}, "quality_level"),
        ({"max_corners": 0}, "max_corners"),
        ({"min_corner_distance": 0.5}, "min_corner_distance"),
    ])
    def test_validation(self, kwargs, match):
        with pytest.raises(ConfigError, match=match):
            VisionParams(**kwargs)

    def test_full_quality_accepted(self):
        assert VisionParams(quality_level=1.0).quality_level == 1.0


class TestSimConfig:
    def test_defaults(self):
        c = SimConfig()
        assert c.dt is None
        assert c.yaw_rate_limit == pytest.approx(math.radians(90.0))
        assert c.goal_tolerance == 1.0

    def test_step_defaults_to_camera_period(self):
        assert SimConfig().step_seconds(SensorParams()) == pytest.approx(1.0 / 30.0)
        fast = SensorParams(camera_rate=60.0)
        assert SimConfig().step_seconds(fast) == pytest.approx(1.0 / 60.0)

    def test_explicit_step_wins(self):
        assert SimConfig(dt=0.05).step_seconds(SensorParams()) == 0.05

    @pytest.mark.parametrize("kwargs, match", [
        ({"dt": 0.0}, "dt"),
        ({"dt": -0.1}, "dt"),
        ({"yaw_rate_limit": 0.0}, "yaw_rate_limit"),
        ({"goal_tolerance": 0.0}, "goal_tolerance"),
    ])
    def test_validation(self, kwargs, match):
        with pytest.raises(ConfigError, match=match):
            SimConfig(**kwargs)


def test_config_error_is_a_value_error():
    assert issubclass(ConfigError, ValueError)
