import math
import os

import numpy as np
import pytest

from minidrive.errors import InvalidInputError
from minidrive.raster import (
    BevRaster,
    RasterSpec,
    WorldToRaster,
    box_corners,
    compose,
    from_binary,
    rasterize_dynamic,
    rasterize_static,
    render_ego,
    to_binary,
    to_png,
)
from minidrive.scenario import AgentPose, StaticMap
from minidrive.vehicle import VehicleParams, VehicleState

SPEC = RasterSpec()


class TestTransform:
    def test_round_trip(self, rng):
        for pose in (
            VehicleState(0, 0, 0, 1),
            VehicleState(12.3, -4.5, 2.1, 3),
            VehicleState(-7, 30, -0.4, 0),
        ):
            tf = WorldToRaster.from_pose(pose, SPEC)
            pix = rng.uniform(0, 223, size=(1000, 2))
            world = tf.pixel_to_world(pix)
            back = tf.world_to_pixel(world)
            assert np.allclose(back, pix, atol=1e-9)

    def test_anchor_maps_to_ego(self):
        pose = VehicleState(5, 7, 1.0, 2)
        tf = WorldToRaster.from_pose(pose, SPEC)
        pix = tf.world_to_pixel([[5, 7]])[0]
        assert np.allclose(pix, SPEC.ego_anchor, atol=1e-9)

    def test_forward_is_up(self):
        pose = VehicleState(0, 0, 0.7, 1)
        tf = WorldToRaster.from_pose(pose, SPEC)
        ahead = np.array([math.cos(0.7), math.sin(0.7)]) * 10
        pix = tf.world_to_pixel([ahead])[0]
        # 10 m ahead at 0.5 m/px = 20 px toward smaller rows
        assert pix[0] == pytest.approx(SPEC.ego_anchor[0], abs=1e-9)
        assert pix[1] == pytest.approx(SPEC.ego_anchor[1] - 20, abs=1e-9)

    def test_scale_is_inverse_resolution(self):
        tf = WorldToRaster.from_pose(VehicleState(0, 0, 0.3, 1), SPEC)
        lin = tf.matrix[:, :2]
        assert np.allclose(np.abs(np.linalg.svd(lin, compute_uv=False)), 1 / SPEC.resolution)


class TestStatic:
    def test_empty_map(self):
        out = rasterize_static(StaticMap(), VehicleState(0, 0, 0, 1), SPEC)
        assert out.channels.sum() == 0.0

    def test_straight_lane_vertical_line(self):
        lane = np.array([[-100.0, 0.0], [100.0, 0.0]])
        out = rasterize_static(
            StaticMap(lanes=(lane,)), VehicleState(0, 0, 0, 1), SPEC
        )
        ch = out.channels[:, :, 0]
        col = int(SPEC.ego_anchor[0])
        assert ch[:, col].sum() == SPEC.height  # full vertical line
        assert ch[:, col - 5].sum() == 0
        assert out.channels[:, :, 1:].sum() == 0

    def test_lit_pixel_round_trips(self, rng):
        pose = VehicleState(3, -2, 0.9, 1)
        tf = WorldToRaster.from_pose(pose, SPEC)
        w = np.array([10.0, 5.0])
        out = rasterize_static(
            StaticMap(lanes=(np.array([w, w + 1e-3]),)), pose, SPEC
        )
        lit = np.argwhere(out.channels[:, :, 0] > 0)
        assert len(lit) >= 1
        r, c = lit[0]
        back = tf.pixel_to_world([[c, r]])[0]
        assert np.linalg.norm(back - w) <= 0.5 * SPEC.resolution * math.sqrt(2)

    def test_translation_invariance(self):
        lane = np.array([[5.0, 1.0], [40.0, 8.0]])
        a = rasterize_static(StaticMap(lanes=(lane,)), VehicleState(2, 3, 0.5, 1), SPEC)
        shift = np.array([123.4, -56.7])
        b = rasterize_static(
            StaticMap(lanes=(lane + shift,)),
            VehicleState(2 + shift[0], 3 + shift[1], 0.5, 1),
            SPEC,
        )
        assert np.array_equal(a.channels, b.channels)


class TestDynamic:
    def test_no_agents(self):
        out = rasterize_dynamic([], VehicleState(0, 0, 0, 1), SPEC)
        assert out.channels.sum() == 0

    def test_agent_at_ego_matches_ego_channel(self, params):
        pose = VehicleState(4, 5, 0.8, 2)
        agent = AgentPose("a", "vehicle", 4, 5, 0.8, params.length, params.width)
        dyn = rasterize_dynamic([agent], pose, SPEC)
        ego = render_ego(pose, params, SPEC)
        assert np.array_equal(dyn.channels[:, :, 1], ego.channels[:, :, 2])

    def test_agent_ahead_centroid(self):
        pose = VehicleState(0, 0, 0, 1)
        agent = AgentPose("a", "vehicle", 10, 0, 0, 4.5, 1.8)
        out = rasterize_dynamic([agent], pose, SPEC)
        lit = np.argwhere(out.channels[:, :, 1] > 0)
        centroid = lit.mean(axis=0)  # (row, col)
        assert centroid[1] == pytest.approx(SPEC.ego_anchor[0], abs=1.0)
        assert centroid[0] == pytest.approx(SPEC.ego_anchor[1] - 20, abs=1.0)

    def test_far_agent_skipped(self):
        out = rasterize_dynamic(
            [AgentPose("a", "vehicle", 1e4, 1e4, 0, 4, 2)],
            VehicleState(0, 0, 0, 1),
            SPEC,
        )
        assert out.channels.sum() == 0


class TestEgo:
    def test_centered_at_anchor(self, params):
        out = render_ego(VehicleState(9, -3, 1.2, 1), params, SPEC)
        lit = np.argwhere(out.channels[:, :, 2] > 0)
        centroid = lit.mean(axis=0)
        assert centroid[1] == pytest.approx(SPEC.ego_anchor[0], abs=1.0)
        assert centroid[0] == pytest.approx(SPEC.ego_anchor[1], abs=1.0)

    def test_heading_up_axis_aligned(self, params):
        out = render_ego(VehicleState(0, 0, 1.1, 1), params, SPEC)
        lit = np.argwhere(out.channels[:, :, 2] > 0)
        # axis-aligned vertical box: length along rows, width along cols
        rows = lit[:, 0].max() - lit[:, 0].min() + 1
        cols = lit[:, 1].max() - lit[:, 1].min() + 1
        assert rows > cols

    def test_footprint_area(self, params):
        out = render_ego(VehicleState(0, 0, 0, 1), params, SPEC)
        area_px = out.channels[:, :, 2].sum()
        expected = params.length * params.width / SPEC.resolution**2
        assert abs(area_px - expected) / expected < 0.10


class TestCompose:
    def test_identity(self):
        x = BevRaster(SPEC, np.random.default_rng(0).uniform(0, 1, (224, 224, 3)))
        zero = BevRaster(SPEC)
        assert np.array_equal(compose(x, zero).channels, x.channels)
        assert np.array_equal(compose(zero, x).channels, x.channels)

    def test_saturation(self):
        a, b = BevRaster(SPEC), BevRaster(SPEC)
        a.channels[0, 0, 0] = 0.8
        b.channels[0, 0, 0] = 0.7
        assert compose(a, b).channels[0, 0, 0] == 1.0

    def test_commutative_and_bounded(self, rng):
        a = BevRaster(SPEC, rng.uniform(0, 1, (224, 224, 3)))
        b = BevRaster(SPEC, rng.uniform(0, 1, (224, 224, 3)))
        ab, ba = compose(a, b), compose(b, a)
        assert np.array_equal(ab.channels, ba.channels)
        assert ab.channels.min() >= 0.0 and ab.channels.max() <= 1.0

    def test_idempotent_on_saturated(self):
        a = BevRaster(SPEC, np.ones((224, 224, 3)))
        assert np.array_equal(compose(a, a).channels, a.channels)

    def test_spec_mismatch(self):
        a = BevRaster(SPEC)
        b = BevRaster(RasterSpec(resolution=0.25))
        with pytest.raises(InvalidInputError):
            compose(a, b)


class TestExport:
    def test_binary_round_trip(self, tmp_path, rng):
        r = BevRaster(SPEC, rng.uniform(0, 1, (224, 224, 3)).astype(np.float32))
        path = tmp_path / "frame.bev"
        to_binary(r, path)
        assert os.path.getsize(path) == 16 + 224 * 224 * 3 * 4
        back = from_binary(path)
        assert np.array_equal(back.channels, r.channels)

    def test_png_export(self, tmp_path, params):
        r = render_ego(VehicleState(0, 0, 0, 1), params, SPEC)
        path = tmp_path / "frame.png"
        to_png(r, path)
        from PIL import Image

        img = np.asarray(Image.open(path))
        assert img.shape == (224, 224, 3)
        assert img[:, :, 2].max() == 255  # ego channel is blue
        assert img[:, :, 0].max() == 0


def test_box_corners_geometry():
    corners = box_corners(1, 2, math.pi / 2, 4, 2)
    assert np.allclose(sorted(corners[:, 0]), [0, 0, 2, 2])
    assert np.allclose(sorted(corners[:, 1]), [0, 0, 4, 4])
