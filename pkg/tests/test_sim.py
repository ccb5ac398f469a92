import numpy as np
import pytest

from minidrive.errors import MinidriveError
from minidrive.policy import ReplayPolicy, constant_velocity_policy
from minidrive.raster import RasterSpec, box_corners
from minidrive.scenario import make_straight_road
from minidrive.simulate import (
    SimConfig,
    detect_collision,
    detect_offroad,
    run_closed_loop,
    run_prediction_rollout,
    _gt_raster,
)
from minidrive.vehicle import VehicleParams, VehicleState

FAST = SimConfig(render_rasters=False)


class TestDetectors:
    def test_collision_unit_squares(self):
        a = box_corners(0, 0, 0, 1, 1)
        assert not detect_collision(a, [box_corners(1.01, 0, 0, 1, 1)])
        assert detect_collision(a, [box_corners(0.99, 0, 0, 1, 1)])
        assert not detect_collision(a, [])

    def test_offroad_threshold_strict(self):
        ref = np.array([[0.0, 0.0], [100.0, 0.0]])
        assert not detect_offroad([50.0, 2.0], ref, threshold=2.0)
        assert detect_offroad([50.0, 2.0001], ref, threshold=2.0)


class TestClosedLoop:
    def test_trace_length(self, straight_scn):
        trace = run_closed_loop(straight_scn, ReplayPolicy(straight_scn), FAST)
        assert len(trace.frames) == 41
        assert trace.frames[0].t == 0.0
        assert trace.frames[-1].t == pytest.approx(4.0)

    def test_replay_fidelity(self, straight_scn):
        trace = run_closed_loop(straight_scn, ReplayPolicy(straight_scn), FAST)
        assert not trace.aborted and not trace.collided and not trace.offroad
        logged = np.array(
            [[s.px, s.py] for s in straight_scn.ego_log[:41]]
        )
        err = np.linalg.norm(trace.executed_positions() - logged, axis=1)
        assert err.max() <= 0.05

    def test_constant_velocity_stays_on_road(self, straight_scn):
        trace = run_closed_loop(straight_scn, constant_velocity_policy, FAST)
        assert not trace.collided and not trace.offroad and not trace.aborted
        # straight road at 5 m/s: ends near x = 20
        end = trace.frames[-1].state
        assert end.px == pytest.approx(20.0, abs=0.1)
        assert abs(end.py) < 0.05

    def test_collision_detected_at_known_frame(self, collision_scn):
        cfg = SimConfig(duration=6.0, render_rasters=False)
        trace = run_closed_loop(collision_scn, ReplayPolicy(collision_scn), cfg)
        assert trace.collided
        hit_frames = [
            i for i, f in enumerate(trace.frames) if "collision" in f.events
        ]
        # parked car 25 m ahead at 5 m/s; boxes first touch near x = 20.5
        assert hit_frames and 38 <= min(hit_frames) <= 46

    def test_offroad_flagged(self):
        scn = make_straight_road(n_frames=300, speed=5.0)

        def veering_policy(obs, frame):
            from minidrive.policy import Decision

            wp = np.zeros((40, 2))
            wp[:, 0] = 0.5 * np.arange(1, 41)
            wp[:, 1] = 0.15 * np.arange(1, 41)  # drift hard left
            return Decision(wp)

        trace = run_closed_loop(scn, veering_policy, FAST)
        assert trace.offroad

    def test_policy_failure_aborts(self, straight_scn):
        from minidrive.errors import PolicyError

        def broken(obs, frame):
            raise PolicyError("boom")

        trace = run_closed_loop(straight_scn, broken, FAST)
        assert trace.aborted and "boom" in trace.diagnostic
        assert len(trace.frames) == 1

    def test_determinism(self, straight_scn):
        a = run_closed_loop(straight_scn, ReplayPolicy(straight_scn), FAST)
        b = run_closed_loop(straight_scn, ReplayPolicy(straight_scn), FAST)
        assert np.array_equal(a.executed_positions(), b.executed_positions())

    def test_rasters_rendered_when_enabled(self, straight_scn):
        cfg = SimConfig(duration=0.5)
        trace = run_closed_loop(straight_scn, ReplayPolicy(straight_scn), cfg)
        assert all(f.raster is not None for f in trace.frames)
        assert trace.frames[0].raster.channels[:, :, 2].max() > 0

    def test_bad_config(self):
        with pytest.raises(MinidriveError):
            SimConfig(duration=-1.0)
        with pytest.raises(MinidriveError):
            SimConfig(replan_period=0.15, dt_sim=0.1)


class TestPredictionRollout:
    def test_identity_predictor(self, straight_scn, params):
        spec = RasterSpec()

        def identity(history, decision):
            return history[-1]

        res = run_prediction_rollout(
            straight_scn, identity, steps=10, spec=spec, params=params
        )
        assert not res.aborted
        assert len(res.predictions) == len(res.ground_truth) == 10
        seed = _gt_raster(straight_scn, 0, straight_scn.ego_log[0], spec, params)
        for pred in res.predictions:
            assert np.array_equal(pred.channels, seed.channels)

    def test_oracle_predictor_matches_gt(self, straight_scn, params):
        spec = RasterSpec()
        anchor = straight_scn.ego_log[0]
        calls = {"n": 0}

        def oracle(history, decision):
            calls["n"] += 1
            return _gt_raster(straight_scn, calls["n"], anchor, spec, params)

        res = run_prediction_rollout(
            straight_scn, oracle, steps=8, spec=spec, params=params
        )
        assert not res.aborted
        for pred, gt in zip(res.predictions, res.ground_truth):
            assert np.array_equal(pred.channels, gt.channels)

    def test_horizon_check(self, straight_scn):
        from minidrive.errors import HorizonError

        with pytest.raises(HorizonError):
            run_prediction_rollout(
                straight_scn, lambda h, d: h[-1], steps=straight_scn.n_frames
            )

    def test_bad_predictor_aborts(self, straight_scn):
        res = run_prediction_rollout(
            straight_scn, lambda h, d: "nope", steps=5
        )
        assert res.aborted and "invalid raster" in res.diagnostic

    def test_failing_predictor_aborts(self, straight_scn):
        def boom(history, decision):
            raise RuntimeError("dead")

        res = run_prediction_rollout(straight_scn, boom, steps=5)
        assert res.aborted and "step 1" in res.diagnostic
