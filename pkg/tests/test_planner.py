import numpy as np
import pytest

from oracles import (
    eval_coeffs,
    hermite_interpolant,
    jerk_quadrature_form,
    penalty_min_jerk,
    random_problem,
)

from minidrive.errors import InvalidInputError
from minidrive.planner import (
    BoundaryState,
    PlanningProblem,
    check_and_enforce_bounds,
    jerk_hessian_block,
    solve,
)
from minidrive.vehicle import VehicleParams

REST_TO_REST = PlanningProblem(
    start=BoundaryState([0, 0], [0, 0]),
    end=BoundaryState([1, 0], [0, 0]),
    waypoints=np.zeros((0, 2)),
    dt_piece=1.0,
    bounds=VehicleParams(),
)


def straight_problem(v_max=2.0, a_max=1.0):
    return PlanningProblem(
        start=BoundaryState([0, 0], [1, 0]),
        end=BoundaryState([4, 0], [1, 0]),
        waypoints=[[1, 0], [2, 0], [3, 0]],
        dt_piece=1.0,
        bounds=VehicleParams(v_max=v_max, a_max=a_max),
    )


class TestSolve:
    def test_uniform_motion_is_zero_jerk(self):
        pt = solve(straight_problem())
        assert pt.jerk_cost == pytest.approx(0.0, abs=1e-12)
        assert pt.feasible
        assert pt.peak_speed == pytest.approx(1.0, abs=1e-9)
        for t in np.linspace(0, 4, 17):
            assert np.allclose(pt.traj.eval(t), [t, 0], atol=1e-8)

    def test_rest_to_rest_classical_quintic(self):
        pt = solve(REST_TO_REST)
        expected = np.array([0, 0, 0, 10, -15, 6], dtype=float)
        assert np.allclose(pt.traj.pieces[0].x, expected, atol=1e-9)
        assert np.allclose(pt.traj.pieces[0].y, np.zeros(6), atol=1e-10)
        assert pt.jerk_cost == pytest.approx(720.0, rel=1e-9)

    def test_rest_to_rest_matches_penalty_oracle(self):
        pt = solve(REST_TO_REST)
        coeffs, cost = penalty_min_jerk(REST_TO_REST)
        assert pt.jerk_cost == pytest.approx(cost, rel=1e-6)
        assert np.allclose(pt.traj.pieces[0].x, coeffs[0, 0], atol=1e-5)

    def test_matches_oracle_on_random_instances(self, rng):
        for _ in range(4):
            p = random_problem(rng)
            pt = solve(p)
            coeffs, cost = penalty_min_jerk(p)
            assert pt.jerk_cost == pytest.approx(cost, rel=1e-5)
            for t in np.linspace(0, p.n_pieces * p.dt_piece, 30):
                assert np.allclose(
                    pt.traj.eval(t), eval_coeffs(coeffs, p.dt_piece, t), atol=1e-4
                )

    def test_nan_input_rejected(self):
        with pytest.raises(InvalidInputError):
            PlanningProblem(
                start=BoundaryState([0, float("nan")], [0, 0]),
                end=BoundaryState([1, 0], [0, 0]),
                waypoints=np.zeros((0, 2)),
            )

    def test_p0_consistency_check(self):
        with pytest.raises(InvalidInputError):
            PlanningProblem(
                start=BoundaryState([0, 0], [0, 0]),
                end=BoundaryState([1, 0], [0, 0]),
                waypoints=np.zeros((0, 2)),
                p0=[0.1, 0.0],
            )


class TestProperties:
    def test_constraint_residuals(self, rng):
        for _ in range(5):
            p = random_problem(rng)
            traj = solve(p).traj
            dt = p.dt_piece
            assert np.allclose(traj.eval(0, 0), p.start.position, atol=1e-8)
            assert np.allclose(traj.eval(0, 1), p.start.velocity, atol=1e-8)
            end_t = p.n_pieces * dt
            assert np.allclose(traj.eval(end_t, 0), p.end.position, atol=1e-8)
            assert np.allclose(traj.eval(end_t, 1), p.end.velocity, atol=1e-8)
            for n in range(1, p.n_pieces):
                assert np.allclose(traj.eval(n * dt, 0), p.waypoints[n - 1], atol=1e-8)
                # continuity across the shared knot
                eps = 1e-9
                for order in (0, 1, 2):
                    left = traj.eval(n * dt - eps, order)
                    right = traj.eval(n * dt, order)
                    assert np.allclose(left, right, atol=1e-6)

    def test_optimality_vs_hermite(self, rng):
        for _ in range(10):
            p = random_problem(rng)
            pt = solve(p)
            for _ in range(3):
                _, cost = hermite_interpolant(p, rng)
                assert pt.jerk_cost <= cost * (1 + 1e-9) + 1e-9

    def test_axis_decoupling(self, rng):
        pts = np.zeros((5, 2))
        pts[:, 0] = np.cumsum(rng.uniform(0.5, 2.0, 5))
        p = PlanningProblem(
            start=BoundaryState([0, 0], [1, 0]),
            end=BoundaryState(pts[-1], [1, 0]),
            waypoints=pts[:-1],
            dt_piece=0.8,
        )
        traj = solve(p).traj
        for piece in traj.pieces:
            assert np.allclose(piece.y, 0.0, atol=1e-10)

    def test_translation_equivariance(self, rng):
        p = random_problem(rng)
        shift = np.array([13.5, -4.2])
        p2 = PlanningProblem(
            start=BoundaryState(p.start.position + shift, p.start.velocity),
            end=BoundaryState(p.end.position + shift, p.end.velocity),
            waypoints=p.waypoints + shift,
            dt_piece=p.dt_piece,
            bounds=p.bounds,
        )
        pt, pt2 = solve(p), solve(p2)
        assert pt2.jerk_cost == pytest.approx(pt.jerk_cost, rel=1e-9, abs=1e-9)
        for t in np.linspace(0, p.n_pieces * p.dt_piece, 15):
            assert np.allclose(pt2.traj.eval(t), pt.traj.eval(t) + shift, atol=1e-6)

    def test_convexity_witness(self, rng):
        from oracles import constraint_system

        for _ in range(5):
            p = random_problem(rng, n_pieces=3)
            pt = solve(p)
            h = np.kron(np.eye(p.n_pieces), jerk_hessian_block(p.dt_piece))
            a, _ = constraint_system(p, 0)
            # random direction in the constraint null space
            _, _, vt = np.linalg.svd(a)
            null = vt[np.linalg.matrix_rank(a) :]
            if null.shape[0] == 0:
                continue
            x = pt.traj._coeffs[:, 0, :].reshape(-1)
            base = x @ h @ x
            for _ in range(3):
                d = null.T @ rng.normal(size=null.shape[0])
                d /= np.linalg.norm(d)
                perturbed = (x + 0.1 * d) @ h @ (x + 0.1 * d)
                assert perturbed > base - 1e-9


class TestBounds:
    def test_report_mode_feasible(self):
        pt = solve(straight_problem(v_max=2.0))
        assert pt.feasible and pt.peak_speed == pytest.approx(1.0, abs=1e-9)

    def test_rescale_halves_speed(self):
        pt = solve(straight_problem(v_max=0.5))
        assert not pt.feasible
        scaled = check_and_enforce_bounds(
            pt, VehicleParams(v_max=0.5, a_max=1.0), mode="rescale"
        )
        assert scaled.feasible
        assert scaled.traj.dt_piece == pytest.approx(2.0)
        assert scaled.peak_speed == pytest.approx(0.5, abs=1e-9)

    def test_time_scaling_preserves_path(self):
        pt = solve(straight_problem(v_max=0.5))
        scaled = check_and_enforce_bounds(
            pt, VehicleParams(v_max=0.5, a_max=1.0), mode="rescale"
        )
        kappa = scaled.traj.dt_piece / pt.traj.dt_piece
        for t in np.linspace(0, 4.0, 9):
            assert np.allclose(scaled.traj.eval(kappa * t), pt.traj.eval(t), atol=1e-9)

    def test_rest_to_rest_accel_flagged(self):
        # sampled peak acceleration of the classical quintic vs dense sampling
        pt = solve(REST_TO_REST)
        ts = np.linspace(0, 1, 10001)
        dense_peak = max(
            np.linalg.norm(pt.traj.eval(t, 2)) for t in ts
        )
        tight = check_and_enforce_bounds(
            pt, VehicleParams(v_max=10.0, a_max=dense_peak * 0.9), mode="report"
        )
        assert not tight.feasible
        assert tight.peak_accel == pytest.approx(dense_peak, rel=1e-2)
