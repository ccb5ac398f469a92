"""Minimum-jerk planning over piecewise quintics.

The planner minimizes the integral of squared jerk subject to boundary
position/velocity, interior waypoint positions at the knots, and C0/C1/C2
continuity between pieces.  The objective and constraints decouple per axis,
so each axis is an equality-constrained QP solved by a direct dense KKT
factorization.  Speed/acceleration limits are not part of the QP; they are
checked by sampling and optionally enforced by uniform time dilation.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SolverError
from .trajectory import PiecewiseQuintic
from .vehicle import VehicleParams

#: Sampling density for the feasibility check: samples per piece.
_CHECK_SAMPLES_PER_PIECE = 10

#: Slack on the feasibility comparison against v_max / a_max.
_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class BoundaryState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        for name in ("position", "velocity"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (2,) or not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"boundary {name} must be a finite 2-vector")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class PlanningProblem:
    start: BoundaryState
    end: BoundaryState
    waypoints: np.ndarray  # (M-1, 2) interior knot positions, may be empty
    dt_piece: float = 0.1
    bounds: VehicleParams = VehicleParams()
    p0: np.ndarray | None = None  # optional redundant first knot, must match start
    # Pin boundary accelerations to zero (default).  With free endpoint
    # accelerations the optimum trades boundary acceleration against interior
    # jerk; pinning keeps plans restartable and makes the classical
    # rest-to-rest quintic the single-segment solution.
    free_endpoint_accel: bool = False

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        if wp.size and not np.all(np.isfinite(wp)):
            raise InvalidInputError("waypoints must be finite")
        object.__setattr__(self, "waypoints", wp)
        if not (math.isfinite(self.dt_piece) and self.dt_piece > 0.0):
            raise InvalidInputError(f"dt_piece must be positive, got {self.dt_piece}")
        if self.p0 is not None:
            p0 = np.asarray(self.p0, dtype=float)
            if np.linalg.norm(p0 - self.start.position) > 1e-6:
                raise InvalidInputError(
                    "first knot position disagrees with the start boundary state"
                )
            object.__setattr__(self, "p0", p0)

    @property
    def n_pieces(self) -> int:
        return self.waypoints.shape[0] + 1


@dataclass(frozen=True)
class PlannedTrajectory:
    traj: PiecewiseQuintic
    jerk_cost: float
    feasible: bool
    peak_speed: float
    peak_accel: float


def jerk_hessian_block(dt: float) -> np.ndarray:
    """6x6 integral-of-squared-jerk quadratic form for one piece on [0, dt]."""
    h = np.zeros((6, 6))
    for i in range(3, 6):
        for j in range(3, 6):
            ci = math.factorial(i) // math.factorial(i - 3)
            cj = math.factorial(j) // math.factorial(j - 3)
            h[i, j] = ci * cj * dt ** (i + j - 5) / (i + j - 5)
    return h


def _basis(tau: float, order: int) -> np.ndarray:
    """Row of the order-th derivative of the monomial basis at local time tau."""
    row = np.zeros(6)
    for k in range(order, 6):
        row[k] = math.factorial(k) // math.factorial(k - order) * tau ** (k - order)
    return row


def _constraints(problem: PlanningProblem):
    """Equality constraints A c = b per axis; returns (A, b_x, b_y)."""
    m = problem.n_pieces
    dt = problem.dt_piece
    n_var = 6 * m
    rows, bx, by = [], [], []

    def add(piece, tau, order, val_x, val_y):
        row = np.zeros(n_var)
        row[6 * piece : 6 * piece + 6] = _basis(tau, order)
        rows.append(row)
        bx.append(val_x)
        by.append(val_y)

    add(0, 0.0, 0, *problem.start.position)
    add(0, 0.0, 1, *problem.start.velocity)
    add(m - 1, dt, 0, *problem.end.position)
    add(m - 1, dt, 1, *problem.end.velocity)
    if not problem.free_endpoint_accel:
        add(0, 0.0, 2, 0.0, 0.0)
        add(m - 1, dt, 2, 0.0, 0.0)
    for n in range(1, m):
        add(n, 0.0, 0, *problem.waypoints[n - 1])
    for n in range(m - 1):
        for s in range(3):
            row = np.zeros(n_var)
            row[6 * n : 6 * n + 6] = _basis(dt, s)
            row[6 * (n + 1) : 6 * (n + 1) + 6] = -_basis(0.0, s)
            rows.append(row)
            bx.append(0.0)
            by.append(0.0)
    return np.array(rows), np.array(bx), np.array(by)


def solve(problem: PlanningProblem) -> PlannedTrajectory:
    """Solve the minimum-jerk problem exactly via the per-axis KKT system."""
    m = problem.n_pieces
    dt = problem.dt_piece
    n_var = 6 * m
    h_block = jerk_hessian_block(dt)
    h_full = np.kron(np.eye(m), h_block)

    a_mat, bx, by = _constraints(problem)
    n_con = a_mat.shape[0]
    kkt = np.zeros((n_var + n_con, n_var + n_con))
    kkt[:n_var, :n_var] = 2.0 * h_full
    kkt[:n_var, n_var:] = a_mat.T
    kkt[n_var:, :n_var] = a_mat

    coeffs = np.zeros((m, 2, 6))
    jerk_cost = 0.0
    for ax, b in enumerate((bx, by)):
        rhs = np.concatenate([np.zeros(n_var), b])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular KKT system (M={m}): {exc}") from exc
        x = sol[:n_var]
        coeffs[:, ax, :] = x.reshape(m, 6)
        jerk_cost += float(x @ h_full @ x)

    traj = PiecewiseQuintic.from_coeff_array(coeffs, dt)
    pt = PlannedTrajectory(traj, max(jerk_cost, 0.0), False, 0.0, 0.0)
    return check_and_enforce_bounds(pt, problem.bounds, mode="report")


def _peaks(traj: PiecewiseQuintic):
    dt_check = traj.dt_piece / _CHECK_SAMPLES_PER_PIECE
    samples = traj.sample(dt_check)
    speeds = np.array([np.linalg.norm(v) for _, _, v, _ in samples])
    accels = np.array([np.linalg.norm(a) for _, _, _, a in samples])
    return float(speeds.max()), float(accels.max())


def check_and_enforce_bounds(
    pt: PlannedTrajectory, bounds: VehicleParams, mode: str = "report"
) -> PlannedTrajectory:
    """Sample speed/acceleration peaks and annotate or repair feasibility.

    In ``rescale`` mode an infeasible trajectory is slowed down uniformly:
    dt_piece grows by the smallest factor kappa >= 1 that brings both peaks
    within bounds (speeds scale by 1/kappa, accelerations by 1/kappa^2).
    """
    if mode not in ("report", "rescale"):
        raise InvalidInputError(f"unknown bounds mode {mode!r}")
    peak_speed, peak_accel = _peaks(pt.traj)
    feasible = (
        peak_speed <= bounds.v_max + _FEAS_TOL
        and peak_accel <= bounds.a_max + _FEAS_TOL
    )
    if mode == "report" or feasible:
        return PlannedTrajectory(pt.traj, pt.jerk_cost, feasible, peak_speed, peak_accel)

    kappa = max(1.0, peak_speed / bounds.v_max, math.sqrt(peak_accel / bounds.a_max))
    coeffs = pt.traj._coeffs / (kappa ** np.arange(6))
    slowed = PiecewiseQuintic.from_coeff_array(
        coeffs, pt.traj.dt_piece * kappa, pt.traj.t0
    )
    # jerk scales by 1/kappa^3, so the cost integral scales by 1/kappa^5
    cost = pt.jerk_cost / kappa**5
    peak_speed, peak_accel = _peaks(slowed)
    feasible = (
        peak_speed <= bounds.v_max + _FEAS_TOL
        and peak_accel <= bounds.a_max + _FEAS_TOL
    )
    return PlannedTrajectory(slowed, cost, feasible, peak_speed, peak_accel)
