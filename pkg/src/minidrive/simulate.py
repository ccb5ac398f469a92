"""Closed-loop simulation and the auto-regressive raster rollout harness.

Each replan tick: observation -> policy decision (40x2 ego-frame waypoints)
-> minimum-jerk plan through those waypoints -> execute one replan period on
the bicycle model using the flatness-derived controls.  Agents replay their
logs; collision and off-road events are recorded every frame.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import HorizonError, MinidriveError, PolicyError
from .planner import BoundaryState, PlanningProblem, check_and_enforce_bounds, solve
from .policy import Decision, Observation
from .raster import (
    BevRaster,
    RasterSpec,
    box_corners,
    compose,
    rasterize_dynamic,
    rasterize_static,
    render_ego,
)
from .scenario import TARGET_LEN, Scenario, future_positions_ego_frame
from .vehicle import VehicleControl, VehicleParams, VehicleState, flat_to_state, step_dynamics


@dataclass(frozen=True)
class SimConfig:
    duration: float = 4.0
    replan_period: float = 0.1
    dt_sim: float = 0.1
    bounds: VehicleParams = VehicleParams()
    collision_enabled: bool = True
    offroad_threshold: float = 2.0
    raster_spec: RasterSpec = RasterSpec()
    render_rasters: bool = True
    context_length: int = 60
    bounds_mode: str = "report"  # "report" | "rescale"
    end_velocity: str = "finite_diff"  # "finite_diff" | "zero"

    def __post_init__(self):
        if self.duration <= 0.0:
            raise MinidriveError("duration must be positive")
        ratio = self.replan_period / self.dt_sim
        if abs(ratio - round(ratio)) > 1e-9:
            raise MinidriveError("replan_period must be a multiple of dt_sim")


@dataclass
class FrameRecord:
    t: float
    state: VehicleState
    plan_id: int
    raster: BevRaster | None = None
    events: list = field(default_factory=list)  # "collision" | "offroad" | "infeasible"


@dataclass
class SimTrace:
    scenario_id: str
    frames: list = field(default_factory=list)
    collided: bool = False
    offroad: bool = False
    aborted: bool = False
    diagnostic: str | None = None

    def executed_positions(self) -> np.ndarray:
        return np.array([[f.state.px, f.state.py] for f in self.frames])


def detect_collision(ego_corners: np.ndarray, agent_corner_list) -> bool:
    """Separating-axis overlap of the ego box against any agent box."""
    ego = np.ascontiguousarray(ego_corners, dtype=float)
    for corners in agent_corner_list:
        if kernels.boxes_overlap(ego, np.ascontiguousarray(corners, dtype=float)):
            return True
    return False


def detect_offroad(ego_pos, reference: np.ndarray, threshold: float = 2.0) -> bool:
    """True iff the distance to the reference polyline strictly exceeds threshold."""
    d = kernels.polyline_min_dist(
        float(ego_pos[0]), float(ego_pos[1]), np.ascontiguousarray(reference, dtype=float)
    )
    return d > threshold


def _rotate_to_world(waypoints: np.ndarray, pose: VehicleState) -> np.ndarray:
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    rot = np.array([[c, -s], [s, c]])
    return waypoints @ rot.T + pose.position


def _plan_from_decision(decision: Decision, state: VehicleState, config: SimConfig):
    world = _rotate_to_world(decision.waypoints, state)
    if config.end_velocity == "zero":
        end_vel = np.zeros(2)
    else:
        end_vel = (world[-1] - world[-2]) / 0.1
    problem = PlanningProblem(
        start=BoundaryState(state.position, state.velocity),
        end=BoundaryState(world[-1], end_vel),
        waypoints=world[:-1],
        dt_piece=0.1,
        bounds=config.bounds,
    )
    pt = solve(problem)
    if config.bounds_mode == "rescale" and not pt.feasible:
        pt = check_and_enforce_bounds(pt, config.bounds, mode="rescale")
    return pt


def _render_sim_frame(scn: Scenario, frame: int, state: VehicleState, config: SimConfig):
    spec = config.raster_spec
    env = rasterize_static(scn.static_map, state, spec)
    dyn = rasterize_dynamic(scn.agent_poses(frame), state, spec)
    ego = render_ego(state, config.bounds, spec)
    return compose(compose(env, dyn), ego)


def run_closed_loop(scn: Scenario, policy, config: SimConfig) -> SimTrace:
    """Simulate the policy-planner-execution loop against a logged scenario."""
    n_frames = int(round(config.duration / config.dt_sim)) + 1
    replan_every = int(round(config.replan_period / config.dt_sim))
    reference = np.array([[s.px, s.py] for s in scn.ego_log])
    trace = SimTrace(scenario_id=scn.id)

    state = scn.ego_log[0]
    history: list = []
    plan = None
    plan_elapsed = 0.0
    plan_id = -1
    plan_infeasible = False

    for i in range(n_frames):
        raster = (
            _render_sim_frame(scn, i, state, config) if config.render_rasters else None
        )
        history.append((raster, state))
        if len(history) > config.context_length:
            history.pop(0)

        rec = FrameRecord(t=i * config.dt_sim, state=state, plan_id=plan_id, raster=raster)
        if config.collision_enabled:
            ego_box = box_corners(
                state.px, state.py, state.theta, config.bounds.length, config.bounds.width
            )
            agent_boxes = [
                box_corners(p.px, p.py, p.heading, p.length, p.width)
                for p in scn.agent_poses(i)
            ]
            if detect_collision(ego_box, agent_boxes):
                rec.events.append("collision")
                trace.collided = True
        if detect_offroad(state.position, reference, config.offroad_threshold):
            rec.events.append("offroad")
            trace.offroad = True
        trace.frames.append(rec)
        if i == n_frames - 1:
            break

        if i % replan_every == 0:
            obs = Observation(history=tuple(history), ego=state)
            try:
                decision = policy(obs, i)
                pt = _plan_from_decision(decision, state, config)
            except (PolicyError, HorizonError) as exc:
                trace.aborted = True
                trace.diagnostic = str(exc)
                return trace
            plan = pt.traj
            plan_elapsed = 0.0
            plan_id += 1
            plan_infeasible = not pt.feasible
            if plan_infeasible:
                rec.events.append("infeasible")

        # execute one frame along the plan with midpoint-sampled controls
        t_mid = min(plan_elapsed + 0.5 * config.dt_sim, plan.t_end)
        sig = plan.to_flat_signal(t_mid)
        _, ctrl = flat_to_state(sig, config.bounds, fallback_heading=state.theta)
        a = max(ctrl.a, -state.v / config.dt_sim)  # forward driving only
        state = step_dynamics(
            state, VehicleControl(a, ctrl.phi), config.bounds, config.dt_sim
        )
        plan_elapsed += config.dt_sim

    return trace


# ---------------------------------------------------------------------------
# auto-regressive raster prediction rollout


@dataclass
class RolloutResult:
    predictions: list  # list[BevRaster], steps entries
    ground_truth: list  # list[BevRaster], aligned with predictions
    aborted: bool = False
    diagnostic: str | None = None


def _gt_raster(scn: Scenario, frame: int, anchor: VehicleState, spec: RasterSpec,
               params: VehicleParams) -> BevRaster:
    env = rasterize_static(scn.static_map, anchor, spec)
    dyn = rasterize_dynamic(scn.agent_poses(frame), anchor, spec)
    ego = render_ego(scn.ego_log[frame], params, spec, anchor_pose=anchor)
    return compose(compose(env, dyn), ego)


def run_prediction_rollout(
    scn: Scenario,
    predictor,
    steps: int = 60,
    spec: RasterSpec = RasterSpec(),
    params: VehicleParams = VehicleParams(),
    start_frame: int = 0,
) -> RolloutResult:
    """Seed with the ground-truth first frame and feed predictions back.

    The raster frame is fixed at the rollout start pose so successive frames
    are comparable.  ``predictor(history, decision) -> BevRaster`` receives
    the raster history (ground-truth seed plus its own outputs) and the
    logged decision for the upcoming step.
    """
    if start_frame + steps >= scn.n_frames:
        raise HorizonError(
            f"rollout needs {steps} future frames from frame {start_frame}"
        )
    anchor = scn.ego_log[start_frame]
    seed = _gt_raster(scn, start_frame, anchor, spec, params)
    history = [seed]
    result = RolloutResult(predictions=[], ground_truth=[])
    for k in range(1, steps + 1):
        frame = start_frame + k
        if frame + TARGET_LEN < scn.n_frames:
            decision = future_positions_ego_frame(scn, frame - 1)
        else:
            decision = np.zeros((TARGET_LEN, 2))
        try:
            pred = predictor(list(history), decision)
        except Exception as exc:
            result.aborted = True
            result.diagnostic = f"predictor failed at step {k}: {exc}"
            return result
        if not isinstance(pred, BevRaster) or pred.spec != spec:
            result.aborted = True
            result.diagnostic = f"predictor returned an invalid raster at step {k}"
            return result
        result.predictions.append(pred)
        result.ground_truth.append(_gt_raster(scn, frame, anchor, spec, params))
        history.append(pred)
    return result
