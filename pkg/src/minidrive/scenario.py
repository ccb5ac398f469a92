"""Scenario data model, JSONL serialization, extraction, and synthetic fixtures.

A scenario file is JSON Lines: line 1 is a header object

    {"schema_version": 1, "id": ..., "dt": 0.1,
     "map": {"lanes": [...], "drivable_areas": [...], "intersections": [...]},
     "lights": [...]}                     # optional per-frame light states

and every following line is one frame

    {"ego": {"px", "py", "theta", "v"},
     "agents": [{"id", "kind", "px", "py", "heading", "length", "width"}]}

The frame clock is 0.1 s.  Agents may be absent from individual frames.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ScenarioParseError
from .vehicle import VehicleState, wrap_angle

SCHEMA_VERSION = 1
FRAME_DT = 0.1

#: Scenarios shorter than this many frames are dropped by extraction.
MIN_FRAMES = 240

#: Length of the future-position target, frames (4 s at 0.1 s).
TARGET_LEN = 40


@dataclass(frozen=True)
class StaticMap:
    lanes: tuple = ()
    drivable_areas: tuple = ()
    intersections: tuple = ()

    def __post_init__(self):
        for name in ("lanes", "drivable_areas", "intersections"):
            arrs = tuple(
                np.asarray(p, dtype=float).reshape(-1, 2) for p in getattr(self, name)
            )
            object.__setattr__(self, name, arrs)


@dataclass(frozen=True)
class AgentPose:
    id: str
    kind: str
    px: float
    py: float
    heading: float
    length: float
    width: float


@dataclass
class AgentTrack:
    id: str
    kind: str  # "vehicle" | "pedestrian"
    extent: tuple  # (length, width)
    poses: dict = field(default_factory=dict)  # frame -> (px, py, heading)

    def pose_at(self, frame: int) -> AgentPose | None:
        p = self.poses.get(frame)
        if p is None:
            return None
        return AgentPose(self.id, self.kind, p[0], p[1], p[2], *self.extent)


@dataclass
class Scenario:
    id: str
    ego_log: list  # list[VehicleState], one per frame
    agents: list = field(default_factory=list)
    static_map: StaticMap = StaticMap()
    traffic_lights: list = field(default_factory=list)  # per-frame metadata
    dt: float = FRAME_DT

    @property
    def n_frames(self) -> int:
        return len(self.ego_log)

    def agent_poses(self, frame: int) -> list:
        out = []
        for track in self.agents:
            pose = track.pose_at(frame)
            if pose is not None:
                out.append(pose)
        return out


@dataclass
class TrainingRecord:
    scenario_id: str
    frame: int
    target_positions: np.ndarray  # (40, 2) ego-frame future positions
    current_bev: str | None = None
    next_bev: str | None = None
    next_env: str | None = None


# ---------------------------------------------------------------------------
# serialization


def _req(obj, key, path, line, kind=None):
    if key not in obj:
        raise ScenarioParseError(path, line, key, "missing")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise ScenarioParseError(path, line, key, f"expected {kind.__name__}")
    return val


def load_scenario_file(path) -> Scenario:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ScenarioParseError(path, 1, "header", "empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(path, 1, "header", f"bad JSON: {exc}") from exc
    if header.get("schema_version") != SCHEMA_VERSION:
        raise ScenarioParseError(path, 1, "schema_version", "unsupported version")
    dt = _req(header, "dt", path, 1)
    if not math.isclose(dt, FRAME_DT, rel_tol=0, abs_tol=1e-12):
        raise ScenarioParseError(path, 1, "dt", f"must be {FRAME_DT}, got {dt}")
    scn_id = str(_req(header, "id", path, 1))
    map_obj = header.get("map", {})
    static_map = StaticMap(
        lanes=tuple(map_obj.get("lanes", [])),
        drivable_areas=tuple(map_obj.get("drivable_areas", [])),
        intersections=tuple(map_obj.get("intersections", [])),
    )
    lights = header.get("lights", [])

    ego_log = []
    tracks: dict[str, AgentTrack] = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            frame = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScenarioParseError(path, i, "frame", f"bad JSON: {exc}") from exc
        ego = _req(frame, "ego", path, i, dict)
        try:
            ego_log.append(
                VehicleState(ego["px"], ego["py"], ego["theta"], ego["v"])
            )
        except Exception as exc:
            raise ScenarioParseError(path, i, "ego", str(exc)) from exc
        f_idx = len(ego_log) - 1
        for ag in frame.get("agents", []):
            ag_id = str(_req(ag, "id", path, i))
            kind = ag.get("kind", "vehicle")
            if kind not in ("vehicle", "pedestrian"):
                raise ScenarioParseError(path, i, "kind", f"unknown kind {kind!r}")
            track = tracks.get(ag_id)
            if track is None:
                track = AgentTrack(
                    ag_id, kind, (float(ag["length"]), float(ag["width"]))
                )
                tracks[ag_id] = track
            track.poses[f_idx] = (
                float(ag["px"]),
                float(ag["py"]),
                float(ag["heading"]),
            )
    return Scenario(
        id=scn_id,
        ego_log=ego_log,
        agents=list(tracks.values()),
        static_map=static_map,
        traffic_lights=lights,
    )


def load_scenarios(path) -> list:
    """Load every *.jsonl scenario in a directory, sorted by filename."""
    out = []
    for name in sorted(os.listdir(path)):
        if name.endswith(".jsonl"):
            out.append(load_scenario_file(os.path.join(path, name)))
    return out


def save_scenario(scn: Scenario, path) -> None:
    header = {
        "schema_version": SCHEMA_VERSION,
        "id": scn.id,
        "dt": scn.dt,
        "map": {
            "lanes": [l.tolist() for l in scn.static_map.lanes],
            "drivable_areas": [p.tolist() for p in scn.static_map.drivable_areas],
            "intersections": [p.tolist() for p in scn.static_map.intersections],
        },
        "lights": scn.traffic_lights,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for f_idx, ego in enumerate(scn.ego_log):
            agents = []
            for pose in scn.agent_poses(f_idx):
                agents.append(
                    {
                        "id": pose.id,
                        "kind": pose.kind,
                        "px": pose.px,
                        "py": pose.py,
                        "heading": pose.heading,
                        "length": pose.length,
                        "width": pose.width,
                    }
                )
            frame = {
                "ego": {"px": ego.px, "py": ego.py, "theta": ego.theta, "v": ego.v},
                "agents": agents,
            }
            fh.write(json.dumps(frame, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# extraction


def future_positions_ego_frame(scn: Scenario, frame: int) -> np.ndarray:
    """Ego positions at frames frame+1..frame+40 in the ego frame at `frame`."""
    ref = scn.ego_log[frame]
    c, s = math.cos(ref.theta), math.sin(ref.theta)
    rot = np.array([[c, s], [-s, c]])  # world -> ego
    pts = np.array(
        [
            [scn.ego_log[frame + k].px, scn.ego_log[frame + k].py]
            for k in range(1, TARGET_LEN + 1)
        ]
    )
    return (pts - ref.position) @ rot.T


def filter_and_extract(scenarios) -> list:
    """Drop scenarios shorter than 240 frames; emit one record per frame
    that still has 40 future frames."""
    records = []
    for scn in scenarios:
        if scn.n_frames < MIN_FRAMES:
            continue
        for f in range(scn.n_frames - TARGET_LEN):
            records.append(
                TrainingRecord(
                    scenario_id=scn.id,
                    frame=f,
                    target_positions=future_positions_ego_frame(scn, f),
                )
            )
    return records


# ---------------------------------------------------------------------------
# synthetic fixtures


def _straight_map(length=300.0, half_width=5.0, n_lanes=3):
    lanes = tuple(
        np.array([[-50.0, y], [length, y]])
        for y in np.linspace(-half_width + 1.5, half_width - 1.5, n_lanes)
    )
    drivable = (
        np.array(
            [
                [-50.0, -half_width],
                [length, -half_width],
                [length, half_width],
                [-50.0, half_width],
            ]
        ),
    )
    return StaticMap(lanes=lanes, drivable_areas=drivable)


def _cross_map(arm=150.0, half_width=5.0):
    lanes = (
        np.array([[-arm, 0.0], [arm, 0.0]]),
        np.array([[0.0, -arm], [0.0, arm]]),
    )
    drivable = (
        np.array([[-arm, -half_width], [arm, -half_width], [arm, half_width], [-arm, half_width]]),
        np.array([[-half_width, -arm], [half_width, -arm], [half_width, arm], [-half_width, arm]]),
    )
    inter = (
        np.array(
            [
                [-half_width, -half_width],
                [half_width, -half_width],
                [half_width, half_width],
                [-half_width, half_width],
            ]
        ),
    )
    return StaticMap(lanes=lanes, drivable_areas=drivable, intersections=inter)


def _const_speed_log(n_frames, speed, x0=0.0, y0=0.0, theta=0.0):
    c, s = math.cos(theta), math.sin(theta)
    return [
        VehicleState(x0 + speed * FRAME_DT * k * c, y0 + speed * FRAME_DT * k * s, theta, speed)
        for k in range(n_frames)
    ]


def _stop_and_go_log(n_frames, v_cruise, stop_frame, go_frame, x0=0.0):
    # decelerate to a stop before stop_frame, hold, accelerate after go_frame
    states = []
    x, v = x0, v_cruise
    brake = v_cruise / max(1, stop_frame // 2) / FRAME_DT
    accel = 1.5
    for k in range(n_frames):
        states.append(VehicleState(x, 0.0, 0.0, v))
        if k < stop_frame and k >= stop_frame // 2:
            v = max(0.0, v - brake * FRAME_DT)
            if v < 1e-9:
                v = 0.0
        elif k >= go_frame:
            v = min(v_cruise, v + accel * FRAME_DT)
        x += v * FRAME_DT
    return states


def _agent_track(ag_id, start_frame, n_frames, x0, y0, heading, speed, kind="vehicle",
                 extent=(4.5, 1.8)):
    track = AgentTrack(ag_id, kind, extent)
    c, s = math.cos(heading), math.sin(heading)
    for k in range(n_frames):
        f = start_frame + k
        track.poses[f] = (
            x0 + speed * FRAME_DT * k * c,
            y0 + speed * FRAME_DT * k * s,
            wrap_angle(heading),
        )
    return track


def make_straight_road(n_frames=300, speed=5.0, scn_id="straight-road") -> Scenario:
    """Constant-speed ego on a straight multi-lane road, one far-away agent."""
    ego_log = _const_speed_log(n_frames, speed)
    agents = [
        _agent_track("lead", 0, n_frames, x0=60.0, y0=3.0, heading=0.0, speed=speed)
    ]
    return Scenario(
        id=scn_id,
        ego_log=ego_log,
        agents=agents,
        static_map=_straight_map(),
        traffic_lights=[None] * n_frames,
    )


def make_multi_agent_road(n_frames=300, speed=8.0) -> Scenario:
    """Straight road with several surrounding vehicles and one pedestrian."""
    ego_log = _const_speed_log(n_frames, speed)
    agents = [
        _agent_track("front", 0, n_frames, 30.0, 0.0, 0.0, speed),
        _agent_track("left", 0, n_frames, 10.0, 3.5, 0.0, speed * 1.1),
        _agent_track("rear", 0, n_frames, -15.0, -3.5, 0.0, speed * 0.9),
        _agent_track(
            "ped", 100, 100, 150.0, 8.0, -math.pi / 2, 1.2,
            kind="pedestrian", extent=(0.6, 0.6),
        ),
    ]
    return Scenario(
        id="multi-agent-road",
        ego_log=ego_log,
        agents=agents,
        static_map=_straight_map(),
        traffic_lights=[None] * n_frames,
    )


def make_red_light_intersection(n_frames=300) -> Scenario:
    """Ego brakes to a stop in front of a red light and waits."""
    ego_log = _stop_and_go_log(n_frames, v_cruise=6.0, stop_frame=120, go_frame=n_frames + 1,
                               x0=-60.0)
    lights = ["red"] * n_frames
    agents = [_agent_track("cross", 0, n_frames, 40.0, -60.0, math.pi / 2, 7.0)]
    return Scenario(
        id="red-light-intersection",
        ego_log=ego_log,
        agents=agents,
        static_map=_cross_map(),
        traffic_lights=lights,
    )


def make_green_light_intersection(n_frames=300) -> Scenario:
    """Highly dynamic intersection with a green light; ego drives through."""
    ego_log = _const_speed_log(n_frames, 7.0, x0=-80.0)
    agents = [
        _agent_track("oncoming", 0, n_frames, 120.0, 3.0, math.pi, 7.0),
        _agent_track("crossing-far", 0, n_frames, 30.0, 80.0, -math.pi / 2, 6.0),
    ]
    return Scenario(
        id="green-light-intersection",
        ego_log=ego_log,
        agents=agents,
        static_map=_cross_map(),
        traffic_lights=["green"] * n_frames,
    )


def make_red_to_green_start(n_frames=300) -> Scenario:
    """Ego waits at a red light that turns green, then pulls away."""
    ego_log = _stop_and_go_log(n_frames, v_cruise=6.0, stop_frame=80, go_frame=160,
                               x0=-50.0)
    lights = ["red"] * 160 + ["green"] * (n_frames - 160)
    return Scenario(
        id="red-to-green-start",
        ego_log=ego_log,
        agents=[],
        static_map=_cross_map(),
        traffic_lights=lights,
    )


def make_collision_course(n_frames=300, overlap_frame=50) -> Scenario:
    """An agent parked on the ego lane so log replay overlaps it at a known frame."""
    speed = 5.0
    ego_log = _const_speed_log(n_frames, speed)
    # ego reaches x = speed * dt * overlap_frame at overlap_frame; park the
    # agent there so the footprints overlap exactly then
    x_hit = speed * FRAME_DT * overlap_frame
    agents = [_agent_track("parked", 0, n_frames, x_hit, 0.0, 0.0, 0.0)]
    return Scenario(
        id="collision-course",
        ego_log=ego_log,
        agents=agents,
        static_map=_straight_map(),
        traffic_lights=[None] * n_frames,
    )


PAPER_SCENES = (
    make_red_light_intersection,
    make_green_light_intersection,
    make_multi_agent_road,
    make_red_to_green_start,
)

BASIC_SCENES = (make_straight_road, make_collision_course)


def write_fixture_set(out_dir, which="basic") -> list:
    """Write a named fixture set; returns the written paths."""
    makers = {"basic": BASIC_SCENES, "paper-scenes": PAPER_SCENES}
    if which not in makers:
        raise ValueError(f"unknown fixture set {which!r}")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for maker in makers[which]:
        scn = maker()
        path = os.path.join(out_dir, f"{scn.id}.jsonl")
        save_scenario(scn, path)
        paths.append(path)
    return paths
