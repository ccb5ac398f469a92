"""Ego-centric bird's-eye-view rasterization.

A raster is a 224x224x3 float image with values in [0, 1]:
channel 0 = static environment (lanes, intersections, drivable area),
channel 1 = dynamic agents, channel 2 = ego footprint.  World coordinates
map to pixel (col, row) coordinates through a similarity transform anchored
at a reference pose: the anchor pose sits at ``ego_anchor`` and, when
``ego_heading_up`` is set, its heading points toward decreasing rows.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidInputError
from .vehicle import VehicleParams, VehicleState

RASTER_SIZE = 224


@dataclass(frozen=True)
class RasterSpec:
    width: int = RASTER_SIZE
    height: int = RASTER_SIZE
    resolution: float = 0.5  # meters per pixel
    ego_anchor: tuple = (112.0, 168.0)  # (col, row) of the anchor pose
    ego_heading_up: bool = True

    def __post_init__(self):
        if self.width != RASTER_SIZE or self.height != RASTER_SIZE:
            raise InvalidInputError(f"raster must be {RASTER_SIZE}x{RASTER_SIZE}")
        if self.resolution <= 0.0:
            raise InvalidInputError("resolution must be positive")


@dataclass
class BevRaster:
    spec: RasterSpec
    channels: np.ndarray = None  # (H, W, 3) float32 in [0, 1]

    def __post_init__(self):
        if self.channels is None:
            self.channels = np.zeros(
                (self.spec.height, self.spec.width, 3), dtype=np.float32
            )
        else:
            self.channels = np.asarray(self.channels, dtype=np.float32)
            if self.channels.shape != (self.spec.height, self.spec.width, 3):
                raise InvalidInputError("channel array shape mismatch")

    def copy(self) -> "BevRaster":
        return BevRaster(self.spec, self.channels.copy())


@dataclass(frozen=True)
class WorldToRaster:
    """Similarity transform world meters -> pixel (col, row)."""

    matrix: np.ndarray  # 2x3 affine, last column is the translation
    inverse: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2, 3):
            raise InvalidInputError("transform matrix must be 2x3")
        object.__setattr__(self, "matrix", m)
        lin_inv = np.linalg.inv(m[:, :2])
        inv = np.hstack([lin_inv, (-lin_inv @ m[:, 2])[:, None]])
        object.__setattr__(self, "inverse", inv)

    @classmethod
    def from_pose(cls, pose: VehicleState, spec: RasterSpec) -> "WorldToRaster":
        res = spec.resolution
        ac, ar = spec.ego_anchor
        if spec.ego_heading_up:
            c, s = math.cos(pose.theta), math.sin(pose.theta)
            # forward (ego x) decreases the row, left (ego y) decreases the col
            lin = np.array([[s / res, -c / res], [-c / res, -s / res]])
        else:
            lin = np.array([[1.0 / res, 0.0], [0.0, -1.0 / res]])
        anchor = np.array([ac, ar])
        trans = anchor - lin @ np.array([pose.px, pose.py])
        return cls(np.hstack([lin, trans[:, None]]))

    def world_to_pixel(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.matrix[:, :2].T + self.matrix[:, 2]

    def pixel_to_world(self, pixels: np.ndarray) -> np.ndarray:
        px = np.atleast_2d(np.asarray(pixels, dtype=float))
        return px @ self.inverse[:, :2].T + self.inverse[:, 2]


def box_corners(cx, cy, heading, length, width) -> np.ndarray:
    """World corners of an oriented rectangle centered at (cx, cy)."""
    c, s = math.cos(heading), math.sin(heading)
    half = np.array(
        [
            [length / 2, width / 2],
            [length / 2, -width / 2],
            [-length / 2, -width / 2],
            [-length / 2, width / 2],
        ]
    )
    rot = np.array([[c, -s], [s, c]])
    return half @ rot.T + np.array([cx, cy])


def _in_view(px_corners: np.ndarray, spec: RasterSpec) -> bool:
    return not (
        px_corners[:, 0].max() < 0
        or px_corners[:, 0].min() > spec.width - 1
        or px_corners[:, 1].max() < 0
        or px_corners[:, 1].min() > spec.height - 1
    )


def rasterize_static(static_map, anchor_pose: VehicleState, spec: RasterSpec) -> BevRaster:
    """Draw lanes, drivable areas, and intersections into channel 0."""
    out = BevRaster(spec)
    tf = WorldToRaster.from_pose(anchor_pose, spec)
    plane = np.ascontiguousarray(out.channels[:, :, 0], dtype=np.float64)
    for poly in list(static_map.drivable_areas) + list(static_map.intersections):
        kernels.fill_polygon(plane, np.ascontiguousarray(tf.world_to_pixel(poly)), 1.0)
    for lane in static_map.lanes:
        pix = tf.world_to_pixel(lane)
        kernels.draw_segments(
            plane,
            np.ascontiguousarray(pix[:-1]),
            np.ascontiguousarray(pix[1:]),
            1.0,
        )
    out.channels[:, :, 0] = plane
    return out


def rasterize_dynamic(agents, anchor_pose: VehicleState, spec: RasterSpec) -> BevRaster:
    """Fill oriented agent boxes into channel 1; off-view agents are skipped."""
    out = BevRaster(spec)
    tf = WorldToRaster.from_pose(anchor_pose, spec)
    plane = np.ascontiguousarray(out.channels[:, :, 1], dtype=np.float64)
    for ag in agents:
        corners = box_corners(ag.px, ag.py, ag.heading, ag.length, ag.width)
        pix = np.ascontiguousarray(tf.world_to_pixel(corners))
        if _in_view(pix, spec):
            kernels.fill_polygon(plane, pix, 1.0)
    out.channels[:, :, 1] = plane
    return out


def render_ego(
    ego_pose: VehicleState,
    params: VehicleParams,
    spec: RasterSpec,
    anchor_pose: VehicleState | None = None,
) -> BevRaster:
    """Fill the ego footprint into channel 2.

    ``anchor_pose`` fixes the raster frame; it defaults to the ego pose
    itself (the usual per-frame ego-centric raster).
    """
    if anchor_pose is None:
        anchor_pose = ego_pose
    out = BevRaster(spec)
    tf = WorldToRaster.from_pose(anchor_pose, spec)
    corners = box_corners(
        ego_pose.px, ego_pose.py, ego_pose.theta, params.length, params.width
    )
    pix = np.ascontiguousarray(tf.world_to_pixel(corners))
    plane = np.ascontiguousarray(out.channels[:, :, 2], dtype=np.float64)
    if _in_view(pix, spec):
        kernels.fill_polygon(plane, pix, 1.0)
    out.channels[:, :, 2] = plane
    return out


def compose(a: BevRaster, b: BevRaster) -> BevRaster:
    """Channelwise saturating addition."""
    if a.spec != b.spec:
        raise InvalidInputError("cannot compose rasters with different specs")
    return BevRaster(a.spec, np.clip(a.channels + b.channels, 0.0, 1.0))


def render_frame(scenario, frame: int, spec: RasterSpec, params: VehicleParams,
                 anchor_pose: VehicleState | None = None) -> BevRaster:
    """Fully composed raster (env + agents + ego) for one scenario frame."""
    ego = scenario.ego_log[frame]
    if anchor_pose is None:
        anchor_pose = ego
    env = rasterize_static(scenario.static_map, anchor_pose, spec)
    dyn = rasterize_dynamic(scenario.agent_poses(frame), anchor_pose, spec)
    ego_ch = render_ego(ego, params, spec, anchor_pose=anchor_pose)
    return compose(compose(env, dyn), ego_ch)


# ---------------------------------------------------------------------------
# export formats

_MAGIC = b"BEVR"


def to_png(raster: BevRaster, path) -> None:
    """8-bit RGB PNG; channels env/dynamic/ego map to R/G/B."""
    from PIL import Image

    data = np.clip(np.rint(raster.channels * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path)


def to_binary(raster: BevRaster, path) -> None:
    """Raw tensor: 16-byte header {magic, width, height, channels} + float32 HWC data."""
    header = struct.pack(
        "<4sIII", _MAGIC, raster.spec.width, raster.spec.height, 3
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(raster.channels, dtype="<f4").tobytes())


def from_binary(path, spec: RasterSpec | None = None) -> BevRaster:
    with open(path, "rb") as fh:
        magic, width, height, n_ch = struct.unpack("<4sIII", fh.read(16))
        if magic != _MAGIC:
            raise InvalidInputError(f"{path}: not a raster tensor file")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != width * height * n_ch:
        raise InvalidInputError(f"{path}: truncated raster tensor")
    if spec is None:
        spec = RasterSpec(width=width, height=height)
    return BevRaster(spec, data.reshape(height, width, n_ch).copy())
