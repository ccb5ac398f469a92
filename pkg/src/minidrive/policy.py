"""Decision policies: log replay, constant velocity, and an external
subprocess speaking a newline-delimited JSON protocol.

A decision is the 40x2 array of future ego positions at 0.1 s steps in the
ego frame.  Policies are callables ``(obs, frame) -> Decision``; the sim
invokes them at every replan tick.

Wire protocol (one JSON object per line over the child's stdin/stdout):

    -> {"type": "hello", "schema_version": 1}
    <- {"type": "hello", "schema_version": 1}
    -> {"type": "decide", "id": n, "ego": {"px", "py", "theta", "v"},
        "history": [{"ego": {...}, "tensor": <base64 raster tensor or null>}]}
    <- {"type": "decision", "id": n, "waypoints": [[x, y] * 40]}
    <- {"type": "error", "code": ..., "message": ...}       # recoverable
"""

import base64
import io
import json
import select
import shlex
import struct
import subprocess
from dataclasses import dataclass

import numpy as np

from .errors import HorizonError, InvalidInputError, PolicyError
from .scenario import TARGET_LEN, Scenario, future_positions_ego_frame
from .vehicle import VehicleState

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 5.0
MAX_CONTEXT = 60


@dataclass(frozen=True)
class Observation:
    """Composed raster history (oldest -> newest) with matching ego states."""

    history: tuple  # tuple[(BevRaster | None, VehicleState)]
    ego: VehicleState

    def __post_init__(self):
        if len(self.history) < 1:
            raise InvalidInputError("observation history must be non-empty")
        if len(self.history) > MAX_CONTEXT:
            object.__setattr__(self, "history", tuple(self.history[-MAX_CONTEXT:]))
        else:
            object.__setattr__(self, "history", tuple(self.history))


@dataclass(frozen=True)
class Decision:
    waypoints: np.ndarray  # (40, 2) ego-frame, 0.1 s steps

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float)
        if wp.shape != (TARGET_LEN, 2):
            raise InvalidInputError(
                f"decision must be {TARGET_LEN}x2, got {wp.shape}"
            )
        if not np.all(np.isfinite(wp)):
            raise InvalidInputError("decision contains non-finite waypoints")
        object.__setattr__(self, "waypoints", wp)


class ReplayPolicy:
    """Oracle policy: returns the logged future in the logged ego frame."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario

    def __call__(self, obs: Observation, frame: int) -> Decision:
        if frame + TARGET_LEN >= self.scenario.n_frames:
            raise HorizonError(
                f"frame {frame} has fewer than {TARGET_LEN} future frames"
            )
        return Decision(future_positions_ego_frame(self.scenario, frame))


def constant_velocity_policy(obs: Observation, frame: int = 0) -> Decision:
    """Straight-line hold of the current speed along the ego x-axis."""
    v = obs.ego.v
    wp = np.zeros((TARGET_LEN, 2))
    wp[:, 0] = v * 0.1 * np.arange(1, TARGET_LEN + 1)
    return Decision(wp)


def _encode_raster(raster) -> str | None:
    if raster is None:
        return None
    buf = io.BytesIO()
    buf.write(struct.pack("<4sIII", b"BEVR", raster.spec.width, raster.spec.height, 3))
    buf.write(np.ascontiguousarray(raster.channels, dtype="<f4").tobytes())
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _ego_dict(state: VehicleState) -> dict:
    return {"px": state.px, "py": state.py, "theta": state.theta, "v": state.v}


class ExternalPolicy:
    """Policy served by a subprocess over the NDJSON stdio protocol."""

    def __init__(self, cmd, timeout: float = DEFAULT_TIMEOUT, send_rasters: bool = True):
        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        self.timeout = timeout
        self.send_rasters = send_rasters
        self._next_id = 0
        try:
            self.proc = subprocess.Popen(
                cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise PolicyError(f"cannot launch policy process: {exc}") from exc
        reply = self._roundtrip({"type": "hello", "schema_version": PROTOCOL_VERSION})
        if reply.get("type") != "hello" or reply.get("schema_version") != PROTOCOL_VERSION:
            self.close()
            raise PolicyError(f"bad handshake reply: {reply}")

    def _read_line(self) -> str:
        if self.proc.stdout is None:
            raise PolicyError("policy process has no stdout")
        ready, _, _ = select.select([self.proc.stdout], [], [], self.timeout)
        if not ready:
            raise PolicyError(f"policy timed out after {self.timeout} s")
        line = self.proc.stdout.readline()
        if not line:
            raise PolicyError("policy process closed its output")
        return line

    def _roundtrip(self, msg: dict) -> dict:
        try:
            self.proc.stdin.write(json.dumps(msg) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise PolicyError(f"policy process pipe broken: {exc}") from exc
        try:
            return json.loads(self._read_line())
        except json.JSONDecodeError as exc:
            raise PolicyError(f"malformed policy reply: {exc}") from exc

    def __call__(self, obs: Observation, frame: int = 0) -> Decision:
        self._next_id += 1
        req = {
            "type": "decide",
            "id": self._next_id,
            "ego": _ego_dict(obs.ego),
            "history": [
                {
                    "ego": _ego_dict(state),
                    "tensor": _encode_raster(raster) if self.send_rasters else None,
                }
                for raster, state in obs.history
            ],
        }
        reply = self._roundtrip(req)
        if reply.get("type") == "error":
            raise PolicyError(
                f"policy error {reply.get('code')}: {reply.get('message')}"
            )
        if reply.get("type") != "decision":
            raise PolicyError(f"unexpected reply type {reply.get('type')!r}")
        wp = reply.get("waypoints")
        if not isinstance(wp, list) or len(wp) != TARGET_LEN:
            raise PolicyError(
                f"decision must carry {TARGET_LEN} waypoints, got "
                f"{len(wp) if isinstance(wp, list) else type(wp).__name__}"
            )
        try:
            arr = np.asarray(wp, dtype=float)
        except (TypeError, ValueError) as exc:
            raise PolicyError(f"non-numeric waypoints: {exc}") from exc
        if arr.shape != (TARGET_LEN, 2) or not np.all(np.isfinite(arr)):
            raise PolicyError("waypoints must be a finite 40x2 array")
        return Decision(arr)

    def close(self):
        if self.proc.stdin:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
