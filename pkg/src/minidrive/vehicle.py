"""Kinematic bicycle model and the flatness maps between rear-axle
position signals and full vehicle states.

The flat output is the rear-axle position (px, py); heading, speed,
acceleration, and steering angle are recovered from its first two time
derivatives.  Headings are wrapped to (-pi, pi] everywhere.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, LowSpeedDegenerateError

#: Speed below which the flatness inversion is singular (m/s).
EPS_SPEED = 1e-3


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(theta, math.tau)
    if w <= -math.pi:
        w += math.tau
    return w


@dataclass(frozen=True)
class VehicleState:
    """Pose and speed of the rear-axle center."""

    px: float
    py: float
    theta: float
    v: float

    def __post_init__(self):
        vals = (self.px, self.py, self.theta, self.v)
        if not all(math.isfinite(x) for x in vals):
            raise InvalidInputError(f"non-finite vehicle state {vals}")
        if self.v < 0.0:
            raise InvalidInputError(f"negative speed {self.v} (forward driving only)")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.px, self.py])

    @property
    def velocity(self) -> np.ndarray:
        return self.v * np.array([math.cos(self.theta), math.sin(self.theta)])


@dataclass(frozen=True)
class VehicleControl:
    a: float  # longitudinal acceleration, m/s^2
    phi: float  # front steering angle, rad

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.phi)):
            raise InvalidInputError("non-finite control")
        if abs(self.phi) >= math.pi / 2:
            raise InvalidInputError(f"steering angle {self.phi} out of (-pi/2, pi/2)")


@dataclass(frozen=True)
class VehicleParams:
    L: float = 2.7  # wheelbase, m
    v_max: float = 15.0
    a_max: float = 3.0
    length: float = 4.5
    width: float = 1.8

    def __post_init__(self):
        for name in ("L", "v_max", "a_max", "length", "width"):
            if getattr(self, name) <= 0.0:
                raise InvalidInputError(f"vehicle param {name} must be positive")


@dataclass(frozen=True)
class FlatSignal:
    """Flat output (rear-axle position) and its first two derivatives."""

    sigma: np.ndarray
    d_sigma: np.ndarray
    dd_sigma: np.ndarray

    def __post_init__(self):
        for name in ("sigma", "d_sigma", "dd_sigma"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (2,) or not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} must be a finite 2-vector")
            object.__setattr__(self, name, arr)


def _derivative(state, a, phi, L):
    px, py, theta, v = state
    return np.array(
        [
            v * math.cos(theta),
            v * math.sin(theta),
            v / L * math.tan(phi),
            a,
        ]
    )


def step_dynamics(
    state: VehicleState, ctrl: VehicleControl, params: VehicleParams, dt: float
) -> VehicleState:
    """Advance the bicycle model by one RK4 step of length dt."""
    if not (math.isfinite(dt) and dt > 0.0):
        raise InvalidInputError(f"dt must be positive, got {dt}")
    y = np.array([state.px, state.py, state.theta, state.v])
    k1 = _derivative(y, ctrl.a, ctrl.phi, params.L)
    k2 = _derivative(y + 0.5 * dt * k1, ctrl.a, ctrl.phi, params.L)
    k3 = _derivative(y + 0.5 * dt * k2, ctrl.a, ctrl.phi, params.L)
    k4 = _derivative(y + dt * k3, ctrl.a, ctrl.phi, params.L)
    y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return VehicleState(y[0], y[1], wrap_angle(y[2]), max(y[3], 0.0))


def flat_to_state(
    sig: FlatSignal, params: VehicleParams, fallback_heading: float | None = None
) -> tuple[VehicleState, VehicleControl]:
    """Recover the full state and control from a flat signal.

    Below the speed threshold the heading/acceleration/steering branches are
    singular.  With ``fallback_heading=None`` (default) this raises
    ``LowSpeedDegenerateError``; passing a heading instead holds that heading,
    reports zero steering, and projects the acceleration onto the heading.
    """
    vx, vy = sig.d_sigma
    ax, ay = sig.dd_sigma
    speed = math.hypot(vx, vy)
    if speed < EPS_SPEED:
        if fallback_heading is None:
            raise LowSpeedDegenerateError(sig.sigma[0], sig.sigma[1], speed)
        theta = wrap_angle(fallback_heading)
        a = ax * math.cos(theta) + ay * math.sin(theta)
        state = VehicleState(sig.sigma[0], sig.sigma[1], theta, speed)
        return state, VehicleControl(a, 0.0)
    theta = math.atan2(vy, vx)
    a = (vx * ax + vy * ay) / speed
    phi = math.atan((vx * ay - vy * ax) * params.L / speed**3)
    state = VehicleState(sig.sigma[0], sig.sigma[1], theta, speed)
    return state, VehicleControl(a, phi)
