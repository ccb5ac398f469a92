"""Piecewise quintic trajectories in the plane.

A trajectory is M quintic pieces over a uniform interval dt_piece, one
polynomial per axis, stored and evaluated in local time tau in [0, dt_piece]
per piece.  Global time t maps to piece n = floor((t - t0) / dt_piece); the
shared knot between two pieces belongs to the right piece (the last piece
owns the global end).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, InvalidInputError
from .vehicle import FlatSignal

_DOMAIN_TOL = 1e-9


@dataclass(frozen=True)
class QuinticPiece:
    """Coefficients f_0..f_5 for the x and y axes of one piece."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        for name in ("x", "y"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (6,) or not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"piece {name}-coefficients must be 6 finite values")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class PiecewiseQuintic:
    pieces: tuple
    dt_piece: float
    t0: float = 0.0
    _coeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.pieces) < 1:
            raise InvalidInputError("at least one piece required")
        if not (math.isfinite(self.dt_piece) and self.dt_piece > 0.0):
            raise InvalidInputError(f"dt_piece must be positive, got {self.dt_piece}")
        object.__setattr__(self, "pieces", tuple(self.pieces))
        coeffs = np.stack(
            [np.stack([p.x, p.y]) for p in self.pieces]
        )  # (M, 2, 6)
        object.__setattr__(self, "_coeffs", coeffs)

    @classmethod
    def from_coeff_array(cls, coeffs: np.ndarray, dt_piece: float, t0: float = 0.0):
        """Build from an (M, 2, 6) coefficient array."""
        pieces = [QuinticPiece(c[0], c[1]) for c in coeffs]
        return cls(tuple(pieces), dt_piece, t0)

    @property
    def n_pieces(self) -> int:
        return len(self.pieces)

    @property
    def t_end(self) -> float:
        return self.t0 + self.n_pieces * self.dt_piece

    def _derivative_coeffs(self, order: int) -> np.ndarray:
        if order not in (0, 1, 2, 3):
            raise DomainError(f"derivative order must be 0..3, got {order}")
        c = self._coeffs
        for _ in range(order):
            c = c[:, :, 1:] * np.arange(1, c.shape[2])
        return np.ascontiguousarray(c)

    def _locate(self, ts: np.ndarray):
        rel = ts - self.t0
        if np.any(rel < -_DOMAIN_TOL) or np.any(
            rel > self.n_pieces * self.dt_piece + _DOMAIN_TOL
        ):
            raise DomainError(
                f"time outside trajectory domain [{self.t0}, {self.t_end}]"
            )
        idx = np.clip(
            np.floor(rel / self.dt_piece).astype(np.int64), 0, self.n_pieces - 1
        )
        taus = rel - idx * self.dt_piece
        return taus, idx

    def eval(self, t: float, order: int = 0) -> np.ndarray:
        """Evaluate position (order 0) through jerk (order 3) at time t."""
        return self.eval_many(np.array([float(t)]), order)[0]

    def eval_many(self, ts: np.ndarray, order: int = 0) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        taus, idx = self._locate(ts)
        return kernels.poly_eval(self._derivative_coeffs(order), taus, idx)

    def to_flat_signal(self, t: float) -> FlatSignal:
        return FlatSignal(self.eval(t, 0), self.eval(t, 1), self.eval(t, 2))

    def sample(self, dt_sample: float):
        """Inclusive samples of (t, position, velocity, acceleration).

        The last sample lands exactly on the end time.
        """
        if dt_sample <= 0.0:
            raise InvalidInputError("dt_sample must be positive")
        duration = self.n_pieces * self.dt_piece
        n = int(math.floor(duration / dt_sample + _DOMAIN_TOL))
        ts = self.t0 + np.arange(n + 1) * dt_sample
        if ts[-1] < self.t_end - _DOMAIN_TOL * max(1.0, abs(self.t_end)):
            ts = np.append(ts, self.t_end)
        else:
            ts[-1] = self.t_end
        pos = self.eval_many(ts, 0)
        vel = self.eval_many(ts, 1)
        acc = self.eval_many(ts, 2)
        return [(float(t), pos[i], vel[i], acc[i]) for i, t in enumerate(ts)]

    # -- JSON wire format: {dt_piece, t0, pieces: [{x: [6], y: [6]}]} --

    def to_json_dict(self) -> dict:
        return {
            "dt_piece": self.dt_piece,
            "t0": self.t0,
            "pieces": [
                {"x": p.x.tolist(), "y": p.y.tolist()} for p in self.pieces
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, d: dict) -> "PiecewiseQuintic":
        try:
            pieces = tuple(
                QuinticPiece(np.array(p["x"]), np.array(p["y"]))
                for p in d["pieces"]
            )
            return cls(pieces, float(d["dt_piece"]), float(d.get("t0", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed trajectory document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseQuintic":
        return cls.from_json_dict(json.loads(text))
