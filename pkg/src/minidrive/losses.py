"""Training-loss compositions over decisions and rasters.

The raster losses compare a saturating composition of an environment
channel image and a dynamic prediction against a target raster; the
decision loss is a plain MSE over the 40x2 waypoint array.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .raster import BevRaster, compose


@dataclass(frozen=True)
class LossWeights:
    alpha_deg: float = 60.0

    def __post_init__(self):
        if not 0.0 <= self.alpha_deg <= 90.0:
            raise InvalidInputError("alpha must be in [0, 90] degrees")

    @property
    def decision_weight(self) -> float:
        return math.sin(math.radians(self.alpha_deg))

    @property
    def prediction_weight(self) -> float:
        return math.cos(math.radians(self.alpha_deg))


def decision_loss(p_de: np.ndarray, p_gt: np.ndarray) -> float:
    """MSE over all waypoint scalars."""
    p_de = np.asarray(p_de, dtype=float)
    p_gt = np.asarray(p_gt, dtype=float)
    if p_de.shape != p_gt.shape:
        raise InvalidInputError(f"shape mismatch {p_de.shape} vs {p_gt.shape}")
    return float(((p_de - p_gt) ** 2).mean())


def _raster_mse(a: BevRaster, b: BevRaster) -> float:
    if a.spec != b.spec:
        raise InvalidInputError("raster spec mismatch")
    diff = a.channels.astype(np.float64) - b.channels.astype(np.float64)
    return float((diff**2).mean())


def prediction_loss(env_gt: BevRaster, bev_pr: BevRaster, bev_gt: BevRaster) -> float:
    """100 x MSE between the env+prediction composition and the target."""
    return 100.0 * _raster_mse(compose(env_gt, bev_pr), bev_gt)


def combined_loss(ld: float, lp: float, w: LossWeights = LossWeights()) -> float:
    return w.decision_weight * ld + w.prediction_weight * lp


def finetune_loss(env_er: BevRaster, bev_pr: BevRaster, bev_sm: BevRaster) -> float:
    """MSE between the env+prediction composition and the simulated raster
    (no x100 factor, unlike the pre-training raster loss)."""
    return _raster_mse(compose(env_er, bev_pr), bev_sm)
