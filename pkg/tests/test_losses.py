import math

import numpy as np
import pytest

from minidrive.errors import InvalidInputError
from minidrive.losses import (
    LossWeights,
    combined_loss,
    decision_loss,
    finetune_loss,
    prediction_loss,
)
from minidrive.raster import BevRaster, RasterSpec

SPEC = RasterSpec()


def raster(rng=None, value=None):
    if value is not None:
        return BevRaster(SPEC, np.full((224, 224, 3), value, dtype=np.float32))
    return BevRaster(SPEC, rng.uniform(0, 1, (224, 224, 3)).astype(np.float32))


class TestDecisionLoss:
    def test_zero(self):
        wp = np.arange(80.0).reshape(40, 2)
        assert decision_loss(wp, wp) == 0.0

    def test_single_coordinate_error(self):
        gt = np.zeros((40, 2))
        pred = gt.copy()
        pred[0, 0] = 2.0
        assert decision_loss(pred, gt) == pytest.approx(4.0 / 80.0, abs=1e-15)

    def test_uniform_offset(self):
        gt = np.zeros((40, 2))
        assert decision_loss(gt + 0.5, gt) == pytest.approx(0.25, abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            decision_loss(np.zeros((40, 2)), np.zeros((39, 2)))


class TestWeights:
    def test_default_60_degrees(self):
        w = LossWeights()
        assert w.decision_weight == pytest.approx(math.sqrt(3) / 2, abs=1e-12)
        assert w.prediction_weight == pytest.approx(0.5, abs=1e-12)

    def test_endpoints(self):
        assert LossWeights(0.0).decision_weight == 0.0
        assert LossWeights(90.0).prediction_weight == pytest.approx(0.0, abs=1e-15)

    def test_range_check(self):
        with pytest.raises(InvalidInputError):
            LossWeights(91.0)


class TestCombined:
    def test_identity(self):
        got = combined_loss(2.0, 4.0)
        want = math.sin(math.radians(60)) * 2.0 + math.cos(math.radians(60)) * 4.0
        assert got == pytest.approx(want, abs=1e-12)

    def test_unit_losses(self):
        assert combined_loss(1.0, 1.0) == pytest.approx(
            math.sqrt(3) / 2 + 0.5, abs=1e-12
        )


class TestRasterLosses:
    def test_perfect_prediction_zero(self, rng):
        env = raster(value=0.0)
        gt = raster(rng)
        assert prediction_loss(env, gt, gt) == pytest.approx(0.0, abs=1e-12)
        assert finetune_loss(env, gt, gt) == pytest.approx(0.0, abs=1e-12)

    def test_constant_error_closed_form(self):
        env = raster(value=0.0)
        pred = raster(value=0.3)
        gt = raster(value=0.5)
        # per-pixel squared error (0.3 - 0.5)^2 = 0.04, scaled by 100
        assert prediction_loss(env, pred, gt) == pytest.approx(4.0, abs=1e-6)

    def test_finetune_is_unscaled_prediction(self, rng):
        env = raster(value=0.1)
        pred = raster(rng)
        gt = raster(rng)
        assert finetune_loss(env, pred, gt) == pytest.approx(
            prediction_loss(env, pred, gt) / 100.0, abs=1e-12
        )

    def test_env_composition_matters(self):
        # a saturated env channel hides the prediction entirely
        env = raster(value=1.0)
        pred_a = raster(value=0.2)
        pred_b = raster(value=0.9)
        gt = raster(value=1.0)
        assert prediction_loss(env, pred_a, gt) == pytest.approx(0.0, abs=1e-12)
        assert prediction_loss(env, pred_b, gt) == pytest.approx(0.0, abs=1e-12)

    def test_spec_mismatch(self):
        small = BevRaster(RasterSpec(resolution=0.25))
        with pytest.raises(InvalidInputError):
            finetune_loss(raster(value=0.0), small, raster(value=0.0))
