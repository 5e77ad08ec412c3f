"""Full training runs on the default synthetic building task. Run with --run-slow."""

import pytest
import torch
import torch.nn.functional as F

from data.prompt_sim import mask_iou
from data.raster import RasterSample
from data.synthetic import generate_split
from harness.evaluate import ModelPredictor, binarize_probability, evaluate_samples
from harness.predict import predict_raster
from harness.trainer import Trainer
from schema.config import TilingSpec, TrainConfig
from schema.models import Split

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    cfg = TrainConfig()
    samples = generate_split(cfg.data.synthetic, Split.TRAIN)
    trainer = Trainer(cfg, samples, (), tmp_path_factory.mktemp("converge"))
    trainer.fit()
    return trainer.model, generate_split(cfg.data.synthetic, Split.TEST)


def test_reaches_target_iou(trained):
    model, test_samples = trained
    report = evaluate_samples(ModelPredictor(model), test_samples).report()
    assert report.iou >= 0.90


def _upsampled(sample: RasterSample) -> RasterSample:
    image = torch.from_numpy(sample.image).float()[None]
    big = F.interpolate(image, scale_factor=2, mode="bilinear", align_corners=False)
    return RasterSample(big[0].round().clamp(0, 255).to(torch.uint8).numpy())


def test_predictions_are_scale_consistent(trained):
    model, test_samples = trained
    predictor = ModelPredictor(model)
    # the 2x raster is cut into model-sized tiles and stitched, not resized to fit the model
    tiling = TilingSpec(patch_size=model.cfg.trunk.image_size, overlap_fraction=0.5)
    agreeing = 0
    for sample in test_samples:
        base = binarize_probability(predictor(sample))
        up = _upsampled(sample)
        stitched = predict_raster(predictor, up, tiling)
        assert stitched.shape == (up.height, up.width)
        prob = torch.from_numpy(stitched).float()[None, None]
        back = F.interpolate(prob, size=base.shape, mode="bilinear", align_corners=False)
        agreeing += mask_iou(binarize_probability(back[0, 0].numpy()), base) >= 0.80
    assert agreeing >= 0.9 * len(test_samples)
