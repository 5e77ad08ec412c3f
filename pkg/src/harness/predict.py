"""Whole-raster inference: tile, regulate each patch, run the model, stitch."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from data.raster import RasterSample, load_sample, write_mask, write_probability
from data.tiling import stitch, tile
from harness.evaluate import ModelPredictor, binarize_probability
from model.checkpoint import load_model
from schema.config import TilingSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictionFiles:
    probability: Path
    binary: Path
    prompt: Path | None = None


def predict_raster(
    predictor: ModelPredictor, raster: RasterSample, tiling: TilingSpec
) -> np.ndarray:
    """Stitched probability map ``[H, W]`` of a raster of any size."""
    patches = [(p.window, predictor(p)) for p in tile(raster, tiling)]
    return stitch(patches, out_shape=(raster.height, raster.width))


def predict_prompt_raster(
    predictor: ModelPredictor, raster: RasterSample, tiling: TilingSpec
) -> np.ndarray:
    """Stitched hard prompt; overlapping votes are averaged and kept at >= 0.5."""
    patches = [(p.window, predictor.prompt(p).astype(np.float64)) for p in tile(raster, tiling)]
    return binarize_probability(stitch(patches, out_shape=(raster.height, raster.width)))


def predict(
    checkpoint: str | Path,
    raster_path: str | Path,
    tiling: TilingSpec,
    out_dir: str | Path,
    *,
    export_prompt: bool = False,
    device: str = "cpu",
) -> PredictionFiles:
    """Write ``<stem>_prob.png`` and ``<stem>_mask.png`` (plus ``<stem>_prompt.png``)."""
    raster = load_sample(raster_path)
    model, _, _ = load_model(checkpoint)
    model.to(device)
    predictor = ModelPredictor(model, device)
    prob = predict_raster(predictor, raster, tiling)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(raster_path).stem
    prob_path, mask_path = out / f"{stem}_prob.png", out / f"{stem}_mask.png"
    write_probability(prob_path, prob)
    write_mask(mask_path, binarize_probability(prob))
    prompt_path = None
    if export_prompt:
        prompt_path = out / f"{stem}_prompt.png"
        write_mask(prompt_path, predict_prompt_raster(predictor, raster, tiling))
    logger.info(
        "Predicted %s (%dx%d) with patch %d stride %d into %s",
        raster_path,
        raster.height,
        raster.width,
        tiling.patch_size,
        tiling.stride,
        out,
    )
    return PredictionFiles(prob_path, mask_path, prompt_path)
