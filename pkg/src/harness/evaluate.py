"""Scoring predictions against ground truth and writing the JSON/CSV reports."""

from __future__ import annotations

import csv
import logging
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np
import torch

from core.errors import DataError
from data.manifest import load_split
from data.raster import RasterSample
from data.regulate import Regulation, regulate_sample
from metrics.confusion import MetricAccumulator
from model.checkpoint import load_model
from model.urbansam import UrbanSAM
from schema.models import Split
from schema.records import DERIVED_KEYS, MacroReport, MetricsReport

logger = logging.getLogger(__name__)

THRESHOLD = 0.5

# Maps one sample (and an optional external prompt) to a probability map [H, W].
Predictor = Callable[[RasterSample, np.ndarray | None], np.ndarray]


class ModelPredictor:
    """Wraps a model: regulate to the trunk size, run, and return to the native grid."""

    def __init__(self, model: UrbanSAM, device: str | torch.device = "cpu") -> None:
        self.model = model.eval()
        self.device = torch.device(device)
        self.image_size = model.cfg.trunk.image_size
        self.patch_size = model.cfg.trunk.patch_size

    def _inputs(
        self, sample: RasterSample, prompt: np.ndarray | None
    ) -> tuple[torch.Tensor, torch.Tensor | None, Regulation]:
        bare = sample.with_arrays(sample.image, None)
        regulated, record = regulate_sample(bare, self.image_size, self.patch_size)
        image = torch.from_numpy(regulated.image)[None].to(self.device)
        override = None
        if prompt is not None:
            override = torch.from_numpy(prompt.astype(np.float32))[None, None].to(self.device)
        return image, override, record

    @torch.no_grad()
    def __call__(self, sample: RasterSample, prompt: np.ndarray | None = None) -> np.ndarray:
        image, override, record = self._inputs(sample, prompt)
        prob = record.inverse(self.model.predict_proba(image, override))
        return prob[0, 0].cpu().numpy().astype(np.float64)

    @torch.no_grad()
    def prompt(self, sample: RasterSample) -> np.ndarray:
        """The learned hard prompt at the sample's resolution, {0, 1}."""
        image, _, record = self._inputs(sample, None)
        hard = record.inverse(self.model.predict_prompt(image), binary=True)
        return hard[0, 0].cpu().numpy().astype(np.uint8)


def binarize_probability(prob: np.ndarray, threshold: float = THRESHOLD) -> np.ndarray:
    return (prob >= threshold).astype(np.uint8)


def evaluate_samples(
    predictor: Predictor,
    samples: Sequence[RasterSample],
    *,
    prompts: Sequence[np.ndarray | None] | None = None,
    keep_images: bool = False,
) -> MetricAccumulator:
    """Pool confusion counts of thresholded predictions over ``samples``."""
    acc = MetricAccumulator(keep_images=keep_images)
    for i, sample in enumerate(samples):
        if sample.mask is None:
            raise DataError(f"sample {sample.source_id!r} has no ground-truth mask")
        prompt = prompts[i] if prompts is not None else None
        acc.update(binarize_probability(predictor(sample, prompt)), sample.mask)
    return acc


def write_report(out_dir: str | Path, report: MetricsReport | MacroReport) -> tuple[Path, Path]:
    """``metrics.json`` and ``metrics.csv``; macro reports carry averaged derived metrics."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path, csv_path = out / "metrics.json", out / "metrics.csv"
    if isinstance(report, MacroReport):
        json_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        row = {**report.pooled.as_row(), **{k: getattr(report, k) for k in DERIVED_KEYS}}
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
            writer.writeheader()
            writer.writerow(row)
    else:
        json_path.write_text(report.to_json() + "\n", encoding="utf-8")
        csv_path.write_text(report.to_csv_row(header=True), encoding="utf-8")
    return json_path, csv_path


def evaluate(
    checkpoint: str | Path,
    manifest: str | Path,
    split: Split = Split.TEST,
    *,
    out_dir: str | Path | None = None,
    macro: bool = False,
    device: str = "cpu",
) -> MetricsReport | MacroReport:
    model, _, _ = load_model(checkpoint)
    model.to(device)
    samples = load_split(manifest, split, require_masks=True)
    if not samples:
        raise DataError(f"split {split} of {manifest} is empty")
    acc = evaluate_samples(ModelPredictor(model, device), samples, keep_images=macro)
    report: MetricsReport | MacroReport = acc.macro() if macro else acc.report()
    target = Path(out_dir) if out_dir is not None else Path(checkpoint) / f"eval_{split.value}"
    write_report(target, report)
    logger.info(
        "Evaluated %d %s samples: IoU %.4f F1 %.4f", len(samples), split, report.iou, report.f1
    )
    return report
