from __future__ import annotations

import numpy as np
import torch

from core.errors import InvalidInputError
from schema.records import MacroReport, MetricsReport

ArrayLike = np.ndarray | torch.Tensor


def _as_binary(name: str, x: ArrayLike) -> np.ndarray:
    arr = x.detach().cpu().numpy() if isinstance(x, torch.Tensor) else np.asarray(x)
    if arr.dtype == bool:
        return arr.astype(np.int64)
    if not np.isin(arr, (0, 1)).all():
        raise InvalidInputError(f"{name} must be binary, found values {np.unique(arr)[:5]}")
    return arr.astype(np.int64)


def _confusion(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    # rows: ground truth, cols: prediction
    return np.bincount(2 * gt.ravel() + pred.ravel(), minlength=4).reshape(2, 2)


def compute_metrics(pred_binary: ArrayLike, gt_binary: ArrayLike) -> MetricsReport:
    pred = _as_binary("prediction", pred_binary)
    gt = _as_binary("ground truth", gt_binary)
    if pred.shape != gt.shape:
        raise InvalidInputError(f"prediction shape {pred.shape} != ground truth {gt.shape}")
    hist = _confusion(pred, gt)
    return MetricsReport(
        tn=int(hist[0, 0]), fp=int(hist[0, 1]), fn=int(hist[1, 0]), tp=int(hist[1, 1])
    )


class MetricAccumulator:
    """Streaming pooled counts, optionally keeping per-image reports for macro averages."""

    def __init__(self, keep_images: bool = False) -> None:
        self.keep_images = keep_images
        self.reset()

    def reset(self) -> None:
        self.pooled = MetricsReport()
        self.images: list[MetricsReport] = []

    def update(self, pred_binary: ArrayLike, gt_binary: ArrayLike) -> MetricsReport:
        """Add one batch; a leading batch dimension of a 3-D/4-D input counts as images."""
        pred = _as_binary("prediction", pred_binary)
        gt = _as_binary("ground truth", gt_binary)
        if pred.shape != gt.shape:
            raise InvalidInputError(f"prediction shape {pred.shape} != ground truth {gt.shape}")
        items = [pred] if pred.ndim <= 2 else list(pred)
        truths = [gt] if gt.ndim <= 2 else list(gt)
        batch = MetricsReport()
        for p, g in zip(items, truths, strict=True):
            report = compute_metrics(p, g)
            batch = batch.merge(report)
            if self.keep_images:
                self.images.append(report)
        self.pooled = self.pooled.merge(batch)
        return batch

    def merge(self, other: MetricAccumulator) -> MetricAccumulator:
        out = MetricAccumulator(self.keep_images and other.keep_images)
        out.pooled = self.pooled.merge(other.pooled)
        out.images = self.images + other.images
        return out

    def report(self) -> MetricsReport:
        return self.pooled

    def macro(self) -> MacroReport:
        return MacroReport.from_reports(self.images)
