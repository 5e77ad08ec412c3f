from metrics.confusion import MetricAccumulator, compute_metrics
from metrics.losses import (
    bce_loss,
    breakdown_record,
    composite_loss,
    dice_loss,
    downsample_gt,
    loss_breakdown,
    total_loss,
)

__all__ = [
    "MetricAccumulator",
    "bce_loss",
    "breakdown_record",
    "composite_loss",
    "compute_metrics",
    "dice_loss",
    "downsample_gt",
    "loss_breakdown",
    "total_loss",
]
