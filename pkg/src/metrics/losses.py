"""Segmentation losses on probabilities.

``total_loss`` is the deep-supervised objective: the full-resolution prediction, the
1/4 head and the mean over the mask predictions, each against ground truth brought to
the prediction's grid by nearest-neighbour sampling.
"""

from __future__ import annotations

from collections.abc import Sequence

import torch
import torch.nn.functional as F

from core.errors import InvalidInputError
from schema.config import LossWeights
from schema.records import LossBreakdown


def _check_pair(pred: torch.Tensor, gt: torch.Tensor) -> None:
    if pred.shape != gt.shape:
        raise InvalidInputError(
            f"prediction shape {tuple(pred.shape)} != ground truth shape {tuple(gt.shape)}"
        )


def bce_loss(pred_prob: torch.Tensor, gt: torch.Tensor, eps: float = 1e-7) -> torch.Tensor:
    _check_pair(pred_prob, gt)
    p = pred_prob.clamp(eps, 1 - eps)
    gt = gt.to(p.dtype)
    return -(gt * torch.log(p) + (1 - gt) * torch.log(1 - p)).mean()


def dice_loss(pred_prob: torch.Tensor, gt: torch.Tensor, smooth: float = 1.0) -> torch.Tensor:
    _check_pair(pred_prob, gt)
    gt = gt.to(pred_prob.dtype)
    inter = (pred_prob * gt).sum()
    return 1 - (2 * inter + smooth) / (pred_prob.sum() + gt.sum() + smooth)


def composite_loss(
    pred_prob: torch.Tensor, gt: torch.Tensor, weights: LossWeights | None = None
) -> torch.Tensor:
    w = weights or LossWeights()
    return w.lambda_bce * bce_loss(pred_prob, gt, w.bce_eps) + w.lambda_dice * dice_loss(
        pred_prob, gt, w.dice_smooth
    )


def downsample_gt(gt: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
    """Nearest-neighbour ``D(y)`` onto ``like``'s grid; stays in {0, 1}."""
    if gt.shape[-2:] == like.shape[-2:]:
        return gt
    squeeze = gt.dim() == 2
    g = gt[None, None] if squeeze else gt
    g = F.interpolate(g.to(like.dtype), size=tuple(like.shape[-2:]), mode="nearest")
    return g[0, 0] if squeeze else g


def loss_breakdown(
    final_pred: torch.Tensor,
    quarter_pred: torch.Tensor,
    stage_mask_preds: Sequence[torch.Tensor],
    gt: torch.Tensor,
    weights: LossWeights | None = None,
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    w = weights or LossWeights()
    if len(stage_mask_preds) != w.n_masks:
        raise InvalidInputError(
            f"expected {w.n_masks} mask predictions, got {len(stage_mask_preds)}"
        )
    final = composite_loss(final_pred, gt, w)
    quarter = composite_loss(quarter_pred, downsample_gt(gt, quarter_pred), w)
    masks = sum(
        (composite_loss(p, downsample_gt(gt, p), w) for p in stage_mask_preds),
        start=final.new_zeros(()),
    ) / w.n_masks
    total = final + quarter + masks
    return total, {"final": final, "quarter": quarter, "masks": masks, "total": total}


def total_loss(
    final_pred: torch.Tensor,
    quarter_pred: torch.Tensor,
    stage_mask_preds: Sequence[torch.Tensor],
    gt: torch.Tensor,
    weights: LossWeights | None = None,
) -> torch.Tensor:
    return loss_breakdown(final_pred, quarter_pred, stage_mask_preds, gt, weights)[0]


def breakdown_record(parts: dict[str, torch.Tensor]) -> LossBreakdown:
    return LossBreakdown(**{k: float(v.detach()) for k, v in parts.items()})
