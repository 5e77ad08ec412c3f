from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from core.errors import InvalidInputError
from model.features import resize

TAU_EPS = 1e-4


@dataclass(frozen=True)
class PromptMask:
    """Hard prompt on the token grid plus the probabilities it was cut from.

    ``data`` equals ``sigmoid(logits) >= tau`` in value; its gradient is the
    straight-through gradient of ``sigmoid(logits - logit(tau))``.
    """

    data: torch.Tensor
    soft: torch.Tensor
    logits: torch.Tensor


def fuse_stage_masks(stage_masks: list[torch.Tensor], fusion: nn.Conv2d) -> torch.Tensor:
    """Concatenate ``[B, 1, h, w]`` stage masks on the first mask's grid and fuse 1x1."""
    if not stage_masks:
        raise InvalidInputError("fuse_stage_masks needs at least one stage mask")
    if fusion.in_channels != len(stage_masks):
        raise InvalidInputError(
            f"fusion kernel takes {fusion.in_channels} channels, got {len(stage_masks)} masks"
        )
    grid = (int(stage_masks[0].shape[-2]), int(stage_masks[0].shape[-1]))
    stacked = torch.cat([resize(m, grid) for m in stage_masks], dim=1)
    return fusion(stacked)


def binarize(p_mask: torch.Tensor, tau: torch.Tensor | float) -> PromptMask:
    tau_t = torch.as_tensor(tau, dtype=p_mask.dtype, device=p_mask.device)
    if not 0.0 < float(tau_t) < 1.0:
        raise InvalidInputError(f"tau must lie in (0, 1), got {float(tau_t)}")
    soft = torch.sigmoid(p_mask)
    hard = (soft >= tau_t).to(p_mask.dtype)
    shifted = torch.sigmoid(p_mask - torch.log(tau_t / (1 - tau_t)))
    data = hard + (shifted - shifted.detach())
    return PromptMask(data=data, soft=soft, logits=p_mask)


class PromptHead(nn.Module):
    """1x1 fusion of the stage masks and a learnable threshold ``tau`` (starts at 0.5).

    ``tau`` is a squashed logit so it stays inside ``(TAU_EPS, 1 - TAU_EPS)`` and keeps a
    gradient everywhere.
    """

    def __init__(self, num_masks: int) -> None:
        super().__init__()
        self.fusion = nn.Conv2d(num_masks, 1, 1)
        self.tau_logit = nn.Parameter(torch.tensor(0.0))

    @property
    def tau(self) -> torch.Tensor:
        return TAU_EPS + (1 - 2 * TAU_EPS) * torch.sigmoid(self.tau_logit)

    def forward(self, stage_masks: list[torch.Tensor]) -> PromptMask:
        return binarize(fuse_stage_masks(stage_masks, self.fusion), self.tau)
