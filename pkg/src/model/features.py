from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from core.errors import ConfigurationError, InvalidInputError


@dataclass(frozen=True)
class FeatureMap:
    """Activations ``[batch, channels, height, width]`` tagged with their scale.

    ``stride`` counts input pixels per cell, so trunk maps have ``stride == patch_size``.
    """

    data: torch.Tensor
    scale_index: int = 0
    stride: int = 1

    def __post_init__(self) -> None:
        if self.data.dim() != 4:
            raise InvalidInputError(
                f"FeatureMap expects [B, C, H, W], got shape {tuple(self.data.shape)}"
            )
        if self.data.shape[-1] < 1 or self.data.shape[-2] < 1:
            raise InvalidInputError(f"FeatureMap has an empty grid: {tuple(self.data.shape)}")
        if self.scale_index < 0:
            raise InvalidInputError(f"scale_index must be >= 0, got {self.scale_index}")

    @property
    def channels(self) -> int:
        return int(self.data.shape[1])

    @property
    def grid(self) -> tuple[int, int]:
        return int(self.data.shape[-2]), int(self.data.shape[-1])

    def with_data(self, data: torch.Tensor) -> FeatureMap:
        return FeatureMap(data=data, scale_index=self.scale_index, stride=self.stride)


@dataclass(frozen=True)
class ScalePyramid:
    """Encoder features of one U-Scaling module, level ``j`` at ``1 / factor**j`` size."""

    levels: list[FeatureMap]
    factor: int = 2

    def __post_init__(self) -> None:
        for j, level in enumerate(self.levels):
            if level.scale_index != j:
                raise InvalidInputError(f"pyramid level {j} has scale_index {level.scale_index}")
            if j:
                prev_h, prev_w = self.levels[j - 1].grid
                h, w = level.grid
                if (prev_h, prev_w) != (h * self.factor, w * self.factor):
                    raise InvalidInputError(
                        f"pyramid levels {j - 1} and {j} differ by more than x{self.factor}: "
                        f"{(prev_h, prev_w)} vs {(h, w)}"
                    )

    def sizes(self) -> list[int]:
        return [level.grid[0] for level in self.levels]


@dataclass(frozen=True)
class StageBundle:
    """Trunk output of one stage, the adapter export injected into it, and the stage mask."""

    stage_index: int
    f_v: FeatureMap
    f_u: FeatureMap
    stage_logits: torch.Tensor
    stage_mask: torch.Tensor


def resize(x: torch.Tensor, size: tuple[int, int], *, binary: bool = False) -> torch.Tensor:
    """Area-average when shrinking, nearest when ``binary``, bilinear when enlarging."""
    if tuple(x.shape[-2:]) == tuple(size):
        return x
    if binary:
        return F.interpolate(x, size=size, mode="nearest")
    if x.shape[-2] >= size[0] and x.shape[-1] >= size[1]:
        return F.adaptive_avg_pool2d(x, size)
    return F.interpolate(x, size=size, mode="bilinear", align_corners=False)


def as_tensor(x: FeatureMap | torch.Tensor) -> torch.Tensor:
    return x.data if isinstance(x, FeatureMap) else x


def check_same_length(name: str, items: Sequence[object], expected: int) -> None:
    if len(items) != expected:
        raise ConfigurationError(f"{name} has {len(items)} entries, expected {expected}")
