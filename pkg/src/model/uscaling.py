"""Cascaded U-Scaling adapter.

Each module is a small U-shaped encoder/decoder whose per-scale decoder outputs are
brought back to the input size, scaled by ``phi`` and added to the input::

    out = x + phi * sum_j up(d_j)

With every mapping weight at zero only the residual ``x`` survives.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from core.errors import ConfigurationError
from model.features import FeatureMap, ScalePyramid, resize
from schema.config import UScalingConfig


def _double_conv(channels: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(channels, channels, 3, padding=1),
        nn.ReLU(),
        nn.Conv2d(channels, channels, 3, padding=1),
        nn.ReLU(),
    )


def _mapping(channels: int) -> nn.Sequential:
    # Output conv starts at zero so a fresh module is the identity.
    seq = nn.Sequential(
        nn.Conv2d(channels, channels, 3, padding=1),
        nn.ReLU(),
        nn.Conv2d(channels, channels, 3, padding=1),
    )
    nn.init.zeros_(seq[2].weight)
    nn.init.zeros_(seq[2].bias)
    return seq


class UScalingModule(nn.Module):
    def __init__(self, channels: int, num_scales: int, phi: float, factor: int = 2) -> None:
        super().__init__()
        if num_scales < 1:
            raise ConfigurationError(f"num_scales must be >= 1, got {num_scales}")
        self.num_scales = num_scales
        self.phi = phi
        self.factor = factor
        self.encoders = nn.ModuleList(_double_conv(channels) for _ in range(num_scales))
        self.decoders = nn.ModuleList(_mapping(channels) for _ in range(num_scales))
        self.ups = nn.ModuleList(
            nn.Sequential(
                nn.Upsample(scale_factor=factor, mode="nearest"),
                nn.Conv2d(channels, channels, 3, padding=1),
            )
            for _ in range(num_scales - 1)
        )

    @property
    def divisor(self) -> int:
        return self.factor ** (self.num_scales - 1)

    def _check_input(self, x: torch.Tensor) -> None:
        h, w = x.shape[-2:]
        if h % self.divisor or w % self.divisor:
            raise ConfigurationError(
                f"U-Scaling input {h}x{w} is not divisible by the required divisor "
                f"{self.divisor}"
            )

    def mapping(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        """Residual term ``phi * sum_j up(d_j)`` and the encoder features per scale."""
        self._check_input(x)
        feats: list[torch.Tensor] = []
        h = x
        for j, enc in enumerate(self.encoders):
            if j:
                h = F.max_pool2d(h, self.factor)
            h = enc(h)
            feats.append(h)

        size = (int(x.shape[-2]), int(x.shape[-1]))
        d = self.decoders[-1](feats[-1])
        delta = F.interpolate(d, size=size, mode="nearest")
        for j in range(self.num_scales - 2, -1, -1):
            d = self.decoders[j](feats[j] + self.ups[j](d))
            delta = delta + F.interpolate(d, size=size, mode="nearest")
        return self.phi * delta, feats

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        delta, feats = self.mapping(x)
        return x + delta, feats


def _pyramid(feats: list[torch.Tensor], stride: int, factor: int) -> ScalePyramid:
    levels = [
        FeatureMap(f, scale_index=j, stride=stride * factor**j) for j, f in enumerate(feats)
    ]
    return ScalePyramid(levels=levels, factor=factor)


def uscale_forward(
    module: UScalingModule, x: FeatureMap | torch.Tensor
) -> tuple[FeatureMap, ScalePyramid]:
    stride = x.stride if isinstance(x, FeatureMap) else 1
    data = x.data if isinstance(x, FeatureMap) else x
    out, feats = module(data)
    return FeatureMap(out, scale_index=0, stride=stride), _pyramid(feats, stride, module.factor)


class UScalingAdapter(nn.Module):
    """Conv stem followed by ``num_modules`` chained U-Scaling modules.

    Module ``i`` exports ``prev + w_i * mapping_i(prev)``; ``w_i`` starts at 1.0.
    """

    def __init__(self, cfg: UScalingConfig, multiscale: bool = True) -> None:
        super().__init__()
        self.cfg = cfg
        scales = cfg.num_scales if multiscale else 1
        self.stem = nn.Sequential(
            nn.Conv2d(3, cfg.channels, 3, stride=cfg.stem_stride, padding=1),
            nn.ReLU(),
        )
        self.blocks = nn.ModuleList(
            UScalingModule(cfg.channels, scales, cfg.phi, cfg.downsample_factor)
            for _ in range(cfg.num_modules)
        )
        self.module_weights = nn.Parameter(torch.ones(cfg.num_modules))

    def forward(self, image: torch.Tensor) -> list[tuple[FeatureMap, ScalePyramid]]:
        return self.adapter_stack(FeatureMap(self.stem(image), stride=self.cfg.stem_stride))

    def adapter_stack(self, stem: FeatureMap) -> list[tuple[FeatureMap, ScalePyramid]]:
        outputs = []
        h = stem.data
        for i, block in enumerate(self.blocks):
            delta, feats = block.mapping(h)
            h = h + self.module_weights[i] * delta
            outputs.append(
                (
                    FeatureMap(h, scale_index=0, stride=stem.stride),
                    _pyramid(feats, stem.stride, block.factor),
                )
            )
        return outputs

    @staticmethod
    def to_token_grid(export: FeatureMap, grid: tuple[int, int], stride: int) -> FeatureMap:
        # stem_stride defaults to 1, so the export sits at full resolution and each token cell
        # is the area average of its patch_size x patch_size block rather than a strided sample
        return FeatureMap(resize(export.data, grid), scale_index=0, stride=stride)
