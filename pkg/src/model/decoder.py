"""Hierarchical consistency decoder.

From the token grid the decoder climbs to 1/4 resolution with x2 transposed
convolutions, fuses trunk, adapter, prompt and neck features there (the deep
supervision head reads this level), then climbs two more x2 steps to full size where
the token-weight MLP gates the features before the 1-channel output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from core.errors import ConfigurationError, InvalidInputError
from model.features import resize
from model.lora import LoRAPair, lora_linear
from schema.config import DecoderConfig


@dataclass(frozen=True)
class DecoderState:
    h1: torch.Tensor
    h2: torch.Tensor
    h3: torch.Tensor
    features: torch.Tensor
    token_weights: torch.Tensor
    seg_logits: torch.Tensor
    aux_logits: torch.Tensor


def _ladder(in_ch: int, width: int, steps: int) -> nn.Sequential:
    if steps == 0:
        return nn.Sequential(nn.Conv2d(in_ch, width, 1), nn.GELU())
    layers: list[nn.Module] = []
    for i in range(steps):
        layers += [nn.ConvTranspose2d(in_ch if i == 0 else width, width, 2, stride=2), nn.GELU()]
    return nn.Sequential(*layers)


def _fuse(in_ch: int, width: int, groups: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, width, 3, padding=1), nn.GroupNorm(groups, width), nn.GELU()
    )


class TokenMLP(nn.Module):
    """Three linear layers, ReLU between them, sigmoid on the output."""

    LAYERS = ("fc1", "fc2", "fc3")

    def __init__(self, width: int, hidden: int) -> None:
        super().__init__()
        self.fc1 = nn.Linear(width, hidden)
        self.fc2 = nn.Linear(hidden, hidden)
        self.fc3 = nn.Linear(hidden, width)
        self.lora: nn.ModuleDict | None = None

    def enable_lora(self, rank: int, alpha: float, seed: int = 0) -> None:
        """Freeze the linear weights and adapt them through LoRA pairs instead."""
        generator = torch.Generator().manual_seed(seed)
        self.lora = nn.ModuleDict()
        for name in self.LAYERS:
            layer: nn.Linear = getattr(self, name)
            layer.requires_grad_(False)
            self.lora[name] = LoRAPair(
                layer.in_features, layer.out_features, rank, alpha, generator=generator
            )

    def _layer(self, name: str, x: torch.Tensor) -> torch.Tensor:
        layer: nn.Linear = getattr(self, name)
        pair = self.lora[name] if self.lora is not None else None
        return lora_linear(x, layer.weight, pair, layer.bias)  # type: ignore[arg-type]

    def forward(self, m_fv: torch.Tensor) -> torch.Tensor:
        b, c, h, w = m_fv.shape
        tokens = m_fv.flatten(2).transpose(1, 2)
        x = F.relu(self._layer("fc1", tokens))
        x = F.relu(self._layer("fc2", x))
        x = torch.sigmoid(self._layer("fc3", x))
        return x.transpose(1, 2).reshape(b, c, h, w)


class ConsistencyDecoder(nn.Module):
    def __init__(
        self,
        cfg: DecoderConfig,
        embed_dim: int,
        adapter_channels: int,
        patch_size: int,
    ) -> None:
        super().__init__()
        if patch_size < 4 or patch_size & (patch_size - 1):
            raise ConfigurationError(f"decoder needs a power-of-two patch >= 4, got {patch_size}")
        w = cfg.width
        self.patch_size = patch_size
        steps = int(math.log2(patch_size // 4))
        self.neck = nn.Sequential(nn.Conv2d(embed_dim, w, 1), nn.GELU())
        self.up_v = _ladder(embed_dim, w, steps)
        self.up_m = _ladder(w, w, steps)
        self.proj_u = nn.Conv2d(adapter_channels, w, 3, padding=1)
        self.aux_head = nn.Conv2d(3 * w, 1, 1)
        self.fuse_h3 = _fuse(3 * w + 1, w, cfg.groups)
        self.skip_u = nn.Conv2d(adapter_channels, w, 1)
        self.ups = nn.ModuleList(nn.ConvTranspose2d(w, w, 2, stride=2) for _ in range(2))
        self.refine = nn.ModuleList(_fuse(w, w, cfg.groups) for _ in range(2))
        self.token_mlp = TokenMLP(w, cfg.mlp_hidden)
        self.head = nn.Conv2d(w, 1, 1)

    def mlp_token_weights(self, m_fv: torch.Tensor) -> torch.Tensor:
        return self.token_mlp(m_fv)

    def decode_state(
        self,
        f_v: torch.Tensor,
        f_u: torch.Tensor,
        m_pre: torch.Tensor,
        m_fv: torch.Tensor | None = None,
    ) -> DecoderState:
        grid = (int(f_v.shape[-2]), int(f_v.shape[-1]))
        full = (grid[0] * self.patch_size, grid[1] * self.patch_size)
        quarter = (full[0] // 4, full[1] // 4)
        if m_fv is None:
            m_fv = self.neck(f_v)

        a = self.up_v(f_v)
        b = resize(self.proj_u(f_u), quarter)
        c = self.up_m(m_fv)
        if a.shape[-2:] != b.shape[-2:] or c.shape[-2:] != b.shape[-2:]:
            raise InvalidInputError(
                f"decoder branches disagree: f_v {tuple(a.shape)}, f_u {tuple(b.shape)}, "
                f"m_fv {tuple(c.shape)}"
            )
        h1 = torch.cat([a, b], dim=1)
        h2 = torch.cat([h1, c], dim=1)
        aux = self.aux_head(h2)
        prompt = resize(m_pre, quarter, binary=m_pre.shape[-1] < quarter[1])
        h3 = self.fuse_h3(torch.cat([a, b, prompt, c], dim=1))

        x = h3
        for up, refine in zip(self.ups, self.refine, strict=True):
            x = up(x)
            x = refine(x + resize(self.skip_u(f_u), (int(x.shape[-2]), int(x.shape[-1]))))

        weights = self.mlp_token_weights(m_fv)
        gated = x * F.interpolate(weights, size=full, mode="nearest")
        return DecoderState(
            h1=h1,
            h2=h2,
            h3=h3,
            features=x,
            token_weights=weights,
            seg_logits=self.head(gated),
            aux_logits=aux,
        )

    def forward(
        self,
        f_v: torch.Tensor,
        f_u: torch.Tensor,
        m_pre: torch.Tensor,
        m_fv: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        state = self.decode_state(f_v, f_u, m_pre, m_fv)
        return state.seg_logits, state.aux_logits


class PlainDecoder(nn.Module):
    """Neck, 1x1 head and bilinear upsampling; keeps the output contract only."""

    def __init__(self, cfg: DecoderConfig, embed_dim: int, patch_size: int) -> None:
        super().__init__()
        self.patch_size = patch_size
        self.neck = nn.Sequential(nn.Conv2d(embed_dim, cfg.width, 1), nn.GELU())
        self.head = nn.Conv2d(cfg.width, 1, 1)

    def forward(
        self,
        f_v: torch.Tensor,
        f_u: torch.Tensor,
        m_pre: torch.Tensor,
        m_fv: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        grid = f_v.shape[-2:]
        full = (int(grid[0]) * self.patch_size, int(grid[1]) * self.patch_size)
        logits = self.head(self.neck(f_v) if m_fv is None else m_fv)
        seg = F.interpolate(logits, size=full, mode="bilinear", align_corners=False)
        aux = F.interpolate(
            logits, size=(full[0] // 4, full[1] // 4), mode="bilinear", align_corners=False
        )
        return seg, aux


def decode(
    decoder: nn.Module,
    f_v: torch.Tensor,
    f_u: torch.Tensor,
    m_pre: torch.Tensor,
    m_fv: torch.Tensor | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    return decoder(f_v, f_u, m_pre, m_fv)
