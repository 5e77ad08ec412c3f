from __future__ import annotations

import hashlib
import logging
from collections.abc import Iterator, Mapping

import torch
import torch.nn as nn
import torch.nn.functional as F

from core.errors import ConfigurationError, NumericalError
from model.features import FeatureMap
from model.lora import LoRAPair, LoRASet, lora_linear
from schema.config import TrunkConfig

logger = logging.getLogger(__name__)


class TrunkBlock(nn.Module):
    """Pre-norm transformer block with separate q/k/v/o projections."""

    def __init__(self, dim: int, num_heads: int, mlp_ratio: float) -> None:
        super().__init__()
        self.num_heads = num_heads
        self.norm1 = nn.LayerNorm(dim)
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.o = nn.Linear(dim, dim)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, dim)

    def _proj(
        self, name: str, x: torch.Tensor, pairs: Mapping[str, LoRAPair]
    ) -> torch.Tensor:
        linear: nn.Linear = getattr(self, name)
        pair = pairs[name] if name in pairs else None
        return lora_linear(x, linear.weight, pair, linear.bias)

    def forward(
        self, tokens: torch.Tensor, pairs: Mapping[str, LoRAPair] | None = None
    ) -> torch.Tensor:
        pairs = pairs or {}
        b, n, d = tokens.shape
        hd = d // self.num_heads
        h = self.norm1(tokens)
        q = self._proj("q", h, pairs).view(b, n, self.num_heads, hd).transpose(1, 2)
        k = self._proj("k", h, pairs).view(b, n, self.num_heads, hd).transpose(1, 2)
        v = self._proj("v", h, pairs).view(b, n, self.num_heads, hd).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-2, -1) / hd**0.5, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        tokens = tokens + self._proj("o", out, pairs)
        return tokens + self.fc2(F.gelu(self.fc1(self.norm2(tokens))))


class Trunk(nn.Module):
    """Frozen ViT trunk standing in for a pre-trained image encoder.

    Weights are drawn from ``seed`` and never trained; adaptation goes through a
    :class:`LoRASet` passed to :meth:`trunk_stage`.
    """

    def __init__(self, cfg: TrunkConfig, seed: int = 0) -> None:
        super().__init__()
        self.cfg = cfg
        grid = cfg.grid_size
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.patch = nn.Conv2d(3, cfg.embed_dim, cfg.patch_size, stride=cfg.patch_size)
            self.pos_embed = nn.Parameter(torch.randn(1, cfg.embed_dim, grid, grid) * 0.02)
            self.blocks = nn.ModuleList(
                TrunkBlock(cfg.embed_dim, cfg.num_heads, cfg.mlp_ratio)
                for _ in range(cfg.num_blocks)
            )
        self.requires_grad_(False)

    def iter_blocks(self) -> Iterator[tuple[int, TrunkBlock]]:
        for i, block in enumerate(self.blocks, start=1):
            yield i, block  # type: ignore[misc]

    def stage_blocks(self, stage: int) -> list[tuple[int, TrunkBlock]]:
        if not 1 <= stage <= self.cfg.num_stages:
            raise ConfigurationError(
                f"stage {stage} out of range 1..{self.cfg.num_stages}"
            )
        per = self.cfg.blocks_per_stage
        first = (stage - 1) * per + 1
        return [(i, self.blocks[i - 1]) for i in range(first, first + per)]  # type: ignore[misc]

    def patch_embed(self, image: torch.Tensor) -> FeatureMap:
        """``[B, 3, S, S]`` image to ``[B, embed_dim, S / patch, S / patch]`` tokens."""
        size = self.cfg.image_size
        if image.dim() != 4 or tuple(image.shape[-2:]) != (size, size):
            got = "x".join(str(s) for s in image.shape[-2:])
            raise ConfigurationError(
                f"image is {got} but the trunk is configured for {size}x{size}"
            )
        x = self.patch(image) + self.pos_embed
        return FeatureMap(x, scale_index=0, stride=self.cfg.patch_size)

    def trunk_stage(
        self, x: FeatureMap | torch.Tensor, stage: int, lora: LoRASet | None = None
    ) -> FeatureMap:
        data = x.data if isinstance(x, FeatureMap) else x
        if data.shape[1] != self.cfg.embed_dim:
            raise ConfigurationError(
                f"stage input has {data.shape[1]} channels, trunk embed_dim is "
                f"{self.cfg.embed_dim}"
            )
        b, d, h, w = data.shape
        tokens = data.flatten(2).transpose(1, 2)
        for index, block in self.stage_blocks(stage):
            pairs = lora.pairs_for(index) if lora is not None else None
            tokens = block(tokens, pairs)
            if not torch.isfinite(tokens).all():
                raise NumericalError(f"non-finite activations after trunk block {index}")
        out = tokens.transpose(1, 2).reshape(b, d, h, w)
        return FeatureMap(out, scale_index=0, stride=self.cfg.patch_size)

    def forward(self, image: torch.Tensor, lora: LoRASet | None = None) -> list[FeatureMap]:
        x = self.patch_embed(image)
        outputs = []
        for stage in range(1, self.cfg.num_stages + 1):
            x = self.trunk_stage(x, stage, lora)
            outputs.append(x)
        return outputs


def trunk_checksum(trunk: nn.Module) -> str:
    """sha256 over the trunk state dict in key order."""
    digest = hashlib.sha256()
    for name, tensor in trunk.state_dict().items():
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()
