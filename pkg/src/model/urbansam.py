from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import torch
import torch.nn as nn

from core.errors import ConfigurationError
from model.alignment import CrossMaskedAttention
from model.decoder import ConsistencyDecoder, PlainDecoder
from model.features import FeatureMap, StageBundle, check_same_length, resize
from model.lora import LoRASet, attach_lora
from model.prompt import PromptHead, PromptMask
from model.trunk import Trunk
from model.uscaling import UScalingAdapter
from schema.config import LoRAConfig, ModelConfig
from schema.models import LoRAPlacement

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelOutput:
    seg_logits: torch.Tensor
    quarter_logits: torch.Tensor
    stage_logits: list[torch.Tensor]
    prompt: PromptMask
    bundles: list[StageBundle]

    @property
    def probability(self) -> torch.Tensor:
        return torch.sigmoid(self.seg_logits)

    def mask_probabilities(self) -> list[torch.Tensor]:
        """The four stage masks followed by the fused prompt probabilities."""
        return [torch.sigmoid(s) for s in self.stage_logits] + [self.prompt.soft]


class UrbanSAM(nn.Module):
    """Frozen trunk + U-Scaling adapter + masked cross attention + prompt + decoder.

    ``seed`` initialises every trainable part; the trunk draws from ``cfg.trunk_seed``.
    """

    def __init__(self, cfg: ModelConfig, lora: LoRAConfig | None = None, seed: int = 0) -> None:
        super().__init__()
        self.cfg = cfg
        self.lora_cfg = lora or LoRAConfig()
        toggles = cfg.components
        trunk_cfg = cfg.trunk
        self.trunk = Trunk(trunk_cfg, seed=cfg.trunk_seed)

        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            self.adapter = UScalingAdapter(cfg.adapter, multiscale=toggles.multiscale)
            self.cross_attn = nn.ModuleList(
                CrossMaskedAttention(trunk_cfg.embed_dim, cfg.adapter.channels, cfg.cross_dim)
                for _ in range(trunk_cfg.num_stages if toggles.interaction else 0)
            )
            self.stage_heads = nn.ModuleList(
                nn.Conv2d(trunk_cfg.embed_dim, 1, 1) for _ in range(trunk_cfg.num_stages)
            )
            self.prompt = PromptHead(trunk_cfg.num_stages)
            self.decoder: ConsistencyDecoder | PlainDecoder
            if toggles.decoder:
                self.decoder = ConsistencyDecoder(
                    cfg.decoder, trunk_cfg.embed_dim, cfg.adapter.channels, trunk_cfg.patch_size
                )
            else:
                self.decoder = PlainDecoder(cfg.decoder, trunk_cfg.embed_dim, trunk_cfg.patch_size)

        placement = self.lora_cfg.placement if toggles.lora else LoRAPlacement.FROZEN
        self.placement = placement
        self.lora = LoRASet()
        if placement.encoder:
            self.lora = attach_lora(
                self.trunk,
                self.lora_cfg.targets,
                rank=self.lora_cfg.rank,
                alpha=self.lora_cfg.alpha,
                seed=seed,
            )
        if placement.decoder:
            if not isinstance(self.decoder, ConsistencyDecoder):
                raise ConfigurationError("decoder LoRA needs the hierarchical decoder")
            self.decoder.token_mlp.enable_lora(
                self.lora_cfg.rank, self.lora_cfg.alpha, seed=seed + 1
            )
        logger.debug("UrbanSAM built: placement=%s components=%s", placement, toggles)

    @property
    def grid(self) -> tuple[int, int]:
        g = self.cfg.trunk.grid_size
        return g, g

    def trainable_parameters(self) -> list[tuple[str, nn.Parameter]]:
        return [(n, p) for n, p in self.named_parameters() if p.requires_grad]

    @staticmethod
    def prepare(image: torch.Tensor) -> torch.Tensor:
        """uint8 ``[B, 3, H, W]`` (or ``[3, H, W]``) to float in [0, 1]."""
        if image.dim() == 3:
            image = image[None]
        if image.dtype == torch.uint8:
            return image.float() / 255.0
        return image

    def adapter_exports(self, image: torch.Tensor) -> list[FeatureMap]:
        return [export for export, _ in self.adapter(image)]

    def encode(
        self,
        image: torch.Tensor,
        adapter_feats: Sequence[FeatureMap],
        masks: Sequence[torch.Tensor] | None = None,
    ) -> list[StageBundle]:
        """Run the trunk stage by stage, injecting adapter features after each stage.

        Without explicit ``masks`` the first stage is gated by ones and every later stage
        by the previous stage's mask.
        """
        num_stages = self.cfg.trunk.num_stages
        check_same_length("adapter_feats", adapter_feats, num_stages)
        if masks is not None:
            check_same_length("masks", masks, num_stages)
        stride = self.cfg.trunk.patch_size
        x = self.trunk.patch_embed(image)
        b = x.data.shape[0]
        gate: torch.Tensor = x.data.new_ones(b, 1, *self.grid)
        bundles = []
        for stage in range(1, num_stages + 1):
            x = self.trunk.trunk_stage(x, stage, self.lora)
            f_u = adapter_feats[stage - 1]
            if tuple(f_u.grid) != self.grid:
                f_u = UScalingAdapter.to_token_grid(f_u, self.grid, stride)
            if masks is not None:
                gate = masks[stage - 1]
            if self.cfg.components.interaction:
                x = self.cross_attn[stage - 1](x, f_u, gate)
            logits = self.stage_heads[stage - 1](x.data)
            mask = torch.sigmoid(logits)
            bundles.append(
                StageBundle(stage_index=stage, f_v=x, f_u=f_u, stage_logits=logits, stage_mask=mask)
            )
            gate = mask
        return bundles

    def forward(
        self, image: torch.Tensor, prompt_override: torch.Tensor | None = None
    ) -> ModelOutput:
        x = self.prepare(image)
        exports = self.adapter_exports(x)
        bundles = self.encode(x, exports)
        prompt = self.prompt([bundle.stage_mask for bundle in bundles])
        if prompt_override is not None:
            m_pre = prompt_override.to(x.dtype)
            if m_pre.dim() == 3:
                m_pre = m_pre[:, None]
        else:
            m_pre = prompt.data
        seg, aux = self.decoder(bundles[-1].f_v.data, exports[-1].data, m_pre)
        return ModelOutput(
            seg_logits=seg,
            quarter_logits=aux,
            stage_logits=[bundle.stage_logits for bundle in bundles],
            prompt=prompt,
            bundles=bundles,
        )

    @torch.no_grad()
    def predict_proba(
        self, image: torch.Tensor, prompt_override: torch.Tensor | None = None
    ) -> torch.Tensor:
        return self(image, prompt_override).probability

    @torch.no_grad()
    def predict_prompt(self, image: torch.Tensor) -> torch.Tensor:
        """Hard prompt resampled to the input size, ``[B, 1, H, W]``."""
        x = self.prepare(image)
        out = self(x)
        return resize(out.prompt.data, (int(x.shape[-2]), int(x.shape[-1])), binary=True)
