from __future__ import annotations

import math

import torch.nn as nn
from pydantic import BaseModel

from schema.config import LoRAConfig, ModelConfig
from schema.models import LoRAPlacement


class ParamReport(BaseModel):
    total: int
    trunk: int
    learnable: int
    analytic_learnable: int

    def millions(self) -> dict[str, str]:
        """Counts in millions with two decimals, e.g. ``{"total": "0.53", ...}``."""
        return {
            "total": f"{self.total / 1e6:.2f}",
            "trunk": f"{self.trunk / 1e6:.2f}",
            "learnable": f"{self.learnable / 1e6:.2f}",
        }


def _conv(cin: int, cout: int, k: int, bias: bool = True) -> int:
    return cin * cout * k * k + (cout if bias else 0)


def analytic_learnable(cfg: ModelConfig, lora: LoRAConfig) -> int:
    """Learnable parameter count derived from the configs alone."""
    t, a, d = cfg.trunk, cfg.adapter, cfg.decoder
    toggles = cfg.components
    D, C, w, hidden = t.embed_dim, a.channels, d.width, d.mlp_hidden
    scales = a.num_scales if toggles.multiscale else 1

    count = _conv(3, C, 3) + a.num_modules
    count += a.num_modules * (5 * scales - 1) * _conv(C, C, 3)

    if toggles.interaction:
        dc = cfg.cross_dim
        per_stage = D * dc + 2 * C * dc + (dc * D if dc != D else 0)
        count += t.num_stages * per_stage
    count += t.num_stages * _conv(D, 1, 1)
    count += _conv(t.num_stages, 1, 1) + 1

    placement = lora.placement if toggles.lora else LoRAPlacement.FROZEN
    if toggles.decoder:
        steps = int(math.log2(t.patch_size // 4))
        count += _conv(D, w, 1)
        if steps == 0:
            count += _conv(D, w, 1) + _conv(w, w, 1)
        else:
            count += _conv(D, w, 2) + (steps - 1) * _conv(w, w, 2) + steps * _conv(w, w, 2)
        count += _conv(C, w, 3) + _conv(3 * w, 1, 1)
        count += _conv(3 * w + 1, w, 3) + 2 * w
        count += _conv(C, w, 1)
        count += 2 * _conv(w, w, 2) + 2 * (_conv(w, w, 3) + 2 * w)
        if placement.decoder:
            count += lora.rank * ((w + hidden) + (hidden + hidden) + (hidden + w))
        else:
            count += (w * hidden + hidden) + (hidden * hidden + hidden) + (hidden * w + w)
        count += _conv(w, 1, 1)
    else:
        count += _conv(D, w, 1) + _conv(w, 1, 1)

    if placement.encoder:
        count += t.num_blocks * len(lora.targets) * lora.rank * 2 * D
    return count


def parameter_report(model: nn.Module) -> ParamReport:
    total = sum(p.numel() for p in model.parameters())
    trunk = sum(p.numel() for p in model.trunk.parameters())  # type: ignore[union-attr]
    learnable = sum(p.numel() for p in model.parameters() if p.requires_grad)
    return ParamReport(
        total=total,
        trunk=trunk,
        learnable=learnable,
        analytic_learnable=analytic_learnable(model.cfg, model.lora_cfg),  # type: ignore[arg-type]
    )
