from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from core.errors import InvalidInputError
from model.features import FeatureMap


@dataclass(frozen=True)
class CrossAttnParams:
    """Projection matrices stored input-major: ``m_q`` is ``[d_v, d_c]``.

    ``m_o`` maps the attended ``d_c`` update back to ``d_v``; it is needed only when
    ``d_c != d_v``.
    """

    m_q: torch.Tensor
    m_k: torch.Tensor
    m_v: torch.Tensor
    m_o: torch.Tensor | None = None

    @property
    def d_c(self) -> int:
        return int(self.m_q.shape[1])

    def __post_init__(self) -> None:
        if self.m_k.shape[1] != self.m_q.shape[1] or self.m_v.shape[1] != self.m_q.shape[1]:
            raise InvalidInputError(
                f"M_q {tuple(self.m_q.shape)}, M_k {tuple(self.m_k.shape)} and "
                f"M_v {tuple(self.m_v.shape)} disagree on d_c"
            )


def prepare_gate(m: torch.Tensor, grid: tuple[int, int]) -> torch.Tensor:
    """Validate a probability map and resample it to ``grid`` as ``[B, 1, h, w]``."""
    if m.dim() == 2:
        m = m[None, None]
    elif m.dim() == 3:
        m = m[:, None]
    if not torch.isfinite(m).all() or m.min() < 0 or m.max() > 1:
        raise InvalidInputError(
            f"gate map must hold probabilities in [0, 1], got range "
            f"[{m.min().item():.4g}, {m.max().item():.4g}]"
        )
    if tuple(m.shape[-2:]) != tuple(grid):
        m = F.interpolate(m, size=grid, mode="bilinear", align_corners=False)
    return m


def cross_masked_attention(
    f_v: FeatureMap | torch.Tensor,
    f_u: FeatureMap | torch.Tensor,
    m: torch.Tensor,
    params: CrossAttnParams,
    return_weights: bool = False,
) -> FeatureMap | torch.Tensor | tuple[torch.Tensor, torch.Tensor]:
    """``F = m * softmax(q k^T / sqrt(d_c)) v + F_v`` with queries from ``f_v``.

    Tokens are the flattened grid cells; ``m`` gates each query token's update.
    """
    v_map = f_v.data if isinstance(f_v, FeatureMap) else f_v
    u_map = f_u.data if isinstance(f_u, FeatureMap) else f_u
    b, d_v, h, w = v_map.shape
    if params.m_q.shape[0] != d_v or params.m_k.shape[0] != u_map.shape[1]:
        raise InvalidInputError(
            f"f_v has {d_v} channels and f_u {u_map.shape[1]}, but M_q is "
            f"{tuple(params.m_q.shape)} and M_k {tuple(params.m_k.shape)}"
        )
    gate = prepare_gate(m, (h, w)).flatten(2).transpose(1, 2)
    tv = v_map.flatten(2).transpose(1, 2)
    tu = u_map.flatten(2).transpose(1, 2)

    q = tv @ params.m_q
    k = tu @ params.m_k
    v = tu @ params.m_v
    weights = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(params.d_c), dim=-1)
    update = weights @ v
    if params.m_o is not None:
        update = update @ params.m_o
    elif update.shape[-1] != d_v:
        raise InvalidInputError(f"d_c {params.d_c} != d_v {d_v} and no output projection given")
    fused = (gate * update + tv).transpose(1, 2).reshape(b, d_v, h, w)
    if return_weights:
        return fused, weights
    if isinstance(f_v, FeatureMap):
        return f_v.with_data(fused)
    return fused


class CrossMaskedAttention(nn.Module):
    """Single-head cross attention from trunk tokens onto adapter tokens."""

    def __init__(self, d_v: int, d_u: int, d_c: int) -> None:
        super().__init__()
        self.m_q = nn.Linear(d_v, d_c, bias=False)
        self.m_k = nn.Linear(d_u, d_c, bias=False)
        self.m_v = nn.Linear(d_u, d_c, bias=False)
        self.m_o = nn.Linear(d_c, d_v, bias=False) if d_c != d_v else None

    def params(self) -> CrossAttnParams:
        return CrossAttnParams(
            m_q=self.m_q.weight.t(),
            m_k=self.m_k.weight.t(),
            m_v=self.m_v.weight.t(),
            m_o=self.m_o.weight.t() if self.m_o is not None else None,
        )

    def forward(self, f_v: FeatureMap, f_u: FeatureMap, m: torch.Tensor) -> FeatureMap:
        out = cross_masked_attention(f_v, f_u, m, self.params())
        assert isinstance(out, FeatureMap)
        return out
