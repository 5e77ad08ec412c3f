"""Low-rank adapters on frozen projections.

The effective weight of an adapted projection is ``W + (alpha / rank) * B @ A`` with
``A`` Gaussian and ``B`` zero at initialisation, so an untouched pair adds exactly zero.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping

import torch
import torch.nn as nn
import torch.nn.functional as F

from core.errors import ConfigurationError, InvalidInputError
from schema.models import LORA_TARGET_ORDER, LoRATarget

logger = logging.getLogger(__name__)

DEFAULT_TARGETS = frozenset({LoRATarget.Q, LoRATarget.V})


class LoRAPair(nn.Module):
    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        rank: int,
        alpha: float,
        generator: torch.Generator | None = None,
    ) -> None:
        super().__init__()
        if rank < 1:
            raise ConfigurationError(f"LoRA rank must be >= 1, got {rank}")
        if rank > min(in_dim, out_dim):
            logger.warning(
                "LoRA rank %d is not below min(in=%d, out=%d)", rank, in_dim, out_dim
            )
        self.rank = rank
        self.alpha = float(alpha)
        self.A = nn.Parameter(torch.randn(rank, in_dim, generator=generator) / math.sqrt(rank))
        self.B = nn.Parameter(torch.zeros(out_dim, rank))

    @property
    def scaling(self) -> float:
        return self.alpha / self.rank

    @property
    def in_dim(self) -> int:
        return int(self.A.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.B.shape[0])

    def delta(self, x: torch.Tensor) -> torch.Tensor:
        return self.scaling * F.linear(F.linear(x, self.A), self.B)

    def extra_repr(self) -> str:
        return f"in={self.in_dim}, out={self.out_dim}, rank={self.rank}, alpha={self.alpha}"


def lora_linear(
    x: torch.Tensor,
    weight: torch.Tensor,
    pair: LoRAPair | None = None,
    bias: torch.Tensor | None = None,
) -> torch.Tensor:
    """``x @ W.T (+ bias) + (alpha / rank) * x @ A.T @ B.T``."""
    if x.shape[-1] != weight.shape[1]:
        raise InvalidInputError(
            f"x has last dim {x.shape[-1]} but weight expects {weight.shape[1]} "
            f"(weight shape {tuple(weight.shape)})"
        )
    y = F.linear(x, weight, bias)
    if pair is None:
        return y
    if pair.in_dim != weight.shape[1] or pair.out_dim != weight.shape[0]:
        raise InvalidInputError(
            f"LoRA pair A {tuple(pair.A.shape)} / B {tuple(pair.B.shape)} does not fit "
            f"weight {tuple(weight.shape)}"
        )
    return y + pair.delta(x)


def parse_targets(targets: Iterable[str | LoRATarget]) -> list[LoRATarget]:
    parsed: set[LoRATarget] = set()
    for name in targets:
        try:
            parsed.add(LoRATarget(name))
        except ValueError:
            valid = ", ".join(t.value for t in LORA_TARGET_ORDER)
            raise ConfigurationError(
                f"unknown LoRA target {name!r}; valid names are {valid}"
            ) from None
    if not parsed:
        raise ConfigurationError("at least one LoRA target is required")
    return [t for t in LORA_TARGET_ORDER if t in parsed]


class LoRASet(nn.ModuleDict):
    """Pairs keyed ``"{block}" -> "{target}"``, blocks counted from 1.

    Held as ``model.lora`` this yields state-dict names ``lora.{block}.{target}.A|B``.
    """

    def pairs_for(self, block_index: int) -> Mapping[str, LoRAPair]:
        key = str(block_index)
        if key not in self:
            return {}
        return self[key]  # type: ignore[return-value]

    def num_pairs(self) -> int:
        return sum(len(block) for block in self.values())  # type: ignore[arg-type]

    @torch.no_grad()
    def zero_(self) -> LoRASet:
        for block in self.values():
            for pair in block.values():  # type: ignore[operator]
                pair.B.zero_()
        return self


def attach_lora(
    trunk: nn.Module,
    targets: Iterable[str | LoRATarget] = DEFAULT_TARGETS,
    rank: int = 4,
    alpha: float | None = None,
    seed: int = 0,
) -> LoRASet:
    """One LoRAPair per (trunk block, target projection); the trunk itself is untouched."""
    if rank < 1:
        raise ConfigurationError(f"LoRA rank must be >= 1, got {rank}")
    chosen = parse_targets(targets)
    alpha = 2.0 * rank if alpha is None else alpha
    generator = torch.Generator().manual_seed(seed)
    lora = LoRASet()
    for index, block in trunk.iter_blocks():  # type: ignore[operator]
        pairs = nn.ModuleDict()
        for target in chosen:
            proj: nn.Linear = getattr(block, target.value)
            pairs[target.value] = LoRAPair(
                proj.in_features, proj.out_features, rank, alpha, generator=generator
            )
        lora[str(index)] = pairs
    logger.debug(
        "Attached %d LoRA pairs (rank %d, targets %s)",
        lora.num_pairs(),
        rank,
        [t.value for t in chosen],
    )
    return lora
