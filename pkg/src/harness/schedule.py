"""Per-epoch learning rate: linear warmup, then exponential decay.

Epochs are 1-based. During warmup the rate climbs linearly to ``lr`` at epoch
``warmup_epochs``; afterwards it is ``lr * gamma ** (epoch - warmup_epochs)``.
"""

from __future__ import annotations

import torch

from core.errors import ConfigurationError
from schema.config import TrainConfig
from schema.models import Schedule


def lr_at(
    epoch: int,
    lr: float,
    *,
    schedule: Schedule = Schedule.WARMUP_EXP,
    warmup_epochs: int = 0,
    gamma: float = 0.97,
) -> float:
    if epoch < 1:
        raise ConfigurationError(f"epochs are numbered from 1, got {epoch}")
    if schedule == Schedule.NONE:
        return lr
    if epoch <= warmup_epochs:
        return lr * epoch / warmup_epochs
    return lr * gamma ** (epoch - warmup_epochs)


def config_lr(cfg: TrainConfig, epoch: int) -> float:
    return lr_at(
        epoch,
        cfg.lr,
        schedule=cfg.schedule,
        warmup_epochs=cfg.warmup_epochs,
        gamma=cfg.decay_gamma,
    )


def set_lr(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr
