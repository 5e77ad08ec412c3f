from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from core.errors import ConfigurationError
from data.raster import RasterSample


@dataclass(frozen=True)
class Regulation:
    """Records a resize so predictions can be returned to the native grid."""

    source_size: tuple[int, int]
    target_size: tuple[int, int]

    @property
    def identity(self) -> bool:
        return self.source_size == self.target_size

    def inverse(self, pred: torch.Tensor, binary: bool = False) -> torch.Tensor:
        """``[..., H', W']`` prediction back to ``source_size``."""
        if self.identity:
            return pred
        return _resize(pred, self.source_size, binary)


def _target(target_size: int | tuple[int, int], patch_size: int) -> tuple[int, int]:
    size = (target_size, target_size) if isinstance(target_size, int) else tuple(target_size)
    for s in size:
        if s < 1 or s % patch_size:
            raise ConfigurationError(
                f"target size {s} is not a positive multiple of patch size {patch_size}"
            )
    return int(size[0]), int(size[1])


def _resize(x: torch.Tensor, size: tuple[int, int], binary: bool) -> torch.Tensor:
    lead = x.shape[:-2]
    flat = x.reshape(-1, 1, *x.shape[-2:])
    if binary:
        out = F.interpolate(flat, size=size, mode="nearest")
    else:
        out = F.interpolate(flat, size=size, mode="bilinear", align_corners=False)
    return out.reshape(*lead, *size)


def regulate(
    image: torch.Tensor,
    target_size: int | tuple[int, int],
    patch_size: int = 16,
    *,
    binary: bool = False,
) -> tuple[torch.Tensor, Regulation]:
    """Bilinear (or nearest for ``binary`` masks) resample of ``[..., H, W]``."""
    size = _target(target_size, patch_size)
    source = (int(image.shape[-2]), int(image.shape[-1]))
    record = Regulation(source_size=source, target_size=size)
    if record.identity:
        return image, record
    if not image.is_floating_point():
        image = image.to(torch.float32)
    return _resize(image, size, binary), record


def regulate_sample(
    sample: RasterSample, target_size: int | tuple[int, int], patch_size: int = 16
) -> tuple[RasterSample, Regulation]:
    image, record = regulate(torch.from_numpy(sample.image), target_size, patch_size)
    if record.identity:
        return sample, record
    image_u8 = image.round().clamp(0, 255).to(torch.uint8).numpy()
    mask: np.ndarray | None = None
    if sample.mask is not None:
        resized, _ = regulate(torch.from_numpy(sample.mask), target_size, patch_size, binary=True)
        mask = resized.round().to(torch.uint8).numpy()
    return sample.with_arrays(image_u8, mask), record
