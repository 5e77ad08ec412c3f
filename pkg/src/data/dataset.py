from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
import torch
from torch.utils.data import Dataset

from core.errors import DataError
from data.augment import augment
from data.raster import RasterSample
from data.regulate import regulate_sample

logger = logging.getLogger(__name__)


class SegmentationDataset(Dataset[tuple[torch.Tensor, torch.Tensor]]):
    """Samples regulated to ``image_size`` and, when ``augment`` is on, rotated/flipped.

    Augmentation draws from ``(seed, epoch, index)``, so call ``set_epoch`` before each
    pass to get a fresh but reproducible stream.
    """

    def __init__(
        self,
        samples: Sequence[RasterSample],
        image_size: int,
        patch_size: int = 16,
        *,
        augment: bool = False,
        seed: int = 0,
    ) -> None:
        missing = [s.source_id for s in samples if s.mask is None]
        if missing:
            raise DataError(f"{len(missing)} samples have no mask, e.g. {missing[:3]}")
        self.samples = list(samples)
        self.image_size = image_size
        self.patch_size = patch_size
        self.augment = augment
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.samples)

    def sample(self, index: int) -> RasterSample:
        sample, _ = regulate_sample(self.samples[index], self.image_size, self.patch_size)
        if self.augment:
            sample = augment(sample, np.random.SeedSequence([self.seed, self.epoch, index]))
        return sample

    def __getitem__(self, index: int) -> tuple[torch.Tensor, torch.Tensor]:
        sample = self.sample(index)
        return torch.from_numpy(sample.image), sample.mask_tensor()
