from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from core.errors import DataError, InvalidInputError

Window = tuple[int, int, int, int]


@dataclass(frozen=True)
class RasterSample:
    """uint8 image ``[3, H, W]`` with an optional {0, 1} mask ``[H, W]``.

    ``window`` is ``(row, col, h, w)`` in the (padded) source raster.
    """

    image: np.ndarray
    mask: np.ndarray | None = None
    source_id: str = ""
    window: Window = field(default=(0, 0, 0, 0))

    def __post_init__(self) -> None:
        if self.image.ndim != 3 or self.image.shape[0] != 3:
            raise InvalidInputError(f"image must be [3, H, W], got {self.image.shape}")
        if self.image.dtype != np.uint8:
            raise InvalidInputError(f"image must be uint8, got {self.image.dtype}")
        if self.mask is not None:
            if self.mask.shape != self.image.shape[1:]:
                raise InvalidInputError(
                    f"mask {self.mask.shape} does not match image {self.image.shape[1:]}"
                )
            if not np.isin(self.mask, (0, 1)).all():
                raise InvalidInputError(f"mask of {self.source_id!r} is not binary")
        if self.window == (0, 0, 0, 0):
            object.__setattr__(self, "window", (0, 0, *self.image.shape[1:]))

    @property
    def height(self) -> int:
        return int(self.image.shape[1])

    @property
    def width(self) -> int:
        return int(self.image.shape[2])

    def image_tensor(self) -> torch.Tensor:
        """Float ``[3, H, W]`` in [0, 1]."""
        return torch.from_numpy(self.image.astype(np.float32) / 255.0)

    def mask_tensor(self) -> torch.Tensor:
        if self.mask is None:
            raise DataError(f"sample {self.source_id!r} has no mask")
        return torch.from_numpy(self.mask.astype(np.float32))[None]

    def with_arrays(self, image: np.ndarray, mask: np.ndarray | None) -> RasterSample:
        return replace(self, image=np.ascontiguousarray(image), mask=mask, window=(0, 0, 0, 0))


def read_image(path: str | Path) -> np.ndarray:
    """8-bit RGB PNG/TIFF to uint8 ``[3, H, W]``."""
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def read_mask(path: str | Path) -> np.ndarray:
    """Single-channel mask with {0, 255} (or {0, 1}) values to {0, 1}."""
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise DataError(f"cannot read mask {path}: {exc}") from exc
    values = np.unique(arr)
    if not set(values.tolist()) <= {0, 1, 255}:
        raise DataError(f"mask {path} holds values other than 0/255: {values[:8].tolist()}")
    return (arr > 0).astype(np.uint8)


def load_sample(image_path: str | Path, mask_path: str | Path | None = None) -> RasterSample:
    image = read_image(image_path)
    mask = read_mask(mask_path) if mask_path is not None else None
    return RasterSample(image=image, mask=mask, source_id=Path(image_path).stem)


def write_image(path: str | Path, image: np.ndarray) -> None:
    Image.fromarray(np.ascontiguousarray(image.transpose(1, 2, 0))).save(path)


def write_mask(path: str | Path, mask: np.ndarray) -> None:
    """{0, 1} mask to a {0, 255} single-channel PNG."""
    Image.fromarray((mask.astype(np.uint8) * 255)).save(path)


def probability_to_uint8(prob: np.ndarray) -> np.ndarray:
    """``floor(p * 255 + 0.5)``, i.e. rounded half up."""
    return np.floor(np.clip(prob, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_probability(path: str | Path, prob: np.ndarray) -> None:
    Image.fromarray(probability_to_uint8(prob)).save(path)
