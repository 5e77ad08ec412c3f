"""Row-major tiling of large rasters and averaging re-assembly.

Positions along an axis of length ``L`` are ``0, s, 2s, ...`` for
``n = ceil(max(L - p, 0) / s) + 1`` patches; the raster is padded at the bottom and
right so the last patch fits. Windows are reported in padded coordinates.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Iterator

import numpy as np

from core.errors import CoverageError, DataError
from data.raster import RasterSample, Window
from schema.config import TilingSpec
from schema.models import PadMode

logger = logging.getLogger(__name__)

MAX_REPORTED_GAPS = 32


def axis_positions(length: int, patch: int, stride: int) -> list[int]:
    n = math.ceil(max(length - patch, 0) / stride) + 1
    return [i * stride for i in range(n)]


def tile_windows(height: int, width: int, spec: TilingSpec) -> list[Window]:
    if height < 1 or width < 1:
        raise DataError(f"cannot tile a degenerate raster of {height}x{width}")
    p, s = spec.patch_size, spec.stride
    return [
        (r, c, p, p)
        for r in axis_positions(height, p, s)
        for c in axis_positions(width, p, s)
    ]


def _pad(arr: np.ndarray, pad_h: int, pad_w: int, mode: PadMode) -> np.ndarray:
    if pad_h == 0 and pad_w == 0:
        return arr
    widths = [(0, 0)] * (arr.ndim - 2) + [(0, pad_h), (0, pad_w)]
    if mode == PadMode.REFLECT:
        return np.pad(arr, widths, mode="reflect")
    return np.pad(arr, widths, mode="constant")


def tile(raster: RasterSample, spec: TilingSpec) -> Iterator[RasterSample]:
    windows = tile_windows(raster.height, raster.width, spec)
    full_h = max(r + h for r, _, h, _ in windows)
    full_w = max(c + w for _, c, _, w in windows)
    pad_h, pad_w = full_h - raster.height, full_w - raster.width
    image = _pad(raster.image, pad_h, pad_w, spec.pad_mode)
    mask = _pad(raster.mask, pad_h, pad_w, spec.pad_mode) if raster.mask is not None else None
    logger.debug(
        "Tiling %s (%dx%d) into %d windows of %d (stride %d)",
        raster.source_id,
        raster.height,
        raster.width,
        len(windows),
        spec.patch_size,
        spec.stride,
    )
    for index, (r, c, h, w) in enumerate(windows):
        yield RasterSample(
            image=np.ascontiguousarray(image[:, r : r + h, c : c + w]),
            mask=None if mask is None else np.ascontiguousarray(mask[r : r + h, c : c + w]),
            source_id=f"{raster.source_id}#{index}",
            window=(r, c, h, w),
        )


def stitch(
    patch_preds: Iterable[tuple[Window, np.ndarray]],
    out_shape: tuple[int, int] | None = None,
) -> np.ndarray:
    """Average overlapping patch predictions; crop to ``out_shape`` when given."""
    patches = list(patch_preds)
    if not patches:
        raise DataError("stitch received no patches")
    canvas_h = max(r + h for (r, _, h, _), _ in patches)
    canvas_w = max(c + w for (_, c, _, w), _ in patches)
    if out_shape is not None:
        canvas_h = max(canvas_h, out_shape[0])
        canvas_w = max(canvas_w, out_shape[1])
    total = np.zeros((canvas_h, canvas_w), dtype=np.float64)
    count = np.zeros((canvas_h, canvas_w), dtype=np.int64)
    for (r, c, h, w), pred in patches:
        if pred.shape != (h, w):
            raise DataError(f"patch at {(r, c)} has shape {pred.shape}, window is {(h, w)}")
        total[r : r + h, c : c + w] += pred
        count[r : r + h, c : c + w] += 1

    out_h, out_w = out_shape if out_shape is not None else (canvas_h, canvas_w)
    covered = count[:out_h, :out_w]
    if not covered.all():
        gaps = np.argwhere(covered == 0)
        listed = [(int(i), int(j)) for i, j in gaps[:MAX_REPORTED_GAPS]]
        raise CoverageError(
            f"{len(gaps)} raster cells are not covered by any window, first {listed}",
            uncovered=[(int(i), int(j)) for i, j in gaps],
        )
    return total[:out_h, :out_w] / covered
