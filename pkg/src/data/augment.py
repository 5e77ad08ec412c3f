from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from data.raster import RasterSample


@dataclass(frozen=True)
class AugmentOp:
    """Rotate by ``quarter_turns * 90`` degrees, then optionally flip."""

    quarter_turns: int = 0
    flip_h: bool = False
    flip_v: bool = False

    def apply_array(self, arr: np.ndarray) -> np.ndarray:
        out = np.rot90(arr, k=self.quarter_turns % 4, axes=(-2, -1))
        if self.flip_h:
            out = np.flip(out, axis=-1)
        if self.flip_v:
            out = np.flip(out, axis=-2)
        return np.ascontiguousarray(out)

    def apply(self, sample: RasterSample) -> RasterSample:
        mask = self.apply_array(sample.mask) if sample.mask is not None else None
        return sample.with_arrays(self.apply_array(sample.image), mask)


def draw_op(seed: int | np.random.SeedSequence) -> AugmentOp:
    rng = np.random.default_rng(seed)
    k = int(rng.integers(0, 4))
    flips = rng.integers(0, 2, size=2)
    return AugmentOp(quarter_turns=k, flip_h=bool(flips[0]), flip_v=bool(flips[1]))


def augment(sample: RasterSample, seed: int | np.random.SeedSequence) -> RasterSample:
    return draw_op(seed).apply(sample)


def rotate(sample: RasterSample, quarter_turns: int) -> RasterSample:
    return AugmentOp(quarter_turns=quarter_turns).apply(sample)


def flip(sample: RasterSample, horizontal: bool = True) -> RasterSample:
    return AugmentOp(flip_h=horizontal, flip_v=not horizontal).apply(sample)
