from __future__ import annotations

from data.manifest import load_split
from data.raster import RasterSample
from data.synthetic import generate_split
from schema.config import DataConfig
from schema.models import Split


def load_samples(
    data: DataConfig, split: Split, *, workers: int = 0, require_masks: bool = True
) -> list[RasterSample]:
    """Samples of one split from the manifest, or generated when no manifest is set."""
    if data.manifest is not None:
        return load_split(data.manifest, split, require_masks=require_masks)
    return generate_split(data.synthetic, split, workers)
