"""JSON-lines dataset manifests with paths relative to the manifest's directory."""

from __future__ import annotations

import logging
from collections.abc import Iterable
from pathlib import Path

from pydantic import ValidationError

from core.errors import DataError
from data.raster import RasterSample, load_sample
from schema.models import Split
from schema.records import ManifestRecord

logger = logging.getLogger(__name__)


def read_manifest(path: str | Path) -> list[ManifestRecord]:
    manifest = Path(path)
    if not manifest.exists():
        raise DataError(f"manifest {manifest} does not exist")
    records = []
    for lineno, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(ManifestRecord.from_line(line))
        except ValidationError as exc:
            raise DataError(f"{manifest}:{lineno}: invalid manifest entry: {exc}") from exc
    return records


def write_manifest(path: str | Path, records: Iterable[ManifestRecord]) -> Path:
    manifest = Path(path)
    manifest.parent.mkdir(parents=True, exist_ok=True)
    lines = [record.to_line() for record in records]
    manifest.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return manifest


def load_split(
    path: str | Path, split: Split | None = None, *, require_masks: bool = True
) -> list[RasterSample]:
    """Samples of ``split`` (all when ``None``) in manifest order."""
    manifest = Path(path)
    root = manifest.parent
    samples = []
    for record in read_manifest(manifest):
        if split is not None and record.split != split:
            continue
        image, mask = record.resolve(root)
        if mask is None and require_masks:
            raise DataError(f"{record.image} has no ground-truth mask in {manifest}")
        samples.append(load_sample(image, mask))
    logger.info("Loaded %d samples from %s (split=%s)", len(samples), manifest, split)
    return samples
