"""Seeded synthetic urban scenes for the three tasks.

Buildings are bright (sometimes rotated) rectangles with speckled roofs, roads are dark
ribbons crossing the tile, water is a smooth thresholded noise field whose shoreline is
blurred into the background.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from core.errors import ConfigurationError
from data.raster import RasterSample, write_image, write_mask
from schema.config import SyntheticDatasetConfig, SyntheticSceneSpec
from schema.models import ObjectClass, Split
from schema.records import ManifestRecord

logger = logging.getLogger(__name__)

MIN_FOREGROUND = 0.05
MAX_FOREGROUND = 0.6
MAX_OBJECTS = 400

Scene = tuple[np.ndarray, np.ndarray]


def _check_density(spec: SyntheticSceneSpec) -> float:
    density = float(spec.density or 0.0)
    if density == 0.0:
        return density
    if not MIN_FOREGROUND <= density <= MAX_FOREGROUND:
        raise ConfigurationError(
            f"density {density} is outside the feasible range "
            f"[{MIN_FOREGROUND}, {MAX_FOREGROUND}] (or exactly 0)"
        )
    return density


def _background(rng: np.random.Generator, size: int) -> np.ndarray:
    base = rng.uniform(70, 130, size=3)
    field = ndimage.gaussian_filter(rng.normal(0, 1, (size, size)), sigma=3) * 25
    img = base[None, None, :] + field[..., None] + rng.normal(0, 6, (size, size, 3))
    return img


def _rectangle(
    cx: float, cy: float, w: float, h: float, angle: float
) -> list[tuple[float, float]]:
    c, s = math.cos(angle), math.sin(angle)
    corners = [(-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)]
    return [(cx + x * c - y * s, cy + x * s + y * c) for x, y in corners]


def _shape_mask(size: int, draw_fn: Callable[[ImageDraw.ImageDraw], None]) -> np.ndarray:
    canvas = Image.new("L", (size, size), 0)
    draw_fn(ImageDraw.Draw(canvas))
    return np.asarray(canvas) > 0


def _buildings(spec: SyntheticSceneSpec, rng: np.random.Generator, density: float) -> Scene:
    size = spec.size
    mask = np.zeros((size, size), dtype=bool)
    img = _background(rng, size)
    lo, hi = float(spec.min_scale or 1), float(spec.max_scale or 1)
    for _ in range(MAX_OBJECTS):
        if mask.mean() >= density:
            break
        w, h = rng.uniform(lo, hi, size=2)
        cx, cy = rng.uniform(0, size, size=2)
        angle = 0.0 if rng.random() < 0.5 else rng.uniform(0, math.pi)
        poly = _rectangle(cx, cy, w, h, angle)
        obj = _shape_mask(size, lambda d, p=poly: d.polygon(p, fill=255))
        if not obj.any() or (mask | obj).mean() > MAX_FOREGROUND:
            continue
        roof = rng.uniform(170, 240, size=3)
        speckle = rng.normal(0, 12, (int(obj.sum()), 3))
        img[obj] = roof[None, :] + speckle
        mask |= obj
    return img, mask


def _roads(spec: SyntheticSceneSpec, rng: np.random.Generator, density: float) -> Scene:
    size = spec.size
    mask = np.zeros((size, size), dtype=bool)
    img = _background(rng, size)
    lo, hi = int(round(spec.min_scale or 3)), int(round(spec.max_scale or 8))
    for i in range(MAX_OBJECTS):
        if mask.mean() >= density:
            break
        width = int(rng.integers(lo, hi + 1))
        a, b, bend = rng.uniform(0, size, size=3)
        # alternate orientation so consecutive roads cross
        if i % 2 == 0:
            pts = [(0.0, a), (size / 2, bend), (float(size), b)]
        else:
            pts = [(a, 0.0), (bend, size / 2), (b, float(size))]
        obj = _shape_mask(
            size, lambda d, p=pts, w=width: d.line(p, fill=255, width=w, joint="curve")
        )
        if not obj.any() or (mask | obj).mean() > MAX_FOREGROUND:
            continue
        asphalt = rng.uniform(25, 55)
        img[obj] = asphalt + rng.normal(0, 4, (int(obj.sum()), 3))
        mask |= obj
    return img, mask


def _water(spec: SyntheticSceneSpec, rng: np.random.Generator, density: float) -> Scene:
    size = spec.size
    img = _background(rng, size)
    sigma = rng.uniform(float(spec.min_scale or 2), float(spec.max_scale or 4))
    field = ndimage.gaussian_filter(rng.normal(0, 1, (size, size)), sigma=sigma, mode="wrap")
    threshold = np.quantile(field, 1.0 - density)
    mask = field > threshold
    tone = np.array([30.0, 60.0, 95.0]) + rng.normal(0, 5, 3)
    blend = ndimage.gaussian_filter(mask.astype(np.float64), sigma=1.5)[..., None]
    img = (1 - blend) * img + blend * (tone[None, None, :] + rng.normal(0, 3, (size, size, 3)))
    return img, mask


_GENERATORS = {
    ObjectClass.BUILDING: _buildings,
    ObjectClass.ROAD: _roads,
    ObjectClass.WATER: _water,
}


def generate_synthetic(spec: SyntheticSceneSpec) -> RasterSample:
    density = _check_density(spec)
    rng = np.random.default_rng(spec.seed)
    source_id = f"{spec.object_class.value}-{spec.seed}"
    if density == 0.0:
        img = _background(rng, spec.size)
        mask = np.zeros((spec.size, spec.size), dtype=bool)
    else:
        img, mask = _GENERATORS[spec.object_class](spec, rng, density)
        fraction = float(mask.mean())
        if not MIN_FOREGROUND <= fraction <= MAX_FOREGROUND:
            raise ConfigurationError(
                f"scene {source_id} reached foreground fraction {fraction:.3f}, "
                f"target density {density} is infeasible at size {spec.size}"
            )
    image = np.clip(np.rint(img), 0, 255).astype(np.uint8).transpose(2, 0, 1)
    return RasterSample(
        image=np.ascontiguousarray(image), mask=mask.astype(np.uint8), source_id=source_id
    )


def scene_seed(base: int, split: Split, index: int) -> int:
    split_no = list(Split).index(split)
    return int(np.random.SeedSequence([base, split_no, index]).generate_state(1)[0])


def _split_counts(cfg: SyntheticDatasetConfig) -> dict[Split, int]:
    return {Split.TRAIN: cfg.train_count, Split.VAL: cfg.val_count, Split.TEST: cfg.test_count}


def generate_split(
    cfg: SyntheticDatasetConfig, split: Split, workers: int = 0
) -> list[RasterSample]:
    """Scenes of one split in index order, whatever the number of workers."""
    specs = [
        SyntheticSceneSpec(
            size=cfg.size, object_class=cfg.object_class, seed=scene_seed(cfg.seed, split, i)
        )
        for i in range(_split_counts(cfg)[split])
    ]
    if workers > 0:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(generate_synthetic, specs))
    return [generate_synthetic(spec) for spec in specs]


def write_synthetic_dataset(
    out_dir: str | Path, cfg: SyntheticDatasetConfig, workers: int = 0
) -> Path:
    """Write PNG pairs and a ``manifest.jsonl`` with paths relative to ``out_dir``."""
    root = Path(out_dir)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    lines = []
    for split in Split:
        for i, sample in enumerate(generate_split(cfg, split, workers)):
            name = f"{split.value}_{i:05d}.png"
            write_image(root / "images" / name, sample.image)
            write_mask(root / "masks" / name, sample.mask)  # type: ignore[arg-type]
            record = ManifestRecord(image=f"images/{name}", mask=f"masks/{name}", split=split)
            lines.append(record.to_line())
    manifest = root / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    logger.info("Wrote %d synthetic %s scenes to %s", len(lines), cfg.object_class, root)
    return manifest
