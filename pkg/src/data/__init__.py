from data.augment import AugmentOp, augment, draw_op, flip, rotate
from data.dataset import SegmentationDataset
from data.manifest import load_split, read_manifest, write_manifest
from data.prompt_sim import (
    SimulatedPrompt,
    bounding_box,
    box_iou,
    mask_iou,
    rasterize_box,
    rasterize_points,
    simulate_prompt,
)
from data.raster import (
    RasterSample,
    Window,
    load_sample,
    probability_to_uint8,
    read_image,
    read_mask,
    write_image,
    write_mask,
    write_probability,
)
from data.regulate import Regulation, regulate, regulate_sample
from data.synthetic import (
    generate_split,
    generate_synthetic,
    scene_seed,
    write_synthetic_dataset,
)
from data.tiling import axis_positions, stitch, tile, tile_windows

__all__ = [
    "AugmentOp",
    "RasterSample",
    "Regulation",
    "SegmentationDataset",
    "SimulatedPrompt",
    "Window",
    "augment",
    "axis_positions",
    "bounding_box",
    "box_iou",
    "draw_op",
    "flip",
    "generate_split",
    "generate_synthetic",
    "load_sample",
    "load_split",
    "mask_iou",
    "probability_to_uint8",
    "rasterize_box",
    "rasterize_points",
    "read_image",
    "read_manifest",
    "read_mask",
    "regulate",
    "regulate_sample",
    "rotate",
    "scene_seed",
    "simulate_prompt",
    "stitch",
    "tile",
    "tile_windows",
    "write_image",
    "write_manifest",
    "write_mask",
    "write_probability",
]
