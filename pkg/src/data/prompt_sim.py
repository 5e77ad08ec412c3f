"""Degraded mask, point and box prompts with a controlled overlap to ground truth.

* mask: repeated 3x3 erosion or dilation (chosen at random) of whole boundary layers.
  The last layer is only partly applied, as an angular sweep around the foreground
  centre from a random start, so IoU reaches the target pixel by pixel while the
  changed region stays one contiguous band.
* box: the ground-truth bounding box shifted or rescaled, with the amount found by
  bisection on box IoU.
* point: ``num_points`` labelled cues of which ``round(n * target / 100)`` agree with
  the ground truth at their location.

Overlaps are reported in percent.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from core.errors import InvalidInputError, PromptSimulationError
from schema.config import PromptSimSpec
from schema.models import PromptKind

logger = logging.getLogger(__name__)

Box = tuple[float, float, float, float]
POINT_RADIUS = 2
_SQUARE = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class SimulatedPrompt:
    kind: PromptKind
    mask: np.ndarray
    overlap: float
    points: list[tuple[int, int, int]] | None = None
    box: Box | None = None


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def _simulate_mask(
    gt: np.ndarray, spec: PromptSimSpec, rng: np.random.Generator
) -> SimulatedPrompt:
    target = spec.target_overlap / 100.0
    tol = spec.tolerance / 100.0
    if spec.target_overlap == 100:
        return SimulatedPrompt(PromptKind.MASK, gt.astype(np.uint8), 100.0)

    # one operation per prompt keeps IoU monotone along the walk; dilation cannot go
    # below the foreground fraction
    grow = rng.random() < 0.5 and gt.mean() < target - tol
    current = gt.copy()
    centre = ndimage.center_of_mass(gt) if gt.any() else (np.array(gt.shape) - 1) / 2
    start = rng.uniform(0.0, 2 * math.pi)
    inter, union = int(gt.sum()), int(gt.sum())
    best_iou = 1.0
    for _ in range(spec.max_iterations):
        if grow:
            proposal = ndimage.binary_dilation(current, structure=_SQUARE)
        else:
            proposal = ndimage.binary_erosion(current, structure=_SQUARE)
        changed = np.argwhere(proposal != current)
        if len(changed) == 0:
            break
        angles = np.arctan2(changed[:, 0] - centre[0], changed[:, 1] - centre[1])
        changed = changed[np.argsort((angles - start) % (2 * math.pi), kind="stable")]
        rows, cols = changed[:, 0], changed[:, 1]
        adds = ~current[rows, cols]
        in_gt = gt[rows, cols]
        d_inter = np.where(in_gt, np.where(adds, 1, -1), 0)
        d_union = np.where(in_gt, 0, np.where(adds, 1, -1))
        inters = inter + np.cumsum(d_inter)
        unions = union + np.cumsum(d_union)
        ious = np.where(unions > 0, inters / np.maximum(unions, 1), 1.0)

        k = int(np.argmin(np.abs(ious - target)))
        if abs(ious[k] - target) < abs(best_iou - target):
            best_iou = float(ious[k])
        if abs(ious[k] - target) <= tol:
            current[rows[: k + 1], cols[: k + 1]] = adds[: k + 1]
            achieved = mask_iou(current, gt)
            return SimulatedPrompt(PromptKind.MASK, current.astype(np.uint8), achieved * 100)
        current = proposal
        inter, union = int(inters[-1]), int(unions[-1])

    raise PromptSimulationError(
        f"mask prompt could not reach {spec.target_overlap}% IoU in {spec.max_iterations} "
        f"steps, best {best_iou * 100:.2f}%",
        best_overlap=best_iou * 100,
    )


def bounding_box(gt: np.ndarray) -> Box:
    rows, cols = np.nonzero(gt)
    return float(rows.min()), float(cols.min()), float(rows.max() + 1), float(cols.max() + 1)


def box_iou(a: Box, b: Box) -> float:
    ih = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iw = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ih * iw
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def rasterize_box(box: Box, shape: tuple[int, int]) -> np.ndarray:
    """Cells whose centres fall inside the box."""
    rr = np.arange(shape[0])[:, None] + 0.5
    cc = np.arange(shape[1])[None, :] + 0.5
    inside = (rr >= box[0]) & (rr < box[2]) & (cc >= box[1]) & (cc < box[3])
    return inside.astype(np.uint8)


def _bisect(
    fn: Callable[[float], float], lo: float, hi: float, target: float, steps: int = 60
) -> float:
    """``fn`` decreasing on [lo, hi]; returns x with fn(x) close to ``target``."""
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if fn(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _simulate_box(
    gt: np.ndarray, spec: PromptSimSpec, rng: np.random.Generator
) -> SimulatedPrompt:
    if not gt.any():
        raise InvalidInputError("box prompts need a non-empty ground truth mask")
    ref = bounding_box(gt)
    target = spec.target_overlap / 100.0
    if spec.target_overlap == 100:
        return SimulatedPrompt(PromptKind.BOX, rasterize_box(ref, gt.shape), 100.0, box=ref)

    h, w = ref[2] - ref[0], ref[3] - ref[1]
    cy, cx = (ref[0] + ref[2]) / 2, (ref[1] + ref[3]) / 2
    mode = rng.integers(0, 3)
    if mode == 0:
        angle = rng.uniform(0, 2 * math.pi)
        dy, dx = math.sin(angle), math.cos(angle)

        def make(t: float) -> Box:
            return ref[0] + t * dy, ref[1] + t * dx, ref[2] + t * dy, ref[3] + t * dx

        t = _bisect(lambda t: box_iou(make(t), ref), 0.0, 2.0 * (h + w), target)
    else:
        grow = mode == 1

        def make(t: float) -> Box:
            s = 1.0 + t if grow else 1.0 / (1.0 + t)
            return cy - s * h / 2, cx - s * w / 2, cy + s * h / 2, cx + s * w / 2

        t = _bisect(lambda t: box_iou(make(t), ref), 0.0, 10.0, target)
    box = make(t)
    achieved = box_iou(box, ref) * 100
    if abs(achieved - spec.target_overlap) > spec.tolerance:
        raise PromptSimulationError(
            f"box prompt reached {achieved:.2f}% instead of {spec.target_overlap}%",
            best_overlap=achieved,
        )
    return SimulatedPrompt(PromptKind.BOX, rasterize_box(box, gt.shape), achieved, box=box)


def rasterize_points(points: list[tuple[int, int, int]], shape: tuple[int, int]) -> np.ndarray:
    """Positive cues as filled disks of radius ``POINT_RADIUS``; negatives leave zeros."""
    out = np.zeros(shape, dtype=np.uint8)
    rr, cc = np.ogrid[: shape[0], : shape[1]]
    for r, c, label in points:
        if label:
            out[(rr - r) ** 2 + (cc - c) ** 2 <= POINT_RADIUS**2] = 1
    return out


def _simulate_points(
    gt: np.ndarray, spec: PromptSimSpec, rng: np.random.Generator
) -> SimulatedPrompt:
    if not gt.any():
        raise InvalidInputError("point prompts need a non-empty ground truth mask")
    n = spec.num_points
    n_match = int(math.floor(n * spec.target_overlap / 100 + 0.5))
    labels = np.zeros(n, dtype=np.int64)
    labels[: (n + 1) // 2] = 1
    rng.shuffle(labels)
    matches = np.zeros(n, dtype=bool)
    matches[rng.choice(n, size=n_match, replace=False)] = True

    inside = np.argwhere(gt)
    outside = np.argwhere(~gt)
    # a cue agrees with GT when its label equals the GT value at its location
    wants_inside = labels.astype(bool) == matches
    need_in, need_out = int(wants_inside.sum()), int((~wants_inside).sum())
    if need_in > len(inside) or need_out > len(outside):
        raise PromptSimulationError(
            f"cannot place {need_in} cues inside and {need_out} outside the ground truth",
            best_overlap=0.0,
        )
    picks_in = inside[rng.choice(len(inside), size=need_in, replace=False)]
    picks_out = outside[rng.choice(len(outside), size=need_out, replace=False)]
    points: list[tuple[int, int, int]] = []
    it_in, it_out = iter(picks_in), iter(picks_out)
    for label, here in zip(labels, wants_inside, strict=True):
        r, c = next(it_in) if here else next(it_out)
        points.append((int(r), int(c), int(label)))
    agree = sum(int(gt[r, c]) == label for r, c, label in points)
    return SimulatedPrompt(
        PromptKind.POINT, rasterize_points(points, gt.shape), 100.0 * agree / n, points=points
    )


def simulate_prompt(gt_mask: np.ndarray, spec: PromptSimSpec) -> SimulatedPrompt:
    gt = np.asarray(gt_mask).astype(bool)
    if gt.ndim != 2:
        raise InvalidInputError(f"ground truth must be [H, W], got {gt.shape}")
    rng = np.random.default_rng(spec.seed)
    if spec.kind == PromptKind.MASK:
        prompt = _simulate_mask(gt, spec, rng)
    elif spec.kind == PromptKind.BOX:
        prompt = _simulate_box(gt, spec, rng)
    else:
        prompt = _simulate_points(gt, spec, rng)
    logger.debug(
        "Simulated %s prompt at %.2f%% (target %d%%)",
        spec.kind,
        prompt.overlap,
        spec.target_overlap,
    )
    return prompt
