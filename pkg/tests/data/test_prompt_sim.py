"""Tests for simulated mask, point and box prompts."""

import numpy as np
import pytest
from scipy import ndimage

from core.errors import InvalidInputError, PromptSimulationError
from data.prompt_sim import (
    bounding_box,
    box_iou,
    mask_iou,
    rasterize_box,
    rasterize_points,
    simulate_prompt,
)
from data.synthetic import generate_synthetic
from schema.config import PromptSimSpec, SyntheticSceneSpec
from schema.models import ObjectClass, PromptKind


def _gt(seed: int = 0, object_class: ObjectClass = ObjectClass.BUILDING) -> np.ndarray:
    return generate_synthetic(SyntheticSceneSpec(object_class=object_class, seed=seed)).mask


class TestMaskPrompts:
    """Tests for degraded mask prompts."""

    def test_full_overlap_is_ground_truth(self):
        """Should return the ground truth itself at 100%."""
        gt = _gt()
        prompt = simulate_prompt(gt, PromptSimSpec(kind=PromptKind.MASK, target_overlap=100))
        assert np.array_equal(prompt.mask, gt)
        assert prompt.overlap == 100.0

    @pytest.mark.parametrize("object_class", list(ObjectClass))
    @pytest.mark.parametrize("target", [90, 70, 50])
    def test_hits_target(self, object_class, target):
        """Should land within two points of the target on synthetic scenes."""
        for seed in range(5):
            gt = _gt(seed, object_class)
            spec = PromptSimSpec(kind=PromptKind.MASK, target_overlap=target, seed=seed)
            prompt = simulate_prompt(gt, spec)
            assert abs(prompt.overlap - target) <= 2.0
            assert prompt.overlap == pytest.approx(mask_iou(prompt.mask, gt) * 100)

    def test_overlap_decreases_with_target(self):
        """Should produce strictly decreasing IoU across 100, 90, 70 and 50."""
        for seed in range(10):
            gt = _gt(seed)
            overlaps = [
                simulate_prompt(gt, PromptSimSpec(target_overlap=t, seed=seed)).overlap
                for t in (100, 90, 70, 50)
            ]
            assert overlaps == sorted(overlaps, reverse=True)
            assert len(set(overlaps)) == 4

    def test_deterministic(self):
        """Should reproduce the same prompt from the same seed."""
        gt = _gt(1)
        spec = PromptSimSpec(target_overlap=70, seed=9)
        assert np.array_equal(simulate_prompt(gt, spec).mask, simulate_prompt(gt, spec).mask)

    @pytest.mark.parametrize("target", [90, 70, 50])
    @pytest.mark.parametrize("seed", range(6))
    def test_changes_form_one_band(self, seed, target):
        """Should erode or dilate in whole layers plus one arc, leaving no specks or holes."""
        gt = np.zeros((64, 64), dtype=np.uint8)
        gt[16:48, 16:48] = 1
        prompt = simulate_prompt(gt, PromptSimSpec(target_overlap=target, seed=seed))
        _, bands = ndimage.label(prompt.mask != gt, structure=np.ones((3, 3)))
        assert bands == 1
        assert np.array_equal(ndimage.binary_fill_holes(prompt.mask), prompt.mask.astype(bool))
        assert abs(prompt.overlap - target) <= 2.0

    def test_empty_ground_truth_cannot_degrade(self):
        """Should report the best overlap it reached when the target is unreachable."""
        gt = np.zeros((16, 16), dtype=np.uint8)
        with pytest.raises(PromptSimulationError) as info:
            simulate_prompt(gt, PromptSimSpec(target_overlap=50))
        assert info.value.best_overlap == 100.0

    def test_rejects_non_2d(self):
        """Should require a [H, W] mask."""
        with pytest.raises(InvalidInputError, match=r"\[H, W\]"):
            simulate_prompt(np.zeros((1, 4, 4)), PromptSimSpec())


class TestBoxPrompts:
    """Tests for degraded box prompts."""

    def test_box_iou(self):
        """Should compute box IoU from corners."""
        assert box_iou((0, 0, 2, 2), (0, 0, 2, 2)) == 1.0
        assert box_iou((0, 0, 2, 2), (0, 1, 2, 3)) == pytest.approx(1 / 3)
        assert box_iou((0, 0, 1, 1), (5, 5, 6, 6)) == 0.0

    def test_bounding_box_and_raster(self):
        """Should cover exactly the foreground extent."""
        gt = np.zeros((10, 10), dtype=np.uint8)
        gt[2:5, 3:8] = 1
        box = bounding_box(gt)
        assert box == (2.0, 3.0, 5.0, 8.0)
        assert np.array_equal(rasterize_box(box, gt.shape), gt)

    @pytest.mark.parametrize("target", [100, 90, 70, 50])
    def test_hits_target(self, target):
        """Should reach the target box IoU within two points."""
        for seed in range(10):
            spec = PromptSimSpec(kind=PromptKind.BOX, target_overlap=target, seed=seed)
            prompt = simulate_prompt(_gt(seed), spec)
            assert abs(prompt.overlap - target) <= 2.0
            assert prompt.box is not None

    def test_empty_ground_truth(self):
        """Should refuse to box an empty mask."""
        with pytest.raises(InvalidInputError, match="non-empty"):
            simulate_prompt(np.zeros((8, 8)), PromptSimSpec(kind=PromptKind.BOX))


class TestPointPrompts:
    """Tests for degraded point prompts."""

    @pytest.mark.parametrize("target, agree", [(100, 20), (90, 18), (70, 14), (50, 10)])
    def test_agreement_ratio(self, target, agree):
        """Should place round(n * target / 100) cues that agree with the ground truth."""
        gt = _gt(2)
        spec = PromptSimSpec(kind=PromptKind.POINT, target_overlap=target, seed=4)
        prompt = simulate_prompt(gt, spec)
        assert len(prompt.points) == 20
        assert sum(int(gt[r, c]) == label for r, c, label in prompt.points) == agree
        assert prompt.overlap == agree * 5.0
        assert sum(label for _, _, label in prompt.points) == 10

    def test_rasterize_points(self):
        """Should draw positive cues as disks and ignore negatives."""
        out = rasterize_points([(5, 5, 1), (0, 0, 0)], (11, 11))
        assert out[5, 5] == 1
        assert out[0, 0] == 0
        assert out.sum() == 13

    def test_empty_ground_truth(self):
        """Should refuse point prompts on an empty mask."""
        with pytest.raises(InvalidInputError, match="non-empty"):
            simulate_prompt(np.zeros((8, 8)), PromptSimSpec(kind=PromptKind.POINT))
