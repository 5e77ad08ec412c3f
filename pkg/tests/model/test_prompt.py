"""Tests for mask-prompt fusion and thresholding."""

import math

import pytest
import torch
import torch.nn as nn

from model.prompt import binarize, fuse_stage_masks


def _fusion(weights: list[float], bias: float = 0.0) -> nn.Conv2d:
    conv = nn.Conv2d(len(weights), 1, 1)
    with torch.no_grad():
        conv.weight.copy_(torch.tensor(weights).view(1, -1, 1, 1))
        conv.bias.fill_(bias)
    return conv


class TestBinarize:
    """Tests for cutting prompt logits at tau."""

    def test_worked_example(self):
        """Should keep only the logit whose probability reaches tau = 0.6."""
        logits = torch.tensor([-1.0, 0.0, 2.0], dtype=torch.float64).view(1, 1, 1, 3)
        prompt = binarize(logits, 0.6)
        expected_soft = [1 / (1 + math.exp(1.0)), 0.5, 1 / (1 + math.exp(-2.0))]
        assert prompt.soft.flatten().tolist() == pytest.approx(expected_soft, abs=1e-12)
        assert prompt.soft.flatten().tolist() == pytest.approx([0.2689, 0.5, 0.8808], abs=1e-4)
        assert prompt.data.detach().flatten().tolist() == [0.0, 0.0, 1.0]
        assert torch.equal(prompt.data.detach(), (prompt.soft >= 0.6).to(logits.dtype))

    def test_higher_tau_never_adds_foreground(self):
        """Should shrink or keep the foreground as tau rises."""
        logits = torch.randn(2, 1, 16, 16, generator=torch.Generator().manual_seed(0))
        taus = [0.05, 0.2, 0.4, 0.5, 0.6, 0.8, 0.95]
        hard = [binarize(logits, t).data.detach() for t in taus]
        for lower, higher in zip(hard, hard[1:], strict=False):
            assert torch.all(higher <= lower)
        assert hard[0].sum() > hard[-1].sum()


class TestFuseStageMasks:
    """Tests for the 1x1 fusion of stage masks."""

    def test_weighted_sum_of_certain_masks(self):
        """Should give 0.2 * 1 + 0.8 * 1 = 1 for two all-one masks."""
        masks = [torch.ones(1, 1, 4, 4), torch.ones(1, 1, 4, 4)]
        fused = fuse_stage_masks(masks, _fusion([0.2, 0.8]))
        torch.testing.assert_close(fused, torch.ones(1, 1, 4, 4))

    def test_zero_kernel_returns_bias(self):
        """Should ignore the masks when every kernel weight is zero."""
        masks = [torch.rand(1, 1, 4, 4), torch.rand(1, 1, 8, 8), torch.rand(1, 1, 4, 4)]
        fused = fuse_stage_masks(masks, _fusion([0.0, 0.0, 0.0], bias=-0.7))
        torch.testing.assert_close(fused, torch.full((1, 1, 4, 4), -0.7))
