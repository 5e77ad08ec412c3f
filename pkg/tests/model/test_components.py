"""Tests for the trunk, the U-Scaling adapter, the prompt head and the decoder."""

import pytest
import torch

from core.errors import ConfigurationError, InvalidInputError
from model.decoder import ConsistencyDecoder, PlainDecoder, decode
from model.features import FeatureMap, ScalePyramid, resize
from model.prompt import PromptHead, binarize, fuse_stage_masks
from model.trunk import Trunk, trunk_checksum
from model.uscaling import UScalingAdapter, UScalingModule, uscale_forward
from schema.config import DecoderConfig, TrunkConfig, UScalingConfig


class TestTrunk:
    """Tests for the frozen trunk."""

    def test_is_frozen_and_seeded(self):
        """Should hold no trainable weights and rebuild identically from its seed."""
        a, b = Trunk(TrunkConfig(), seed=3), Trunk(TrunkConfig(), seed=3)
        assert not any(p.requires_grad for p in a.parameters())
        assert trunk_checksum(a) == trunk_checksum(b)
        assert trunk_checksum(a) != trunk_checksum(Trunk(TrunkConfig(), seed=4))

    def test_stage_outputs(self):
        """Should return one token map per stage on the patch grid."""
        cfg = TrunkConfig()
        outs = Trunk(cfg)(torch.rand(2, 3, 64, 64))
        assert len(outs) == cfg.num_stages
        assert all(o.data.shape == (2, cfg.embed_dim, 4, 4) and o.stride == 16 for o in outs)

    def test_rejects_wrong_image_size(self):
        """Should name both sizes when the image does not match the configuration."""
        with pytest.raises(ConfigurationError, match="32x32 but the trunk is configured for 64"):
            Trunk(TrunkConfig()).patch_embed(torch.rand(1, 3, 32, 32))

    def test_rejects_unknown_stage(self):
        """Should reject stage numbers outside the configured range."""
        with pytest.raises(ConfigurationError, match="out of range"):
            Trunk(TrunkConfig()).stage_blocks(5)


class TestUScaling:
    """Tests for U-Scaling modules and the adapter cascade."""

    def test_fresh_module_is_identity(self):
        """Should return its input while the mapping output convs are zero."""
        module = UScalingModule(4, num_scales=3, phi=2.0)
        x = torch.randn(2, 4, 16, 16)
        out, feats = module(x)
        assert torch.equal(out, x)
        assert [f.shape[-1] for f in feats] == [16, 8, 4]

    def test_rejects_indivisible_input(self):
        """Should name the required divisor."""
        module = UScalingModule(4, num_scales=3, phi=2.0)
        with pytest.raises(ConfigurationError, match="divisor 4"):
            module(torch.randn(1, 4, 10, 10))

    def test_uscale_forward_pyramid(self):
        """Should tag pyramid levels with growing strides."""
        module = UScalingModule(4, num_scales=3, phi=2.0)
        out, pyramid = uscale_forward(module, FeatureMap(torch.randn(1, 4, 16, 16), stride=2))
        assert out.stride == 2
        assert pyramid.sizes() == [16, 8, 4]
        assert [level.stride for level in pyramid.levels] == [2, 4, 8]

    def test_adapter_exports(self):
        """Should export one full-size map per module."""
        cfg = UScalingConfig(num_modules=3, num_scales=2, channels=4)
        outs = UScalingAdapter(cfg)(torch.rand(1, 3, 16, 16))
        assert len(outs) == 3
        assert all(export.data.shape == (1, 4, 16, 16) for export, _ in outs)

    def test_single_scale_adapter(self):
        """Should keep one pyramid level with multiscale switched off."""
        cfg = UScalingConfig(num_modules=2, num_scales=4, channels=4)
        outs = UScalingAdapter(cfg, multiscale=False)(torch.rand(1, 3, 16, 16))
        assert all(len(pyramid.levels) == 1 for _, pyramid in outs)

    def test_pyramid_rejects_bad_levels(self):
        """Should reject levels that are not a factor apart."""
        levels = [
            FeatureMap(torch.zeros(1, 1, 8, 8), scale_index=0),
            FeatureMap(torch.zeros(1, 1, 2, 2), scale_index=1),
        ]
        with pytest.raises(InvalidInputError, match="differ"):
            ScalePyramid(levels)


class TestPrompt:
    """Tests for stage-mask fusion and the learnable threshold."""

    def test_binarize_values_and_gradient(self):
        """Should hold hard values and pass the shifted sigmoid gradient."""
        logits = torch.randn(1, 1, 4, 4, requires_grad=True)
        tau = torch.tensor(0.3, requires_grad=True)
        prompt = binarize(logits, tau)
        assert torch.equal(prompt.data.detach(), (torch.sigmoid(logits) >= 0.3).float())
        prompt.data.sum().backward()
        shifted = torch.sigmoid(logits.detach() - torch.log(torch.tensor(0.3 / 0.7)))
        torch.testing.assert_close(logits.grad, shifted * (1 - shifted))
        assert tau.grad is not None and float(tau.grad) < 0

    @pytest.mark.parametrize("tau", [0.0, 1.0])
    def test_binarize_rejects_degenerate_tau(self, tau):
        """Should require tau strictly inside (0, 1)."""
        with pytest.raises(InvalidInputError):
            binarize(torch.zeros(1, 1, 2, 2), tau)

    def test_head_starts_at_half(self):
        """Should initialise tau at 0.5 and keep it inside (0, 1)."""
        head = PromptHead(3)
        assert float(head.tau) == pytest.approx(0.5)
        with torch.no_grad():
            head.tau_logit.fill_(50.0)
        assert 0 < float(head.tau) < 1

    @pytest.mark.parametrize("logit", [-12.0, 0.0, 12.0])
    def test_tau_keeps_a_gradient(self, logit):
        """Should pass a non-zero gradient to tau even far outside the usual range."""
        head = PromptHead(3)
        with torch.no_grad():
            head.tau_logit.fill_(logit)
        head.tau.backward()
        assert float(head.tau_logit.grad) > 0

    def test_fusion_resamples_to_first_grid(self):
        """Should fuse masks of different sizes on the first mask's grid."""
        head = PromptHead(2)
        fused = fuse_stage_masks([torch.rand(1, 1, 4, 4), torch.rand(1, 1, 8, 8)], head.fusion)
        assert fused.shape == (1, 1, 4, 4)
        with pytest.raises(InvalidInputError, match="takes 2 channels"):
            fuse_stage_masks([torch.rand(1, 1, 4, 4)], head.fusion)


class TestDecoder:
    """Tests for the hierarchical consistency decoder."""

    @pytest.mark.parametrize("patch", [4, 8, 16])
    def test_output_sizes(self, patch):
        """Should return full-size logits and a 1/4-size auxiliary head."""
        decoder = ConsistencyDecoder(DecoderConfig(width=8, mlp_hidden=8), 16, 4, patch)
        f_v = torch.randn(1, 16, 2, 2)
        f_u = torch.randn(1, 4, 2 * patch, 2 * patch)
        seg, aux = decode(decoder, f_v, f_u, torch.rand(1, 1, 2, 2))
        assert seg.shape == (1, 1, 2 * patch, 2 * patch)
        assert aux.shape == (1, 1, 2 * patch // 4, 2 * patch // 4)

    def test_state_shapes(self):
        """Should concatenate branches into H1, H2 and H3 at 1/4 size."""
        decoder = ConsistencyDecoder(DecoderConfig(width=8, mlp_hidden=8), 16, 4, 16)
        state = decoder.decode_state(
            torch.randn(1, 16, 2, 2), torch.randn(1, 4, 32, 32), torch.rand(1, 1, 32, 32)
        )
        assert state.h1.shape == (1, 16, 8, 8)
        assert state.h2.shape == (1, 24, 8, 8)
        assert state.h3.shape == (1, 8, 8, 8)
        assert state.token_weights.shape == (1, 8, 2, 2)
        assert float(state.token_weights.min()) >= 0 and float(state.token_weights.max()) <= 1

    def test_plain_decoder_contract(self):
        """Should keep the output contract without the hierarchy."""
        decoder = PlainDecoder(DecoderConfig(width=8), 16, 16)
        seg, aux = decoder(
            torch.randn(1, 16, 2, 2), torch.randn(1, 4, 32, 32), torch.rand(1, 1, 2, 2)
        )
        assert seg.shape == (1, 1, 32, 32)
        assert aux.shape == (1, 1, 8, 8)

    def test_rejects_bad_patch(self):
        """Should reject patch sizes the ladder cannot climb from."""
        with pytest.raises(ConfigurationError):
            ConsistencyDecoder(DecoderConfig(), 16, 4, 2)


def test_resize_modes():
    x = torch.rand(1, 1, 8, 8)
    torch.testing.assert_close(resize(x, (4, 4)), torch.nn.functional.avg_pool2d(x, 2))
    assert resize(x, (16, 16), binary=True).unique().numel() <= x.unique().numel()
    assert resize(x, (8, 8)) is x
