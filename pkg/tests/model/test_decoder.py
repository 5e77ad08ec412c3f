"""Tests for the per-token gating of the decoder and the adapter's module weights."""

import pytest
import torch

from model.decoder import ConsistencyDecoder, TokenMLP
from model.features import FeatureMap
from model.uscaling import UScalingAdapter
from schema.config import DecoderConfig, UScalingConfig


def _decoder() -> ConsistencyDecoder:
    return ConsistencyDecoder(DecoderConfig(width=8, mlp_hidden=8), 16, 4, 16)


def _inputs() -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    return torch.randn(1, 16, 2, 2), torch.randn(1, 4, 32, 32), torch.rand(1, 1, 32, 32)


class TestTokenGating:
    """Tests for the token MLP that gates the final features."""

    def test_zero_output_layer_gates_at_half(self):
        """Should give sigmoid(0) = 0.5 on every token when the last layer is zero."""
        decoder = _decoder()
        with torch.no_grad():
            decoder.token_mlp.fc3.weight.zero_()
            decoder.token_mlp.fc3.bias.zero_()
        state = decoder.decode_state(*_inputs())
        assert torch.equal(state.token_weights, torch.full_like(state.token_weights, 0.5))
        torch.testing.assert_close(state.seg_logits, decoder.head(0.5 * state.features))

    def test_unit_gates_reduce_to_plain_head(self, monkeypatch):
        """Should leave the features untouched when every gate is one."""
        decoder = _decoder()
        monkeypatch.setattr(decoder, "mlp_token_weights", lambda m_fv: torch.ones_like(m_fv))
        state = decoder.decode_state(*_inputs())
        torch.testing.assert_close(state.seg_logits, decoder.head(state.features))

    def test_gates_follow_the_stage_mask(self):
        """Should change the weights of a token whose stage features change, and only that one."""
        mlp = TokenMLP(8, 16)
        m_fv = torch.randn(1, 8, 2, 2)
        bumped = m_fv.clone()
        bumped[..., 1, 0] += 3.0
        before, after = mlp(m_fv), mlp(bumped)
        assert not torch.allclose(before[..., 1, 0], after[..., 1, 0])
        mask = torch.ones(2, 2, dtype=torch.bool)
        mask[1, 0] = False
        torch.testing.assert_close(before[..., mask], after[..., mask])

    def test_supplied_stage_features_reach_the_gates(self):
        """Should compute the gates from an explicit m_fv instead of the neck output."""
        decoder = _decoder()
        f_v, f_u, m_pre = _inputs()
        m_fv = torch.randn(1, 8, 2, 2)
        state = decoder.decode_state(f_v, f_u, m_pre, m_fv)
        torch.testing.assert_close(state.token_weights, decoder.token_mlp(m_fv))


class TestAdapterStack:
    """Tests for the learnable per-module weights of the adapter cascade."""

    @pytest.fixture
    def adapter(self):
        adapter = UScalingAdapter(UScalingConfig(num_modules=2, num_scales=2, channels=4))
        # fresh mappings are zero; give them an output so the weights have something to scale
        with torch.no_grad():
            for block in adapter.blocks:
                for dec in block.decoders:
                    dec[2].weight.normal_(std=0.5)
                    dec[2].bias.normal_(std=0.5)
        return adapter

    def test_active_modules_change_the_stem(self, adapter):
        """Should move away from the stem when the module weights are one."""
        stem = FeatureMap(torch.randn(1, 4, 16, 16))
        outs = adapter.adapter_stack(stem)
        assert not torch.allclose(outs[-1][0].data, stem.data)

    def test_zero_weights_shut_off_every_module(self, adapter):
        """Should export the stem unchanged from every module."""
        with torch.no_grad():
            adapter.module_weights.zero_()
        stem = FeatureMap(torch.randn(1, 4, 16, 16))
        for export, _ in adapter.adapter_stack(stem):
            assert torch.equal(export.data, stem.data)

    def test_zero_weight_skips_one_module(self, adapter):
        """Should pass the previous export through a module whose weight is zero."""
        with torch.no_grad():
            adapter.module_weights[1] = 0.0
        outs = adapter.adapter_stack(FeatureMap(torch.randn(1, 4, 16, 16)))
        assert torch.equal(outs[1][0].data, outs[0][0].data)

    def test_token_grid_averages_each_patch_block(self):
        """Should average each stride x stride block of a full-resolution export."""
        export = FeatureMap(torch.randn(1, 4, 16, 16))
        tokens = UScalingAdapter.to_token_grid(export, (4, 4), stride=4)
        assert tokens.stride == 4
        torch.testing.assert_close(tokens.data, torch.nn.functional.avg_pool2d(export.data, 4))
