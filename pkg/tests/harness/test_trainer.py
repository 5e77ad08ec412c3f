import json

import pytest
import torch

from core.errors import ConfigurationError
from harness.trainer import RUN_RECORD_NAME, Trainer, build_model, epoch_order, train
from model.trunk import trunk_checksum
from schema.config import LossWeights
from schema.records import RunRecord


def test_epoch_order_is_a_seeded_permutation():
    order = epoch_order(3, 1, 10)
    assert sorted(order) == list(range(10))
    assert order == epoch_order(3, 1, 10)
    assert order != epoch_order(3, 2, 10)


def test_n_masks_must_match_stage_count(tiny_train_config):
    cfg = tiny_train_config.model_copy(update={"loss": LossWeights(n_masks=5)})
    with pytest.raises(ConfigurationError, match="n_masks"):
        build_model(cfg, 0)


def test_no_samples_rejected(tiny_train_config, tmp_path):
    with pytest.raises(ConfigurationError, match="at least one sample"):
        Trainer(tiny_train_config, [], run_dir=tmp_path)


def test_fit_writes_record_and_checkpoints(
    tiny_train_config, train_samples, test_samples, tmp_path
):
    trainer = Trainer(tiny_train_config, train_samples, test_samples, tmp_path / "run")
    before = trunk_checksum(trainer.model.trunk)
    record = trainer.fit()

    assert [e.epoch for e in record.epochs] == [1, 2]
    assert record.epochs[0].lr == pytest.approx(tiny_train_config.lr)
    assert record.epochs[1].lr == pytest.approx(tiny_train_config.lr * 0.97)
    for entry in record.epochs:
        assert entry.metrics is not None
        assert entry.metrics.total == 2 * 32 * 32
        assert torch.isfinite(torch.tensor(entry.loss.total))
        assert (entry.checkpoint / "manifest.json").exists()
    assert trunk_checksum(trainer.model.trunk) == before == record.trunk_checksum

    saved = json.loads((tmp_path / "run" / RUN_RECORD_NAME).read_text())
    assert RunRecord.model_validate(saved).last_epoch == 2


def test_only_adapters_change(tiny_train_config, train_samples, tmp_path):
    trainer = Trainer(tiny_train_config, train_samples, run_dir=tmp_path)
    before = {k: v.clone() for k, v in trainer.model.state_dict().items()}
    trainer.fit(epochs=1)
    trainable = {n for n, _ in trainer.model.trainable_parameters()}
    changed = {k for k, v in trainer.model.state_dict().items() if not torch.equal(v, before[k])}
    assert changed
    assert changed <= trainable


def test_training_is_deterministic(tiny_train_config, train_samples, tmp_path):
    a = Trainer(tiny_train_config, train_samples, run_dir=tmp_path / "a")
    b = Trainer(tiny_train_config, train_samples, run_dir=tmp_path / "b")
    ra, rb = a.fit(epochs=1), b.fit(epochs=1)
    assert ra.epochs[0].loss == rb.epochs[0].loss
    for key, value in a.model.state_dict().items():
        assert torch.equal(value, b.model.state_dict()[key]), key


def test_resume_matches_uninterrupted_run(tiny_train_config, train_samples, tmp_path):
    straight = Trainer(tiny_train_config, train_samples, run_dir=tmp_path / "straight")
    straight.fit()

    first = Trainer(tiny_train_config, train_samples, run_dir=tmp_path / "first")
    first.fit(epochs=1)
    resumed = Trainer(tiny_train_config, train_samples, run_dir=tmp_path / "resumed")
    resumed.resume(first.checkpoint_path(1))
    assert resumed.record.last_epoch == 1
    record = resumed.fit()

    assert [e.epoch for e in record.epochs] == [1, 2]
    assert record.epochs[1].loss == straight.record.epochs[1].loss
    expected = straight.model.state_dict()
    for key, value in resumed.model.state_dict().items():
        assert torch.equal(value, expected[key]), key



def test_train_generates_synthetic_splits(tiny_train_config, tmp_path):
    cfg = tiny_train_config.model_copy(update={"epochs": 1, "warmup_epochs": 0})
    record, model = train(cfg, run_dir=tmp_path / "run")
    assert record.last_epoch == 1
    assert record.epochs[0].metrics is not None
    assert record.trainable_params == sum(p.numel() for _, p in model.trainable_parameters())
