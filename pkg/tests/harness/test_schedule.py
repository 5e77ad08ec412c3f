import pytest
import torch

from core.errors import ConfigurationError
from harness.schedule import config_lr, lr_at, set_lr
from schema.config import TrainConfig
from schema.models import Schedule, TaskPreset


def test_constant_schedule():
    rates = [lr_at(e, 0.001, schedule=Schedule.NONE, warmup_epochs=0) for e in range(1, 16)]
    assert rates == [0.001] * 15


def test_warmup_climbs_linearly_to_base_rate():
    rates = [lr_at(e, 0.01, warmup_epochs=4) for e in range(1, 5)]
    assert rates == pytest.approx([0.0025, 0.005, 0.0075, 0.01])


def test_decay_after_warmup():
    assert lr_at(5, 0.01, warmup_epochs=4, gamma=0.5) == pytest.approx(0.005)
    assert lr_at(7, 0.01, warmup_epochs=4, gamma=0.5) == pytest.approx(0.00125)


@pytest.mark.parametrize("warmup", [5, 10])
def test_rate_rises_then_falls(warmup):
    rates = [lr_at(e, 0.005, warmup_epochs=warmup) for e in range(1, 3 * warmup)]
    peak = rates.index(max(rates))
    assert peak == warmup - 1
    assert all(a < b for a, b in zip(rates[:peak], rates[1 : peak + 1], strict=True))
    assert all(a > b for a, b in zip(rates[peak:], rates[peak + 1 :], strict=False))


def test_no_warmup_starts_decaying_at_first_epoch():
    assert lr_at(1, 0.01, warmup_epochs=0, gamma=0.9) == pytest.approx(0.009)


def test_epoch_zero_rejected():
    with pytest.raises(ConfigurationError, match="numbered from 1"):
        lr_at(0, 0.01)


def test_config_lr_follows_preset():
    water = TrainConfig(preset=TaskPreset.WATER)
    assert config_lr(water, 1) == config_lr(water, 15) == pytest.approx(0.001)
    road = TrainConfig(preset=TaskPreset.ROAD)
    assert config_lr(road, 5) == pytest.approx(0.005)
    assert config_lr(road, 6) < config_lr(road, 5)


def test_set_lr_updates_all_groups():
    a, b = torch.nn.Parameter(torch.zeros(1)), torch.nn.Parameter(torch.zeros(1))
    opt = torch.optim.SGD([{"params": [a]}, {"params": [b], "lr": 0.5}], lr=0.1)
    set_lr(opt, 0.02)
    assert [g["lr"] for g in opt.param_groups] == [0.02, 0.02]
