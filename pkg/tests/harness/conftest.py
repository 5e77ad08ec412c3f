import pytest

from data.synthetic import generate_split
from schema.config import DataConfig, LossWeights, SyntheticDatasetConfig, TrainConfig
from schema.models import Split


@pytest.fixture
def tiny_data_config():
    return DataConfig(
        synthetic=SyntheticDatasetConfig(size=32, train_count=4, val_count=2, test_count=2, seed=7)
    )


@pytest.fixture
def tiny_train_config(tiny_model_config, tiny_data_config, tmp_path):
    return TrainConfig(
        model=tiny_model_config,
        loss=LossWeights(n_masks=3),
        data=tiny_data_config,
        epochs=2,
        warmup_epochs=1,
        batch_size=2,
        seed=3,
        output_dir=tmp_path / "run",
    )


@pytest.fixture
def train_samples(tiny_data_config):
    return generate_split(tiny_data_config.synthetic, Split.TRAIN)


@pytest.fixture
def test_samples(tiny_data_config):
    return generate_split(tiny_data_config.synthetic, Split.TEST)
