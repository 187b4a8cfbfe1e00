import json

import pytest

from lcqhnn.config import RunConfig, load_config_file, merge_overrides
from lcqhnn.dataclass import DatasetName, GradientMethod, HeadKind
from lcqhnn.errors import DataError, UsageError


def test_defaults():
    config = RunConfig()
    assert (config.epochs, config.batch_size, config.lr, config.seed) == (50, 64, 0.001, 42)
    assert (config.train_size, config.val_size, config.test_size) == (2048, 512, 1024)
    assert config.dropout_rate == 0.5
    assert config.run_name == "mnist_lcqhnn_seed42"
    assert config.plots is True and RunConfig(plots=False).to_dict()["plots"] is False


@pytest.mark.parametrize("dataset,threshold", [("mnist", 99.0), ("fashion", 90.0), ("cifar10", 90.0)])
def test_dataset_thresholds(dataset, threshold):
    assert RunConfig(dataset=dataset).effective_threshold == threshold
    assert RunConfig(dataset=dataset, convergence_threshold=70.0).effective_threshold == 70.0


def test_enum_strings_parsed():
    config = RunConfig(dataset="fashion", model="cnn16", gradient_method="parameter_shift")
    assert config.dataset is DatasetName.FASHION
    assert config.model is HeadKind.CNN16
    assert config.gradient_method is GradientMethod.PARAMETER_SHIFT


@pytest.mark.parametrize("changes", [
    {"epochs": 0},
    {"batch_size": 0},
    {"lr": 0.0},
    {"lr": float("nan")},
    {"dropout_rate": 1.0},
    {"train_size": 31},
    {"convergence_threshold": 0.0},
    {"snapshot_epochs": (0,)},
    {"checkpoint_epochs": (-1,)},
    {"gradcam_window": 2},
    {"workers": 0},
    {"dataset": "svhn"},
])
def test_invalid_values(changes):
    with pytest.raises(UsageError):
        RunConfig(**changes)


def test_dict_round_trip():
    config = RunConfig(dataset="cifar10", model="cnn4", epochs=3, snapshot_epochs=(1, 3))
    data = config.to_dict()
    assert data["dataset"] == "cifar10" and data["snapshot_epochs"] == [1, 3]
    assert "convergence_threshold" not in data
    assert json.loads(json.dumps(data)) == data
    assert RunConfig.from_dict(data) == config


def test_unknown_keys_rejected():
    with pytest.raises(UsageError, match="learning_rate"):
        RunConfig.from_dict({"learning_rate": 0.1})


def test_replace_revalidates():
    config = RunConfig()
    assert config.replace(model="cnn8").model is HeadKind.CNN8
    with pytest.raises(UsageError):
        config.replace(epochs=-2)


def test_load_config_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"epochs": 5, "seed": 1}))
    assert load_config_file(str(path)) == {"epochs": 5, "seed": 1}
    with pytest.raises(DataError):
        load_config_file(str(tmp_path / "missing.json"))
    path.write_text("[1, 2]")
    with pytest.raises(UsageError):
        load_config_file(str(path))
    path.write_text("{not json")
    with pytest.raises(UsageError):
        load_config_file(str(path))


def test_flags_override_file_values():
    config = merge_overrides({"epochs": 5, "seed": 1}, {"epochs": 2, "seed": None, "lr": 0.1})
    assert (config.epochs, config.seed, config.lr) == (2, 1, 0.1)
