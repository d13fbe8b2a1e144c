"""Shared fixtures: half-moons data, a trained black box and analytic models"""
import numpy as np
import pytest

from blackbox_utils import FunctionModel, train_mlp
from config_utils import HalfMoonsSpec, TrainConfig
from data_utils import generate_half_moons, save_csv
from domain_types import Dataset


@pytest.fixture(scope='session')
def moons() -> Dataset:
    return generate_half_moons(HalfMoonsSpec())


@pytest.fixture(scope='session')
def moons_model(moons):
    cfg = TrainConfig()
    return train_mlp(moons, cfg.hidden, cfg.epochs, cfg.learning_rate, cfg.seed)


@pytest.fixture
def sign_model():
    """Class 1 exactly where x0 > 0"""
    return FunctionModel(lambda x: (x[:, 0] > 0).astype(float), n_features=2)


@pytest.fixture
def constant_model():
    return FunctionModel(lambda x: np.zeros(x.shape[0]), n_features=2)


@pytest.fixture
def square_data() -> Dataset:
    rng = np.random.default_rng(11)
    return Dataset.from_rows(rng.uniform(-4.0, 4.0, size=(400, 2)))


@pytest.fixture
def moons_csv(tmp_path, moons):
    path = tmp_path / 'moons.csv'
    save_csv(moons, str(path))
    return str(path)
