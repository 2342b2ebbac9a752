import sys

import numpy as np
import pytest

from stratclass.data import gen_two_gaussians, gen_twin_moons, write_synthetic_credit_csv
from stratclass.models import LinearModel, MlpModel
from stratclass.training import CROSS_ENTROPY, HINGE, TrainConfig, erm_train


@pytest.fixture(scope="session")
def gaussians():
    return gen_two_gaussians(250, seed=0)


@pytest.fixture(scope="session")
def gaussians_linear(gaussians):
    return erm_train(gaussians, LinearModel.init(2, 0), HINGE, TrainConfig(epochs=50))


@pytest.fixture(scope="session")
def moons():
    return gen_twin_moons(250, 0.1, seed=0)


@pytest.fixture(scope="session")
def moons_erm(moons):
    return erm_train(moons, MlpModel.init((2, 8, 8, 1), 0), CROSS_ENTROPY, TrainConfig(epochs=200))


@pytest.fixture(scope="session")
def credit_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("credit") / "cs-training.csv"
    write_synthetic_credit_csv(path, n=600, seed=3)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
