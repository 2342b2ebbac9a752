import math

import numpy as np
import pytest

from stratclass.data import Dataset, gen_two_gaussians
from stratclass.errors import NumericalError
from stratclass.models import IcnnModel, LinearModel, MlpModel
from stratclass.response import GRADIENT, IDENTITY, LAGRANGIAN, ResponseStrategy, respond
from stratclass.training import (CROSS_ENTROPY, HINGE, TrainConfig, TrainLog, accuracy, erm_train, loss,
                                 regd_train)


def test_loss_examples():
    assert loss(HINGE, 2.0, 1)[0] == 0.0
    assert loss(HINGE, 0.0, 1)[0] == 1.0
    for y in (-1, 1):
        assert loss(CROSS_ENTROPY, 0.0, y)[0] == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        loss("l2", 0.0, 1)


@pytest.mark.parametrize("lfn", [HINGE, CROSS_ENTROPY])
def test_loss_derivative_matches_fd(lfn):
    for s in (-3.0, -0.4, 0.3, 0.6, 2.5):
        for y in (-1, 1):
            fd = (loss(lfn, s + 1e-6, y)[0] - loss(lfn, s - 1e-6, y)[0]) / 2e-6
            assert loss(lfn, s, y)[1] == pytest.approx(fd, abs=1e-6)


def test_cross_entropy_stable_at_large_margins():
    v, g = loss(CROSS_ENTROPY, np.array([-800.0, 800.0]), np.array([1, 1]))
    assert np.all(np.isfinite(v)) and np.all(np.isfinite(g))
    assert v[0] == pytest.approx(800.0)


def test_erm_separable_gaussians():
    data = gen_two_gaussians(100, sigma=0.5, seed=7)
    m = erm_train(data, LinearModel.init(2, 0), HINGE, TrainConfig(epochs=50))
    assert accuracy(m, data.X, data.y) >= 0.99


def test_erm_zero_epochs_returns_init(gaussians):
    m0 = MlpModel.init((2, 4, 1), 3)
    m = erm_train(gaussians, m0, HINGE, TrainConfig(epochs=0))
    assert m == m0 and m is not m0


def test_erm_moons_mlp(moons, moons_erm):
    assert accuracy(moons_erm, moons.X, moons.y) >= 0.95


def test_erm_moons_full_size():
    from stratclass.data import gen_twin_moons
    d = gen_twin_moons(500, 0.1, seed=1)
    m = erm_train(d, MlpModel.init((2, 8, 8, 1), 0), CROSS_ENTROPY, TrainConfig(epochs=100))
    assert accuracy(m, d.X, d.y) >= 0.95


def test_erm_loss_roughly_monotone(moons):
    tl = TrainLog()
    erm_train(moons, MlpModel.init((2, 8, 8, 1), 0), CROSS_ENTROPY, TrainConfig(epochs=60), tl)
    L = tl.losses
    assert len(L) == 60
    # SGD noise allowed: every epoch within 5% of the best loss so far
    best = np.minimum.accumulate(L)
    assert np.all(np.array(L) <= best * 1.05 + 1e-12)
    assert L[-1] < L[0]


def test_erm_deterministic(gaussians):
    a = erm_train(gaussians, MlpModel.init((2, 4, 1), 0), HINGE, TrainConfig(epochs=5, seed=3))
    b = erm_train(gaussians, MlpModel.init((2, 4, 1), 0), HINGE, TrainConfig(epochs=5, seed=3))
    assert a == b


def test_erm_keeps_icnn_feasible(gaussians):
    m = erm_train(gaussians, IcnnModel.init((2, 6, 6, 1), 0), HINGE, TrainConfig(epochs=5, lr=0.5))
    assert all(np.all(m.params[k] >= 0) for k in m.hidden_weight_keys())


def test_erm_non_finite_loss_reports_epoch_and_batch(gaussians):
    m = LinearModel([1e308, 1e308], 0.0)
    with pytest.raises(NumericalError, match=r"epoch 0, batch 0"):
        erm_train(gaussians, m, CROSS_ENTROPY, TrainConfig(epochs=1))


def test_dimension_mismatch(gaussians):
    with pytest.raises(ValueError):
        erm_train(gaussians, LinearModel.init(3, 0), HINGE, TrainConfig(epochs=1))


def test_regd_identity_equals_erm(moons):
    m0 = MlpModel.init((2, 8, 8, 1), 4)
    cfg = TrainConfig(seed=9, regd_rounds=4, inner_epochs=3)
    a = regd_train(moons, m0, CROSS_ENTROPY, ResponseStrategy(IDENTITY), cfg)
    b = erm_train(moons, m0, CROSS_ENTROPY, TrainConfig(seed=9, epochs=12))
    assert a == b
    for k in a.params:
        assert a.params[k].tobytes() == b.params[k].tobytes()


def test_regd_zero_inner_epochs_returns_init(gaussians):
    m0 = LinearModel.init(2, 0)
    cfg = TrainConfig(regd_rounds=1, inner_epochs=0)
    assert regd_train(gaussians, m0, HINGE, ResponseStrategy(LAGRANGIAN), cfg) == m0


def test_regd_responds_once_per_point_per_round(gaussians):
    calls = []

    def counting(strategy, model, X, cfn, diagnostics):
        calls.append(len(X))
        return respond(strategy, model, X, cfn, diagnostics)

    regd_train(gaussians, LinearModel.init(2, 0), HINGE, ResponseStrategy(GRADIENT),
               TrainConfig(regd_rounds=3, inner_epochs=1), respond_fn=counting)
    assert calls == [gaussians.n] * 3


def test_regd_trains_on_responded_features():
    # every negative point sits at margin -0.5; after one round the responses
    # sit on the boundary with label -1, so the model shifts the boundary
    X = np.array([[-0.5, 0.0], [-0.5, 1.0], [2.0, 0.0], [2.0, 1.0]])
    data = Dataset(X, np.array([-1, -1, 1, 1]))
    m0 = LinearModel([1.0, 0.0], 0.0)
    cfg = TrainConfig(regd_rounds=1, inner_epochs=1, batch_size=4, lr=0.1)
    seen = []

    def spy(strategy, model, X, cfn, diagnostics):
        Z = respond(strategy, model, X, cfn, diagnostics)
        seen.append(Z)
        return Z

    m = regd_train(data, m0, HINGE, ResponseStrategy("linear-exact"), cfg, respond_fn=spy)
    assert np.array_equal(seen[0][:2], [[0.0, 0.0], [0.0, 1.0]])
    assert m.params["b"][0] < 0


def test_train_config_validation():
    for bad in ({"lr": 0.0}, {"epochs": -1}, {"regd_rounds": 0}, {"batch_size": 0}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_trainlog_csv(tmp_path, gaussians):
    tl = TrainLog()
    regd_train(gaussians, LinearModel.init(2, 0), HINGE, ResponseStrategy(IDENTITY),
               TrainConfig(regd_rounds=2, inner_epochs=2), trainlog=tl)
    tl.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "round,epoch,loss,train_accuracy,moved_fraction"
    assert len(lines) == 5 and lines[-1].startswith("1,3,")
