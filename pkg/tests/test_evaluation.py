import math

import numpy as np
import pytest

from stratclass.costs import CostFn
from stratclass.data import Dataset
from stratclass.errors import DataError
from stratclass.evaluation import (ACCURACY, GAMING, EvalGrid, MetricValue, accuracy_decomposition,
                                   binomial_stderr, cross_eval, evaluate, gaming_rate, grid_rows,
                                   kkt_summary, postcheck_violations, read_report, rows_to_grid,
                                   strategic_accuracy, write_report)
from stratclass.models import LinearModel
from stratclass.response import (GRADIENT, IDENTITY, LAGRANGIAN, LINEAR_EXACT, ResponseConfig,
                                 ResponseStrategy)
from stratclass.training import accuracy

ID, EX = ResponseStrategy(IDENTITY), ResponseStrategy(LINEAR_EXACT)


def test_stderr_formula():
    assert binomial_stderr(0.5, 100) == 0.05
    m = MetricValue.from_hits([True, False, True, True])
    assert m.mean == 0.75 and m.n == 4 and m.stderr == math.sqrt(0.75 * 0.25 / 4)
    with pytest.raises(DataError):
        MetricValue.from_hits([])


def test_identity_on_separated_data(gaussians):
    m = LinearModel([1.0, 0.0])
    d = Dataset(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.array([-1, 1]))
    a = strategic_accuracy(m, ID, d)
    assert (a.mean, a.stderr) == (1.0, 0.0)
    assert gaming_rate(m, ID, gaussians).mean == 0.0


def test_constant_classifier_on_balanced_data(gaussians):
    const = LinearModel([0.0, 0.0], 1.0)
    assert strategic_accuracy(const, ID, gaussians).mean == 0.5


def test_linear_gaming_equals_margin_count(gaussians, gaussians_linear):
    m = gaussians_linear
    margin = m.score(gaussians.X) / np.linalg.norm(m.w)
    expect = np.mean((margin > -2) & (margin < 0))
    assert gaming_rate(m, EX, gaussians).mean == expect


def test_evaluate_matches_separate_calls(gaussians, gaussians_linear):
    acc, gam, Z = evaluate(gaussians_linear, EX, gaussians)
    assert acc == strategic_accuracy(gaussians_linear, EX, gaussians)
    assert gam == gaming_rate(gaussians_linear, EX, gaussians)
    assert Z.shape == gaussians.X.shape


def test_decomposition_identity(moons, moons_erm):
    from stratclass.response import respond
    Z = respond(ResponseStrategy(LAGRANGIAN), moons_erm, moons.X)
    d = accuracy_decomposition(moons_erm, moons, Z)
    assert d["strategic"] - d["plain"] == pytest.approx((d["gained"] - d["lost"]) / d["n"], abs=1e-12)
    assert d["strategic"] <= d["plain"] and d["lost"] > 0
    assert postcheck_violations(moons_erm, CostFn(), moons.X, Z) == 0


def test_postcheck_violations_counts():
    m = LinearModel([1.0, 0.0])
    X = np.array([[-1.0, 0.0], [-1.0, 0.0], [-1.0, 0.0]])
    Z = np.array([[0.5, 0.0], [-0.5, 0.0], [-1.0, 0.0]])  # ok, short, unmoved
    assert postcheck_violations(m, CostFn(), X, Z) == 1


def test_cross_eval_grid(gaussians, gaussians_linear):
    models = {"I": gaussians_linear, "GD": gaussians_linear, "LD": gaussians_linear}
    strats = {"Identity": ID, "Gradient": ResponseStrategy(GRADIENT), "Lagrange": ResponseStrategy(LAGRANGIAN)}
    acc, gam = cross_eval(models, strats, gaussians)
    assert acc.means().shape == (3, 3) and len(acc.cells) == 9
    assert gam.cols == ("Gradient", "Lagrange") and gam.means().shape == (3, 2)
    assert acc["I", "Identity"].mean == accuracy(gaussians_linear, gaussians.X, gaussians.y)
    for cell in acc.cells.values():
        assert cell.stderr == pytest.approx(binomial_stderr(cell.mean, cell.n))


def test_grid_requires_all_cells():
    with pytest.raises(ValueError, match="missing"):
        EvalGrid(("I",), ("Identity", "Lagrange"), {("I", "Identity"): MetricValue(1.0, 0.0, 1)})


def test_report_round_trip(tmp_path):
    cells = {(r, c): MetricValue(0.1 + 0.2 * i, 0.01 / 3, 7)
             for i, (r, c) in enumerate([(r, c) for r in ("I", "LD") for c in ("Identity", "Lagrange")])}
    g = EvalGrid(("I", "LD"), ("Identity", "Lagrange"), cells)
    rows = grid_rows("mlp", g, ACCURACY)
    write_report(tmp_path / "r.csv", rows)
    back = read_report(tmp_path / "r.csv")
    assert back == rows
    assert rows_to_grid(back, "mlp", ACCURACY) == g
    assert rows_to_grid(back, "mlp", GAMING).rows == ()
    (tmp_path / "bad.csv").write_text("nope\n")
    with pytest.raises(DataError):
        read_report(tmp_path / "bad.csv")


def test_kkt_summary_linear(gaussians, gaussians_linear):
    s = kkt_summary(gaussians_linear, CostFn(), gaussians.X[:60], ResponseConfig(tol=1e-10, max_iters=20000))
    assert s["moved"] > 0
    assert max(s[k] for k in ("stationarity", "primal_feas_h", "primal_feas_c",
                              "comp_slack_lam", "comp_slack_mu")) < 1e-3
