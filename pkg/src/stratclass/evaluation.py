"""Strategic accuracy, gaming rate, cross-response grids and report CSVs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .costs import CostFn
from .data import Dataset
from .errors import DataError
from .models import ScoreModel
from .response import (GRADIENT, IDENTITY, LAGRANGIAN, LINEAR_EXACT, DualState, ResponseStrategy,
                       kkt_residuals, moved_mask, post_check, respond, solve_lagrangian)

# row labels (training response) and column labels (evaluation response)
TRAIN_TAGS = {IDENTITY: "I", GRADIENT: "GD", LAGRANGIAN: "LD", LINEAR_EXACT: "EX"}
EVAL_TAGS = {IDENTITY: "Identity", GRADIENT: "Gradient", LAGRANGIAN: "Lagrange", LINEAR_EXACT: "Exact"}

ACCURACY = "accuracy"
GAMING = "gaming"
REPORT_HEADER = ("model_family", "train_response", "eval_response", "metric", "mean", "stderr", "n")


@dataclass(frozen=True)
class MetricValue:
    mean: float
    stderr: float
    n: int

    @classmethod
    def from_hits(cls, hits) -> "MetricValue":
        hits = np.asarray(hits, dtype=bool)
        if hits.size == 0:
            raise DataError("cannot score an empty dataset")
        n = int(hits.size)
        p = float(np.count_nonzero(hits)) / n
        return cls(p, binomial_stderr(p, n), n)


def binomial_stderr(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def _responses(model, strategy, data, cfn, diagnostics, Z):
    if data.n == 0:
        raise DataError("cannot score an empty dataset")
    if Z is None:
        Z = respond(strategy, model, data.X, cfn, diagnostics)
    return np.asarray(Z)


def strategic_accuracy(model: ScoreModel, strategy: ResponseStrategy, data: Dataset,
                       cfn: CostFn | None = None, diagnostics: list | None = None,
                       responses=None) -> MetricValue:
    """Fraction of points classified correctly after responding.

    ``responses`` may carry precomputed ``strategy(x)`` rows to avoid a
    second solve.
    """
    Z = _responses(model, strategy, data, cfn, diagnostics, responses)
    return MetricValue.from_hits(model.classify(Z) == data.y)


def gaming_rate(model: ScoreModel, strategy: ResponseStrategy, data: Dataset,
                cfn: CostFn | None = None, diagnostics: list | None = None,
                responses=None) -> MetricValue:
    """Fraction of all points that moved (denominator is the whole dataset)."""
    Z = _responses(model, strategy, data, cfn, diagnostics, responses)
    return MetricValue.from_hits(moved_mask(data.X, Z))


def evaluate(model, strategy, data, cfn=None, diagnostics=None):
    """One response pass; returns (accuracy, gaming, responses)."""
    Z = _responses(model, strategy, data, cfn, diagnostics, None)
    return (strategic_accuracy(model, strategy, data, responses=Z),
            gaming_rate(model, strategy, data, responses=Z), Z)


def accuracy_decomposition(model: ScoreModel, data: Dataset, Z) -> dict:
    """Split the change in accuracy caused by a response into its two sources.

    A moved point always ends up classified positive, so only two kinds of
    moves change correctness: a positive that was misclassified (gain) and
    a negative that was correctly rejected (loss). The identity
    ``strategic - plain == (gained - lost) / n`` holds exactly.
    """
    X, y = data.X, data.y
    moved = moved_mask(X, Z)
    before = model.classify(X)
    gained = int(np.count_nonzero(moved & (y == 1) & (before == -1)))
    lost = int(np.count_nonzero(moved & (y == -1) & (before == -1)))
    plain = float(np.mean(before == y))
    strat = float(np.mean(model.classify(Z) == y))
    return {"plain": plain, "strategic": strat, "gained": gained, "lost": lost, "n": data.n,
            "moved": int(np.count_nonzero(moved))}


def postcheck_violations(model: ScoreModel, cfn: CostFn, X, Z) -> int:
    """Moved rows that fail h(z) >= 0 or exact cost < 2 (should always be 0)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    mv = moved_mask(X, Z)
    if not mv.any():
        return 0
    ok = (model.score(Z[mv]) >= 0) & (np.asarray(cfn(X[mv], Z[mv])) < 2.0)
    return int(np.count_nonzero(~ok))


# -- grids -------------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalGrid:
    rows: tuple
    cols: tuple
    cells: dict  # (row, col) -> MetricValue

    def __post_init__(self):
        missing = [(r, c) for r in self.rows for c in self.cols if (r, c) not in self.cells]
        if missing:
            raise ValueError(f"grid is missing cells {missing}")

    def __getitem__(self, key) -> MetricValue:
        return self.cells[key]

    def means(self) -> np.ndarray:
        return np.array([[self.cells[r, c].mean for c in self.cols] for r in self.rows])


def cross_eval(models: dict, strategies: dict, data: Dataset, cfn: CostFn | None = None,
               diagnostics: list | None = None, responses_out: dict | None = None):
    """Evaluate every trained model under every response.

    ``models`` maps a training-response tag (I, GD, LD) to a model and
    ``strategies`` maps an evaluation tag (Identity, Gradient, Lagrange) to a
    strategy. Returns ``(accuracy_grid, gaming_grid)``; the gaming grid
    leaves out the identity column.
    """
    acc, gam = {}, {}
    for r, model in models.items():
        if model.input_dim != data.d:
            raise ValueError(f"model {r!r} expects {model.input_dim} features, data has {data.d}")
        for c, strat in strategies.items():
            a, g, Z = evaluate(model, strat, data, cfn, diagnostics)
            acc[r, c] = a
            if strat.tag != IDENTITY:
                gam[r, c] = g
            if responses_out is not None:
                responses_out[r, c] = Z
    rows = tuple(models)
    gcols = tuple(c for c, s in strategies.items() if s.tag != IDENTITY)
    return EvalGrid(rows, tuple(strategies), acc), EvalGrid(rows, gcols, gam)


# -- report CSV ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    model_family: str
    train_response: str
    eval_response: str
    metric: str
    mean: float
    stderr: float
    n: int


def grid_rows(family: str, grid: EvalGrid, metric: str) -> list[ReportRow]:
    out = []
    for r in grid.rows:
        for c in grid.cols:
            m = grid[r, c]
            out.append(ReportRow(family, r, c, metric, m.mean, m.stderr, m.n))
    return out


def rows_to_grid(rows, family: str, metric: str) -> EvalGrid:
    sel = [r for r in rows if r.model_family == family and r.metric == metric]
    rtags = tuple(dict.fromkeys(r.train_response for r in sel))
    ctags = tuple(dict.fromkeys(r.eval_response for r in sel))
    cells = {(r.train_response, r.eval_response): MetricValue(r.mean, r.stderr, r.n) for r in sel}
    return EvalGrid(rtags, ctags, cells)


def write_report(path, rows) -> None:
    lines = [",".join(REPORT_HEADER)]
    for r in rows:
        lines.append(f"{r.model_family},{r.train_response},{r.eval_response},{r.metric},"
                     f"{r.mean!r},{r.stderr!r},{r.n}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_report(path) -> list[ReportRow]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"report not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        if tuple(next(reader, ())) != REPORT_HEADER:
            raise DataError(f"{path}: not a report CSV (bad header)")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.append(ReportRow(row[0], row[1], row[2], row[3], float(row[4]), float(row[5]), int(row[6])))
            except (IndexError, ValueError):
                raise DataError(f"{path}: malformed row {lineno}") from None
    return out


# -- KKT diagnostics ------------------------------------------------------------------------

KKT_FIELDS = ("stationarity", "primal_feas_h", "primal_feas_c", "comp_slack_lam", "comp_slack_mu")


def kkt_summary(model: ScoreModel, cfn: CostFn, X, cfg) -> dict:
    """Run the dual solver and report the worst KKT residuals over moved points."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    st = solve_lagrangian(model, cfn, X, cfg)
    Z = np.array([post_check(model, cfn, x, z) for x, z in zip(X, st.z)])
    mv = moved_mask(X, Z)
    out = {"n": len(X), "moved": int(np.count_nonzero(mv)),
           "converged": int(np.count_nonzero(st.converged[mv]))}
    if not mv.any():
        return dict(out, **{f: 0.0 for f in KKT_FIELDS})
    sub = DualState(st.z[mv], st.lam[mv], st.mu[mv], st.iters[mv], st.converged[mv], st.failed[mv])
    res = kkt_residuals(model, cfn, X[mv], sub, cfg.eps)
    return dict(out, **{f: float(np.max(getattr(res, f))) for f in KKT_FIELDS})
