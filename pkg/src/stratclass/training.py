"""Losses, ERM training, and repeated empirical gradient descent (REGD).

The optimizer is plain mini-batch gradient descent with a constant step.
ERM and REGD share one epoch loop and one RNG stream, so REGD with the
identity response reproduces ERM bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costs import CostFn
from .data import Dataset
from .errors import NumericalError
from .models import ScoreModel
from .numerics import make_rng
from .response import ResponseStrategy, moved_mask, respond

log = logging.getLogger(__name__)

HINGE = "hinge"
CROSS_ENTROPY = "cross-entropy"
LOSSES = (HINGE, CROSS_ENTROPY)


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def loss(lfn: str, score, y):
    """Return (loss, d loss / d score); works elementwise on arrays."""
    s = np.asarray(score, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    margin = y * s
    if lfn == HINGE:
        val = np.maximum(0.0, 1.0 - margin)
        grad = np.where(margin < 1.0, -y, 0.0)
    elif lfn == CROSS_ENTROPY:
        val = np.logaddexp(0.0, -margin)
        grad = -y * _sigmoid(-margin)
    else:
        raise ValueError(f"unknown loss {lfn!r}; expected one of {LOSSES}")
    if val.ndim == 0:
        return float(val), float(grad)
    return val, grad


def mean_loss(model: ScoreModel, lfn: str, X, y) -> float:
    val, _ = loss(lfn, model.score(X), y)
    return float(np.mean(val))


def accuracy(model: ScoreModel, X, y) -> float:
    return float(np.mean(model.classify(X) == y))


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.05
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    regd_rounds: int = 20
    inner_epochs: int = 5

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.epochs < 0 or self.regd_rounds < 1 or self.inner_epochs < 0:
            raise ValueError("epochs/inner_epochs must be >= 0 and regd_rounds >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)

    HEADER = ("round", "epoch", "loss", "train_accuracy", "moved_fraction")

    def add(self, rnd, epoch, loss_val, acc, moved):
        self.rows.append((rnd, epoch, loss_val, acc, moved))

    @property
    def losses(self) -> list[float]:
        return [r[2] for r in self.rows]

    def to_csv(self, path) -> None:
        lines = [",".join(self.HEADER)]
        for r, e, lv, a, m in self.rows:
            lines.append(f"{r},{e},{lv!r},{a!r},{m!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def _run_epochs(model, lfn, X, y, n_epochs, cfg, rng, trainlog=None, rnd=0, epoch0=0,
                eval_X=None, moved=0.0):
    n = len(X)
    # overflow shows up as a non-finite loss or parameter and is raised below
    with np.errstate(over="ignore", invalid="ignore"):
        for e in range(n_epochs):
            order = rng.permutation(n)
            for bi, start in enumerate(range(0, n, cfg.batch_size)):
                idx = order[start:start + cfg.batch_size]
                s = model.score(X[idx])
                val, dval = loss(lfn, s, y[idx])
                if not np.all(np.isfinite(val)):
                    raise NumericalError(f"non-finite loss at epoch {epoch0 + e}, batch {bi}")
                grads = model.param_grad(X[idx], dval / len(idx))
                model.apply_update(grads, cfg.lr)
                if not all(np.all(np.isfinite(v)) for v in model.params.values()):
                    raise NumericalError(f"non-finite parameters after epoch {epoch0 + e}, batch {bi} "
                                         "(learning rate too large?)")
                model.project()
            if trainlog is not None:
                Xe = X if eval_X is None else eval_X
                trainlog.add(rnd, epoch0 + e, mean_loss(model, lfn, X, y), accuracy(model, Xe, y), moved)


def erm_train(data: Dataset, model: ScoreModel, lfn: str, cfg: TrainConfig,
              trainlog: TrainLog | None = None) -> ScoreModel:
    """Mini-batch gradient descent on mean loss for ``cfg.epochs`` epochs.

    Works on a copy; ICNN weights are projected after every step.
    """
    _check(data, model)
    model = model.copy()
    rng = make_rng(cfg.seed)
    _run_epochs(model, lfn, data.X, data.y, cfg.epochs, cfg, rng, trainlog)
    return model


def regd_train(data: Dataset, model: ScoreModel, lfn: str, strategy: ResponseStrategy,
               cfg: TrainConfig, cfn: CostFn | None = None, trainlog: TrainLog | None = None,
               diagnostics: list | None = None, respond_fn=None) -> ScoreModel:
    """Repeated empirical gradient descent.

    Each round freezes the model, computes every training point's response
    to it once, then trains ``cfg.inner_epochs`` epochs on the responded
    features with the original labels.
    """
    _check(data, model)
    strategy.check_model(model)
    cfn = cfn or CostFn()
    respond_fn = respond_fn or respond
    model = model.copy()
    rng = make_rng(cfg.seed)
    X, y = data.X, data.y
    for r in range(cfg.regd_rounds):
        frozen = model.copy()
        Z = respond_fn(strategy, frozen, X, cfn, diagnostics)
        moved = float(np.mean(moved_mask(X, Z)))
        log.debug("REGD round %d: moved fraction %.4f", r, moved)
        _run_epochs(model, lfn, Z, y, cfg.inner_epochs, cfg, rng, trainlog, rnd=r,
                    epoch0=r * cfg.inner_epochs, moved=moved)
    return model


def _check(data: Dataset, model: ScoreModel) -> None:
    if data.n < 1:
        raise ValueError("empty dataset")
    if data.d != model.input_dim:
        raise ValueError(f"dimension mismatch: data has {data.d} features, model expects {model.input_dim}")
