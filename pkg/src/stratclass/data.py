"""Datasets: synthetic generators, credit CSV ingestion, preprocessing, splits."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError
from .numerics import make_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y)
        if X.ndim != 2 or len(X) < 1:
            raise DataError(f"features must be a nonempty (n, d) matrix, got shape {X.shape}")
        if y.shape != (len(X),):
            raise DataError(f"labels shape {y.shape} does not match {len(X)} rows")
        if not np.all(np.isin(y, (-1, 1))):
            raise DataError("labels must be -1 or +1")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y.astype(np.int64))

    @property
    def n(self) -> int:
        return len(self.X)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], dict(self.meta))


# -- generators ------------------------------------------------------------------


def gen_two_gaussians(n_per_class: int = 250, mean_neg=(-2.0, 0.0), mean_pos=(2.0, 0.0),
                      sigma: float = 0.7, seed: int = 0) -> Dataset:
    """Two isotropic Gaussian blobs, negatives first, balanced."""
    if n_per_class < 1 or not sigma > 0:
        raise ValueError("need n_per_class >= 1 and sigma > 0")
    rng = make_rng(seed)
    mn = np.asarray(mean_neg, dtype=np.float64)
    mp = np.asarray(mean_pos, dtype=np.float64)
    neg = mn + sigma * rng.standard_normal((n_per_class, mn.size))
    pos = mp + sigma * rng.standard_normal((n_per_class, mp.size))
    X = np.vstack([neg, pos])
    y = np.concatenate([-np.ones(n_per_class), np.ones(n_per_class)]).astype(np.int64)
    meta = {"source": "two-gaussians", "seed": seed, "n_per_class": n_per_class,
            "mean_neg": tuple(mn), "mean_pos": tuple(mp), "sigma": sigma}
    return Dataset(X, y, meta)


def gen_twin_moons(n_per_class: int = 500, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaving half circles.

    Upper arc (cos t, sin t) is the negative class, lower arc
    (1 - cos t, 0.5 - sin t) the positive class, t ~ U[0, pi].
    """
    if n_per_class < 1 or noise < 0:
        raise ValueError("need n_per_class >= 1 and noise >= 0")
    rng = make_rng(seed)
    t_up = rng.uniform(0.0, math.pi, n_per_class)
    t_lo = rng.uniform(0.0, math.pi, n_per_class)
    upper = np.column_stack([np.cos(t_up), np.sin(t_up)])
    lower = np.column_stack([1.0 - np.cos(t_lo), 0.5 - np.sin(t_lo)])
    X = np.vstack([upper, lower])
    if noise > 0:
        X = X + noise * rng.standard_normal(X.shape)
    y = np.concatenate([-np.ones(n_per_class), np.ones(n_per_class)]).astype(np.int64)
    meta = {"source": "twin-moons", "seed": seed, "n_per_class": n_per_class, "noise": noise}
    return Dataset(X, y, meta)


# -- splitting ----------------------------------------------------------------------


def _split_indices(n: int, test_fraction: float, seed: int):
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test > n - 1:
        raise DataError(f"splitting {n} rows at fraction {test_fraction} leaves an empty side")
    perm = make_rng(seed).permutation(n)
    return perm[n_test:], perm[:n_test]


def split(data: Dataset, test_fraction: float = 0.2, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then partition into (train, test)."""
    tr, te = _split_indices(data.n, test_fraction, seed)
    meta = dict(data.meta, split_seed=seed, test_fraction=test_fraction)
    return Dataset(data.X[tr], data.y[tr], meta), Dataset(data.X[te], data.y[te], meta)


# -- credit CSV ---------------------------------------------------------------------


@dataclass
class PreprocessSpec:
    """What to do with a raw credit table, plus the statistics learned on
    the training rows (filled in by :meth:`fit`)."""

    label_column: str = "SeriousDlqin2yrs"
    # raw label value -> +-1; distress (1) is the unfavourable class
    label_map: dict = field(default_factory=lambda: {"1": -1, "0": 1})
    drop_columns: tuple = ("",)
    columns: list | None = None
    medians: np.ndarray | None = None
    means: np.ndarray | None = None
    stds: np.ndarray | None = None
    dropped_constant: list = field(default_factory=list)

    @property
    def fitted(self) -> bool:
        return self.means is not None

    def fit(self, raw: np.ndarray, columns: list[str]) -> "PreprocessSpec":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-missing column
            med = np.nanmedian(raw, axis=0)
        med = np.where(np.isnan(med), 0.0, med)
        filled = np.where(np.isnan(raw), med, raw)
        mean = filled.mean(axis=0)
        std = filled.std(axis=0)
        keep = std > 0
        dropped = [c for c, k in zip(columns, keep) if not k]
        for c in dropped:
            log.warning("dropping zero-variance feature %r", c)
        return replace(
            self,
            columns=[c for c, k in zip(columns, keep) if k],
            medians=med[keep],
            means=mean[keep],
            stds=std[keep],
            dropped_constant=dropped,
        )

    def transform(self, raw: np.ndarray, columns: list[str]) -> np.ndarray:
        if not self.fitted:
            raise ValueError("preprocessing spec has not been fitted")
        pos = {c: i for i, c in enumerate(columns)}
        missing = [c for c in self.columns if c not in pos]
        if missing:
            raise DataError(f"columns missing from table: {missing}")
        A = raw[:, [pos[c] for c in self.columns]]
        A = np.where(np.isnan(A), self.medians, A)
        return (A - self.means) / self.stds

    def record(self) -> dict:
        return {
            "columns": list(self.columns or []),
            "medians": [float(v) for v in self.medians],
            "means": [float(v) for v in self.means],
            "stds": [float(v) for v in self.stds],
            "dropped_constant": list(self.dropped_constant),
        }


@dataclass(frozen=True)
class RawTable:
    columns: list[str]
    values: np.ndarray  # NaN marks a missing cell
    labels: np.ndarray
    path: str


def read_credit_table(path, spec: PreprocessSpec | None = None) -> RawTable:
    """Parse a GiveMeSomeCredit-style CSV (header row, empty = missing)."""
    spec = spec or PreprocessSpec()
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataError(f"{path}: empty file")
        if spec.label_column not in header:
            raise DataError(f"{path}: label column {spec.label_column!r} not in header")
        li = header.index(spec.label_column)
        feat = [i for i, c in enumerate(header) if i != li and c not in spec.drop_columns]
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
            lab = row[li].strip()
            if lab not in spec.label_map:
                raise DataError(f"{path}: row {lineno} has unknown label value {lab!r}")
            labels.append(spec.label_map[lab])
            vals = []
            for i in feat:
                cell = row[i].strip()
                if cell == "" or cell.upper() == "NA":
                    vals.append(math.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(f"{path}: row {lineno}, column {header[i]!r}: not a number: {cell!r}") from None
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return RawTable([header[i] for i in feat], np.array(rows, dtype=np.float64),
                    np.array(labels, dtype=np.int64), str(path))


def _balance_idx(labels: np.ndarray, seed: int) -> np.ndarray:
    """Indices that subsample the majority class down to the minority size."""
    rng = make_rng(seed)
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == -1)
    k = min(len(pos), len(neg))
    keep = np.concatenate([rng.choice(pos, k, replace=False), rng.choice(neg, k, replace=False)])
    return np.sort(keep)


def load_credit_csv(path, spec: PreprocessSpec | None = None) -> Dataset:
    """Load and preprocess a credit CSV.

    An unfitted ``spec`` is fitted on this file (treat the file as the
    training split); a fitted one is applied as-is.
    """
    spec = spec or PreprocessSpec()
    raw = read_credit_table(path, spec)
    if not spec.fitted:
        spec = spec.fit(raw.values, raw.columns)
    X = spec.transform(raw.values, raw.columns)
    return Dataset(X, raw.labels, {"source": str(path), "preprocess": spec.record(),
                                   "spec": spec})


def load_credit_split(path, test_fraction: float = 0.2, seed: int = 0,
                      spec: PreprocessSpec | None = None, balance: bool = False,
                      max_rows: int | None = None) -> tuple[Dataset, Dataset]:
    """Read, split, learn imputation/standardization on train only, apply to both."""
    spec = spec or PreprocessSpec()
    raw = read_credit_table(path, spec)
    values, labels = raw.values, raw.labels
    if balance:
        keep = _balance_idx(labels, seed)
        values, labels = values[keep], labels[keep]
    if max_rows is not None and max_rows < len(labels):
        keep = np.sort(make_rng(seed + 1).choice(len(labels), max_rows, replace=False))
        values, labels = values[keep], labels[keep]
    tr, te = _split_indices(len(labels), test_fraction, seed)
    fitted = spec.fit(values[tr], raw.columns)
    meta = {"source": str(path), "split_seed": seed, "test_fraction": test_fraction,
            "balance": balance, "preprocess": fitted.record(), "spec": fitted}
    train = Dataset(fitted.transform(values[tr], raw.columns), labels[tr], dict(meta))
    test = Dataset(fitted.transform(values[te], raw.columns), labels[te], dict(meta))
    return train, test


CREDIT_COLUMNS = (
    "RevolvingUtilizationOfUnsecuredLines", "age", "NumberOfTime30-59DaysPastDueNotWorse",
    "DebtRatio", "MonthlyIncome", "NumberOfOpenCreditLinesAndLoans", "NumberOfTimes90DaysLate",
    "NumberRealEstateLoansOrLines", "NumberOfTime60-89DaysPastDueNotWorse", "NumberOfDependents",
)


def write_synthetic_credit_csv(path, n: int = 2000, seed: int = 0, distress_rate: float = 0.3) -> None:
    """Write a table with the GiveMeSomeCredit layout for tests and demos.

    A latent risk score drives both the features and the distress label, so
    the table is learnable but not separable. ``MonthlyIncome`` and
    ``NumberOfDependents`` have missing cells, as in the real data.
    """
    if n < 2 or not 0 < distress_rate < 1:
        raise ValueError("need n >= 2 and 0 < distress_rate < 1")
    rng = make_rng(seed)
    r = rng.standard_normal(n)
    e = rng.standard_normal((n, 10))
    util = np.clip(0.3 + 0.25 * r + 0.2 * e[:, 0], 0, None)
    age = np.clip(np.round(52 - 8 * r + 12 * e[:, 1]), 21, 95)
    late30 = rng.poisson(np.exp(-1.2 + 0.9 * r))
    debt = np.abs(0.35 + 0.15 * r + 0.3 * e[:, 3])
    income = np.round(np.exp(8.6 - 0.25 * r + 0.5 * e[:, 4]))
    lines = rng.poisson(8 + 1.5 * np.tanh(e[:, 5]))
    late90 = rng.poisson(np.exp(-2.0 + 1.1 * r))
    estate = rng.poisson(1.0 + 0.3 * np.tanh(e[:, 7]))
    late60 = rng.poisson(np.exp(-2.2 + 1.0 * r))
    deps = rng.poisson(0.8, n)
    logit = 2.2 * r + 0.6 * e[:, 9] + math.log(distress_rate / (1 - distress_rate))
    distress = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-logit))).astype(int)
    miss_inc = rng.uniform(size=n) < 0.15
    miss_dep = rng.uniform(size=n) < 0.03
    header = ",".join(['""', "SeriousDlqin2yrs", *CREDIT_COLUMNS])
    out = [header]
    for i in range(n):
        cells = [str(i + 1), str(distress[i]), repr(float(util[i])), str(int(age[i])), str(late30[i]),
                 repr(float(debt[i])), "NA" if miss_inc[i] else str(int(income[i])), str(lines[i]),
                 str(late90[i]), str(estate[i]), str(late60[i]), "" if miss_dep[i] else str(deps[i])]
        out.append(",".join(cells))
    Path(path).write_text("\n".join(out) + "\n")


# -- export ----------------------------------------------------------------------------


def write_dataset_csv(data: Dataset, path, columns: list[str] | None = None) -> None:
    columns = columns or [f"x{i + 1}" for i in range(data.d)]
    lines = [",".join(columns + ["label"])]
    for row, lab in zip(data.X, data.y):
        lines.append(",".join([repr(float(v)) for v in row] + [str(int(lab))]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset_csv(path) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "label":
            raise DataError(f"{path}: expected a header ending in 'label'")
        X, y = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                X.append([float(v) for v in row[:-1]])
                y.append(int(row[-1]))
            except ValueError:
                raise DataError(f"{path}: malformed row {lineno}") from None
    return Dataset(np.array(X), np.array(y), {"source": str(path)})
