"""End-to-end experiment runners.

``gaussians-linear``  linear SVM on two Gaussian blobs; exact, gradient and
                      Lagrangian responses side by side
``moons-mlp``         MLP on twin moons trained by ERM and by REGD with the
                      Lagrangian response
``credit-grid``       linear / ICNN / MLP models trained with REGD under the
                      identity, gradient and Lagrangian responses, each
                      evaluated under all three

Every artifact is written to ``cfg.out`` as ``<experiment>_<artifact>.csv``
or ``.svg``. Each run also writes a post-check audit counting moved points
that are not rational (always expected to be zero).
"""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .data import Dataset, gen_two_gaussians, gen_twin_moons, load_credit_split, read_dataset_csv, write_dataset_csv
from .errors import ConfigError
from .evaluation import (ACCURACY, EVAL_TAGS, GAMING, KKT_FIELDS, TRAIN_TAGS, ReportRow, accuracy_decomposition,
                         cross_eval, evaluate, grid_rows, kkt_summary, postcheck_violations, write_report)
from .models import LinearModel, build_model
from .plotting import fit_limits, plot_decision_boundary
from .response import GRADIENT, IDENTITY, LAGRANGIAN, LINEAR_EXACT, moved_mask, write_response_csv
from .training import TrainLog, erm_train, regd_train

log = logging.getLogger(__name__)


class Bundle:
    """Collects artifacts written under one output directory."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.dir = Path(cfg.out)
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"out: cannot create output directory {self.dir}: {e}") from None
        self.paths = {}
        self.audit = []

    def path(self, artifact: str, ext: str = "csv") -> Path:
        p = self.dir / f"{self.cfg.experiment}_{artifact}.{ext}"
        self.paths[artifact] = p
        return p

    def check(self, model_name, strategy, model, X, Z):
        v = postcheck_violations(model, self.cfg.cost, X, Z)
        self.audit.append((model_name, strategy, int(np.count_nonzero(moved_mask(X, Z))), v))
        if v:
            log.error("%s/%s: %d moved points fail the post-check invariant", model_name, strategy, v)

    def write_audit(self):
        lines = ["model,strategy,moved,violations"]
        lines += [f"{m},{s},{n},{v}" for m, s, n, v in self.audit]
        self.path("postcheck").write_text("\n".join(lines) + "\n")

    def plot(self, artifact, model, data, Z, lim_pts, title):
        cfg = self.cfg
        if cfg.figure is None:
            return
        spec = cfg.figure
        if cfg.figure_auto:
            xl, yl = fit_limits(lim_pts)
            spec = replace(spec, xlim=xl, ylim=yl)
        plot_decision_boundary(model, data, Z, spec, self.path(artifact, "svg"), title=title)


def load_datasets(cfg: ExperimentConfig, data_path=None) -> tuple[Dataset, Dataset | None]:
    """(train, test) for the configured experiment; test is None for the toys."""
    v = cfg.values
    path = data_path or v["data.path"] or None
    if cfg.experiment == "credit-grid":
        if not path:
            raise ConfigError("data.path: credit-grid needs a credit CSV (pass --data)")
        return load_credit_split(path, v["data.test_fraction"], cfg.seed, balance=v["data.balance"],
                                 max_rows=v["data.max_rows"] or None)
    if path:
        return read_dataset_csv(path), None
    if cfg.experiment == "moons-mlp":
        return gen_twin_moons(v["data.n_per_class"], v["data.noise"], cfg.seed), None
    return gen_two_gaussians(v["data.n_per_class"], v["data.mean_neg"], v["data.mean_pos"],
                             v["data.sigma"], cfg.seed), None


def init_model(cfg: ExperimentConfig, family: str, d: int):
    return build_model(family, d, hidden=cfg.values["model.hidden"], seed=cfg.seed)


def train_model(cfg: ExperimentConfig, data: Dataset, family: str, train_tag: str,
                trainlog: TrainLog | None = None, diagnostics: list | None = None):
    """Train one model.

    The toy experiments train their identity model with ERM (``erm.*``).
    Everything else uses REGD (``regd.*``); in credit-grid the identity row
    is REGD under the identity response, which equals ERM for
    rounds x inner epochs.
    """
    model = init_model(cfg, family, data.d)
    loss = cfg.values["loss"]
    if train_tag == IDENTITY and cfg.experiment != "credit-grid":
        return erm_train(data, model, loss, cfg.erm, trainlog)
    return regd_train(data, model, loss, cfg.strategy(train_tag, training=True), cfg.regd, cfg.cost,
                      trainlog, diagnostics)


def run_experiment(cfg: ExperimentConfig, data_path=None) -> dict:
    """Run one experiment; returns {artifact name: path}."""
    runners = {"gaussians-linear": _gaussians_linear, "moons-mlp": _moons_mlp, "credit-grid": _credit_grid}
    b = Bundle(cfg)
    runners[cfg.experiment](cfg, b, data_path)
    b.write_audit()
    return dict(b.paths)


# -- gaussians-linear --------------------------------------------------------------------------


def _gaussians_linear(cfg, b: Bundle, data_path):
    data, _ = load_datasets(cfg, data_path)
    write_dataset_csv(data, b.path("data"))
    model = train_model(cfg, data, cfg.values["model.family"], IDENTITY)
    if not isinstance(model, LinearModel):
        raise ConfigError("model.family: gaussians-linear needs a linear model")
    log.info("linear model: w=%s b=%.4f", model.w, model.b)

    Zs, rows = {}, []
    for tag in (IDENTITY, LINEAR_EXACT, GRADIENT, LAGRANGIAN):
        acc, gam, Z = evaluate(model, cfg.strategy(tag), data, cfg.cost)
        Zs[tag] = Z
        rows.append(ReportRow("linear", "I", EVAL_TAGS[tag], ACCURACY, acc.mean, acc.stderr, acc.n))
        rows.append(ReportRow("linear", "I", EVAL_TAGS[tag], GAMING, gam.mean, gam.stderr, gam.n))
        b.check("linear", tag, model, data.X, Z)
        if tag != IDENTITY:
            write_response_csv(b.path(f"responses_{tag}"), model, cfg.cost, data.X, Z)
    write_report(b.path("metrics"), rows)

    ex = Zs[LINEAR_EXACT]
    mv_ex = moved_mask(data.X, ex)
    lines = ["strategy,n,moved,moved_exact,class_agreement,max_l2_common,mean_cost_moved"]
    for tag in (LINEAR_EXACT, GRADIENT, LAGRANGIAN):
        Z = Zs[tag]
        mv = moved_mask(data.X, Z)
        agree = float(np.mean(model.classify(Z) == model.classify(ex)))
        common = mv & mv_ex
        l2 = float(np.max(np.linalg.norm(Z[common] - ex[common], axis=1))) if common.any() else 0.0
        mc = float(np.mean(cfg.cost(data.X[mv], Z[mv]))) if mv.any() else 0.0
        lines.append(f"{tag},{data.n},{int(mv.sum())},{int(mv_ex.sum())},{agree!r},{l2!r},{mc!r}")
    b.path("agreement").write_text("\n".join(lines) + "\n")

    k = kkt_summary(model, cfg.cost, data.X, cfg.response[LAGRANGIAN])
    b.path("kkt").write_text("n,moved,converged," + ",".join(KKT_FIELDS) + "\n"
                             + f"{k['n']},{k['moved']},{k['converged']},"
                             + ",".join(repr(k[f]) for f in KKT_FIELDS) + "\n")

    pts = np.vstack([data.X] + [Zs[t] for t in Zs])
    b.plot("boundary", model, data, None, pts, "linear SVM decision boundary")
    for tag, name in ((LINEAR_EXACT, "exact"), (GRADIENT, "gradient"), (LAGRANGIAN, "lagrangian")):
        b.plot(name, model, data, Zs[tag], pts, f"{name} response")


# -- moons-mlp ------------------------------------------------------------------------------------


def _moons_mlp(cfg, b: Bundle, data_path):
    data, _ = load_datasets(cfg, data_path)
    write_dataset_csv(data, b.path("data"))
    family = cfg.values["model.family"]
    erm = train_model(cfg, data, family, IDENTITY)
    tl = TrainLog()
    diags = []
    regd = train_model(cfg, data, family, LAGRANGIAN, trainlog=tl, diagnostics=diags)
    tl.to_csv(b.path("trainlog"))

    rows, dec = [], ["model,plain,strategic,gained,lost,moved,n"]
    Zs = {}
    for name, tag, model in (("erm", "I", erm), ("regd", "LD", regd)):
        for etag in (IDENTITY, LAGRANGIAN):
            acc, gam, Z = evaluate(model, cfg.strategy(etag), data, cfg.cost, diags)
            rows.append(ReportRow(family, tag, EVAL_TAGS[etag], ACCURACY, acc.mean, acc.stderr, acc.n))
            rows.append(ReportRow(family, tag, EVAL_TAGS[etag], GAMING, gam.mean, gam.stderr, gam.n))
            b.check(name, etag, model, data.X, Z)
            Zs[name, etag] = Z
        d = accuracy_decomposition(model, data, Zs[name, LAGRANGIAN])
        dec.append(f"{name},{d['plain']!r},{d['strategic']!r},{d['gained']},{d['lost']},{d['moved']},{d['n']}")
        write_response_csv(b.path(f"responses_{name}_lagrangian"), model, cfg.cost, data.X, Zs[name, LAGRANGIAN])
    write_report(b.path("metrics"), rows)
    b.path("decomposition").write_text("\n".join(dec) + "\n")

    pts = np.vstack([data.X, Zs["erm", LAGRANGIAN], Zs["regd", LAGRANGIAN]])
    b.plot("erm_boundary", erm, data, None, pts, "ERM MLP")
    b.plot("erm_lagrangian", erm, data, Zs["erm", LAGRANGIAN], pts, "Lagrangian response to ERM MLP")
    b.plot("regd_boundary", regd, data, None, pts, "REGD MLP")
    b.plot("regd_lagrangian", regd, data, Zs["regd", LAGRANGIAN], pts, "Lagrangian response to REGD MLP")


# -- credit-grid ------------------------------------------------------------------------------------


def _credit_grid(cfg, b: Bundle, data_path):
    train, test = load_datasets(cfg, data_path)
    rec = train.meta["preprocess"]
    lines = ["feature,median,mean,std"]
    for c, md, mn, sd in zip(rec["columns"], rec["medians"], rec["means"], rec["stds"]):
        lines.append(f"{c},{md!r},{mn!r},{sd!r}")
    b.path("preprocess").write_text("\n".join(lines) + "\n")

    tags = (IDENTITY, GRADIENT, LAGRANGIAN)
    strategies = {EVAL_TAGS[t]: cfg.strategy(t) for t in tags}
    acc_rows, gam_rows, trend = [], [], ["model_family,gaming_gradient,gaming_lagrange,ld_ge_gd"]
    diags = []
    for family in cfg.values["model.families"]:
        models = {}
        for t in tags:
            log.info("credit-grid: training %s with %s responses", family, t)
            models[TRAIN_TAGS[t]] = train_model(cfg, train, family, t, diagnostics=diags)
        Zs = {}
        acc, gam = cross_eval(models, strategies, test, cfg.cost, diags, responses_out=Zs)
        for (r, c), Z in Zs.items():
            b.check(family + ":" + r, c, models[r], test.X, Z)
        acc_rows += grid_rows(family, acc, ACCURACY)
        gam_rows += grid_rows(family, gam, GAMING)
        g_gd = float(np.mean([gam[r, EVAL_TAGS[GRADIENT]].mean for r in gam.rows]))
        g_ld = float(np.mean([gam[r, EVAL_TAGS[LAGRANGIAN]].mean for r in gam.rows]))
        trend.append(f"{family},{g_gd!r},{g_ld!r},{int(g_ld >= g_gd)}")
    write_report(b.path("accuracy"), acc_rows)
    write_report(b.path("gaming"), gam_rows)
    b.path("trend").write_text("\n".join(trend) + "\n")
