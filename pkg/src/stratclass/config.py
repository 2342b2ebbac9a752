"""Experiment configuration: a flat ``key = value`` text format.

Keys are dotted (``regd.lr``, ``response.lagrangian.step_z``); ``#`` starts
a comment; tuples are comma separated. Every key has a typed default, and
each experiment overrides some of them. Unknown keys and bad values raise
:class:`ConfigError` naming the key and, when read from a file, the line.

Response settings resolve in three layers, later ones winning:
``response.<field>`` for all solvers, ``response.<strategy>.<field>`` for
one solver, and ``regd.response.<field>`` for responses computed inside
REGD training rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .costs import COSTS, CostFn
from .errors import ConfigError
from .plotting import FigureSpec
from .response import GRADIENT, IDENTITY, LAGRANGIAN, LINEAR_EXACT, ResponseConfig, ResponseStrategy
from .training import LOSSES, TrainConfig

EXPERIMENTS = ("gaussians-linear", "moons-mlp", "credit-grid")
FAMILIES = ("linear", "mlp", "icnn")
_RESPONSE_FIELDS = tuple(f.name for f in fields(ResponseConfig))
_RDEF = ResponseConfig()

# key -> default; the default's type fixes how a value is parsed
DEFAULTS = {
    "experiment": "gaussians-linear",
    "seed": 0,
    "out": "out",
    "data.n_per_class": 250,
    "data.sigma": 0.7,
    "data.mean_neg": (-2.0, 0.0),
    "data.mean_pos": (2.0, 0.0),
    "data.noise": 0.1,
    "data.path": "",
    "data.test_fraction": 0.2,
    "data.balance": False,
    "data.max_rows": 0,
    "model.family": "linear",
    "model.families": ("linear", "icnn", "mlp"),
    "model.hidden": (8, 8),
    "loss": "hinge",
    "cost.kind": "euclidean",
    "cost.delta": 1e-8,
    "erm.lr": 0.05,
    "erm.epochs": 50,
    "erm.batch_size": 32,
    "regd.lr": 0.05,
    "regd.rounds": 20,
    "regd.inner_epochs": 5,
    "regd.batch_size": 32,
    "figure.enabled": True,
    "figure.xlim": (0.0, 0.0),
    "figure.ylim": (0.0, 0.0),
    "figure.resolution": (160, 120),
    "figure.width": 480,
    "figure.height": 360,
    "figure.show_points": True,
    "figure.show_arrows": True,
}
for _f in _RESPONSE_FIELDS:
    DEFAULTS[f"response.{_f}"] = getattr(_RDEF, _f)
_OPTIONAL_PREFIXES = tuple(f"response.{s}." for s in (GRADIENT, LAGRANGIAN)) + ("regd.response.",)

EXPERIMENT_DEFAULTS = {
    "gaussians-linear": {"model.family": "linear", "loss": "hinge", "erm.epochs": 50},
    "moons-mlp": {
        "data.n_per_class": 250, "model.family": "mlp", "model.hidden": (8, 8),
        "loss": "cross-entropy", "erm.epochs": 200, "erm.lr": 0.05,
        "regd.lr": 0.01, "regd.rounds": 80, "regd.inner_epochs": 5, "regd.response.tol": 1e-6,
    },
    "credit-grid": {
        "loss": "cross-entropy", "model.hidden": (16, 16), "data.max_rows": 4000,
        "erm.epochs": 20, "regd.rounds": 10, "regd.inner_epochs": 2, "regd.response.tol": 1e-6,
        "figure.enabled": False,
    },
}


def _parse_scalar(key: str, text: str, like):
    text = text.strip()
    try:
        if isinstance(like, bool):
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type(like).__name__}") from None
    return text


def parse_value(key: str, text: str, like):
    if isinstance(like, tuple):
        parts = [p for p in text.split(",") if p.strip()]
        elem = like[0] if like else ""
        return tuple(_parse_scalar(key, p, elem) for p in parts)
    return _parse_scalar(key, text, like)


def _default_for(key: str):
    if key in DEFAULTS:
        return DEFAULTS[key]
    for pre in _OPTIONAL_PREFIXES:
        if key.startswith(pre) and key[len(pre):] in _RESPONSE_FIELDS:
            return getattr(_RDEF, key[len(pre):])
    raise ConfigError(f"{key}: unknown configuration key")


def parse_text(text: str, source: str = "<config>") -> dict:
    """Parse config text into a flat {key: typed value} dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        try:
            out[key] = parse_value(key, val, _default_for(key))
        except ConfigError as e:
            raise ConfigError(f"{source}:{lineno}: {e}") from None
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_text(path.read_text(), str(path))


def format_config(values: dict) -> str:
    lines = []
    for k in sorted(values):
        v = values[k]
        if isinstance(v, tuple):
            s = ", ".join(str(e) for e in v)
        elif isinstance(v, bool):
            s = "true" if v else "false"
        else:
            s = str(v)
        lines.append(f"{k} = {s}")
    return "\n".join(lines) + "\n"


# -- typed view ------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    out: str
    values: dict  # resolved flat key -> value, for provenance
    erm: TrainConfig
    regd: TrainConfig
    cost: CostFn
    response: dict  # strategy tag -> ResponseConfig used for evaluation
    train_response: dict  # strategy tag -> ResponseConfig used inside REGD
    figure: FigureSpec | None
    figure_auto: bool = False

    def __getitem__(self, key):
        return self.values[key]

    def strategy(self, tag: str, training: bool = False) -> ResponseStrategy:
        src = self.train_response if training else self.response
        return ResponseStrategy(tag, src.get(tag, ResponseConfig()))


def _check(cond: bool, key: str, msg: str):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def _response_config(v: dict, tag: str, training: bool) -> ResponseConfig:
    kw = {}
    for f in _RESPONSE_FIELDS:
        key = f"response.{f}"
        for k in (f"response.{tag}.{f}",) + ((f"regd.response.{f}",) if training else ()):
            if k in v:
                key = k
        kw[f] = (key, v[key])
    for f, (key, val) in kw.items():
        try:
            ResponseConfig(**{f: val})
        except ValueError as e:
            raise ConfigError(f"{key}: {e}") from None
    try:
        return ResponseConfig(**{f: val for f, (_, val) in kw.items()})
    except ValueError as e:
        raise ConfigError(f"response.{tag}: {e}") from None


def build_config(overrides: dict | None = None, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    """Resolve defaults, experiment defaults, then ``overrides`` into a typed config."""
    overrides = dict(overrides or {})
    for k in overrides:
        _default_for(k)
    exp = overrides.get("experiment", DEFAULTS["experiment"])
    _check(exp in EXPERIMENTS, "experiment", f"unknown experiment {exp!r}; expected one of {EXPERIMENTS}")
    v = dict(DEFAULTS)
    v.update(EXPERIMENT_DEFAULTS[exp])
    v.update(overrides)
    if seed is not None:
        v["seed"] = seed
    if out is not None:
        v["out"] = out

    _check(v["seed"] >= 0, "seed", "must be nonnegative")
    _check(v["data.n_per_class"] >= 1, "data.n_per_class", "must be >= 1")
    _check(v["data.sigma"] > 0, "data.sigma", "must be positive")
    _check(v["data.noise"] >= 0, "data.noise", "must be nonnegative")
    _check(len(v["data.mean_neg"]) == len(v["data.mean_pos"]) >= 1, "data.mean_neg",
           "class means must have equal, nonzero length")
    _check(0 < v["data.test_fraction"] < 1, "data.test_fraction", "must lie in (0, 1)")
    _check(v["data.max_rows"] >= 0, "data.max_rows", "must be >= 0 (0 means all rows)")
    _check(v["model.family"] in FAMILIES, "model.family", f"expected one of {FAMILIES}")
    for f in v["model.families"]:
        _check(f in FAMILIES, "model.families", f"unknown family {f!r}")
    _check(len(v["model.hidden"]) >= 1 and all(h >= 1 for h in v["model.hidden"]), "model.hidden",
           "need at least one positive layer width")
    _check(v["loss"] in LOSSES, "loss", f"expected one of {LOSSES}")
    _check(v["cost.kind"] in COSTS, "cost.kind", f"expected one of {COSTS}")
    _check(v["cost.delta"] > 0, "cost.delta", "must be positive")
    for sec in ("erm", "regd"):
        _check(v[f"{sec}.lr"] > 0, f"{sec}.lr", "must be positive")
        _check(v[f"{sec}.batch_size"] >= 1, f"{sec}.batch_size", "must be >= 1")
    _check(v["erm.epochs"] >= 0, "erm.epochs", "must be >= 0")
    _check(v["regd.rounds"] >= 1, "regd.rounds", "must be >= 1")
    _check(v["regd.inner_epochs"] >= 0, "regd.inner_epochs", "must be >= 0")

    erm = TrainConfig(lr=v["erm.lr"], epochs=v["erm.epochs"], batch_size=v["erm.batch_size"], seed=v["seed"])
    regd = TrainConfig(lr=v["regd.lr"], epochs=0, batch_size=v["regd.batch_size"], seed=v["seed"],
                       regd_rounds=v["regd.rounds"], inner_epochs=v["regd.inner_epochs"])
    tags = (GRADIENT, LAGRANGIAN)
    response = {t: _response_config(v, t, False) for t in tags}
    response[IDENTITY] = response[LINEAR_EXACT] = _response_config(v, IDENTITY, False)
    train_response = {t: _response_config(v, t, True) for t in tags}

    figure, auto = None, False
    if v["figure.enabled"]:
        for k in ("figure.xlim", "figure.ylim", "figure.resolution"):
            _check(len(v[k]) == 2, k, "needs exactly two values")
        # an empty range (the default) means: fit limits to the data
        auto = v["figure.xlim"][0] == v["figure.xlim"][1] or v["figure.ylim"][0] == v["figure.ylim"][1]
        _check(min(v["figure.resolution"]) >= 2, "figure.resolution", "must be >= 2 per axis")
        _check(v["figure.width"] >= 1 and v["figure.height"] >= 1, "figure.width", "size must be positive")
        try:
            figure = FigureSpec(xlim=(-1.0, 1.0) if auto else v["figure.xlim"],
                                ylim=(-1.0, 1.0) if auto else v["figure.ylim"],
                                resolution=v["figure.resolution"], width=v["figure.width"],
                                height=v["figure.height"], show_points=v["figure.show_points"],
                                show_arrows=v["figure.show_arrows"])
        except ValueError as e:
            raise ConfigError(f"figure.xlim: {e}") from None
    return ExperimentConfig(exp, v["seed"], v["out"], v, erm, regd,
                            CostFn(v["cost.kind"], v["cost.delta"]), response, train_response, figure, auto)


def load_config(path=None, seed: int | None = None, out: str | None = None, **overrides) -> ExperimentConfig:
    vals = load_config_file(path) if path is not None else {}
    vals.update(overrides)
    return build_config(vals, seed=seed, out=out)
