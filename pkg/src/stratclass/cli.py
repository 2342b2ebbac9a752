"""Command-line entry point.

    stratclass run --config exp.cfg --out results
    stratclass gen-data --config exp.cfg --out results
    stratclass train --config exp.cfg [--response lagrangian] --out results
    stratclass respond --config exp.cfg --model M --strategy gradient --out results
    stratclass eval --config exp.cfg --model M --out results
    stratclass plot --config exp.cfg --model M --strategy lagrangian --out results

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 1 anything else raised by the package.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from .config import EXPERIMENTS, format_config, load_config
from .data import write_dataset_csv
from .errors import ConfigError, StratError
from .evaluation import ACCURACY, EVAL_TAGS, GAMING, ReportRow, evaluate, write_report
from .experiments import Bundle, load_datasets, run_experiment, train_model
from .models import load_model, save_model
from .plotting import fit_limits, plot_decision_boundary
from .response import GRADIENT, IDENTITY, LAGRANGIAN, LINEAR_EXACT, STRATEGIES, respond, write_response_csv
from .training import TrainLog

log = logging.getLogger("stratclass")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stratclass", description="Strategic classification experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--experiment", choices=EXPERIMENTS, help="override the config's experiment")
        sp.add_argument("--seed", type=_u64, help="override the config seed")
        sp.add_argument("--out", help="output directory (default: config 'out')")
        sp.add_argument("--data", help="dataset CSV (credit table for credit-grid)")
        return sp

    common(sub.add_parser("run", help="run a full experiment"))
    common(sub.add_parser("gen-data", help="write the experiment's dataset as CSV"))
    sp = common(sub.add_parser("train", help="train one model and save it"))
    sp.add_argument("--response", choices=(IDENTITY, GRADIENT, LAGRANGIAN), default=IDENTITY,
                    help="response used during training (identity = ERM)")
    sp.add_argument("--family", choices=("linear", "mlp", "icnn"), help="override model.family")
    for name, helptext in (("respond", "compute responses to a saved model"),
                           ("eval", "accuracy and gaming rate of a saved model"),
                           ("plot", "decision-boundary SVG for a saved model")):
        sp = common(sub.add_parser(name, help=helptext))
        sp.add_argument("--model", required=True, help="model file written by 'train'")
        if name != "eval":
            sp.add_argument("--strategy", choices=STRATEGIES, default=LAGRANGIAN)
    return p


def _config(args):
    over = {"experiment": args.experiment} if args.experiment else {}
    if getattr(args, "family", None):
        over["model.family"] = args.family
    return load_config(args.config, seed=args.seed, out=args.out, **over)


def _eval_data(cfg, args):
    train, test = load_datasets(cfg, args.data)
    return test if test is not None else train


def cmd_run(cfg, args):
    paths = run_experiment(cfg, args.data)
    for name, path in paths.items():
        print(f"{name}: {path}")


def cmd_gen_data(cfg, args):
    b = Bundle(cfg)
    train, test = load_datasets(cfg, args.data)
    write_dataset_csv(train, b.path("train" if test is not None else "data"))
    if test is not None:
        write_dataset_csv(test, b.path("test"))
    for name, path in b.paths.items():
        print(f"{name}: {path}")


def cmd_train(cfg, args):
    b = Bundle(cfg)
    train, _ = load_datasets(cfg, args.data)
    tl = TrainLog()
    model = train_model(cfg, train, cfg.values["model.family"], args.response, trainlog=tl)
    tag = f"{cfg.values['model.family']}_{args.response}"
    tl.to_csv(b.path(f"trainlog_{tag}"))
    path = b.dir / f"{cfg.experiment}_model_{tag}.txt"
    save_model(model, path)
    (b.dir / f"{cfg.experiment}_config.txt").write_text(format_config(cfg.values))
    print(f"model: {path}")


def cmd_respond(cfg, args):
    b = Bundle(cfg)
    model = load_model(args.model)
    data = _eval_data(cfg, args)
    Z = respond(cfg.strategy(args.strategy), model, data.X, cfg.cost)
    path = b.path(f"responses_{args.strategy}")
    write_response_csv(path, model, cfg.cost, data.X, Z)
    print(f"responses: {path}")


def cmd_eval(cfg, args):
    b = Bundle(cfg)
    model = load_model(args.model)
    data = _eval_data(cfg, args)
    family = type(model).__name__.replace("Model", "").lower()
    rows = []
    tags = (IDENTITY, GRADIENT, LAGRANGIAN) + ((LINEAR_EXACT,) if family == "linear" else ())
    for tag in tags:
        acc, gam, _ = evaluate(model, cfg.strategy(tag), data, cfg.cost)
        rows.append(ReportRow(family, "-", EVAL_TAGS[tag], ACCURACY, acc.mean, acc.stderr, acc.n))
        rows.append(ReportRow(family, "-", EVAL_TAGS[tag], GAMING, gam.mean, gam.stderr, gam.n))
        print(f"{EVAL_TAGS[tag]:>9}: accuracy {acc.mean:.4f} +- {acc.stderr:.4f}, gamed {gam.mean:.4f}")
    path = b.path("eval")
    write_report(path, rows)
    print(f"report: {path}")


def cmd_plot(cfg, args):
    b = Bundle(cfg)
    model = load_model(args.model)
    data = _eval_data(cfg, args)
    Z = respond(cfg.strategy(args.strategy), model, data.X, cfg.cost)
    spec = cfg.figure
    if spec is None:
        raise ConfigError("figure.enabled: plots are disabled for this experiment")
    if cfg.figure_auto:
        xl, yl = fit_limits(np.vstack([data.X, Z]))
        spec = replace(spec, xlim=xl, ylim=yl)
    path = b.path(f"plot_{args.strategy}", "svg")
    plot_decision_boundary(model, data, Z, spec, path, title=f"{args.strategy} response")
    print(f"figure: {path}")


COMMANDS = {"run": cmd_run, "gen-data": cmd_gen_data, "train": cmd_train, "respond": cmd_respond,
            "eval": cmd_eval, "plot": cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        COMMANDS[args.command](cfg, args)
    except StratError as e:
        print(f"stratclass: error: {e}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
