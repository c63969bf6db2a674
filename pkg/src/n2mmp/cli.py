"""Command-line front end.

Subcommands::

    n2mmp stats DATA                      summary statistics as JSON
    n2mmp synth --n 200 --out FILE        synthetic databank
    n2mmp partition DATA --out FILE       train/test partition as JSON
    n2mmp run [--config FILE] ...         full pipeline, artifacts + manifest
    n2mmp predict MODEL INPUT             predictions CSV
    n2mmp sensitivity MODEL DATA          correlations and sweep CSVs
    n2mmp compare DATA MODEL [MODEL ...]  comparison table

Run configuration files are flat ``key = value`` text (``#`` starts a
comment).  Recognised keys are ``data``, ``split``, ``train_frac``,
``split_seed``, ``models``, ``output_dir``, ``seed``, ``folds``,
``grid_points`` and per-model hyperparameters written ``<model>.<name>``,
e.g. ``wknn.k = cv`` or ``elm.hidden = 43``.  Command-line flags override
file values.  ``run`` writes ``manifest.txt`` in the same format plus
``meta.*`` records (toolkit version, per-model seeds, stage status); passing
it back with ``--config`` reproduces the run.

The default output directory is taken from ``$N2MMP_OUTPUT_DIR`` when set.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import FEATURE_NAMES, TARGET_NAME, describe, load_csv, load_inputs, save_csv, synthesize
from .evaluation import compare, sensitivity
from .exceptions import ConfigurationError, N2MMPError
from .models import (
    DEFAULT_HYPERPARAMETERS,
    DISPLAY_NAMES,
    MODEL_NAMES,
    PROBABILISTIC,
    FittedModel,
    derive_seed,
    fit_model,
)
from .partition import PartitionResult, split

OUTPUT_ENV = "N2MMP_OUTPUT_DIR"
SPLIT_METHODS = ("hspxy", "random")


def default_output_dir():
    return os.environ.get(OUTPUT_ENV, "n2mmp-output")


def parse_value(text):
    """``"3" -> 3``, ``"0.5" -> 0.5``, anything else stays a string."""
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


@dataclass
class RunConfig:
    data: str = ""
    split: str = "hspxy"
    train_frac: float = 0.8
    split_seed: int = 0
    models: tuple = MODEL_NAMES
    output_dir: str = ""
    seed: int = 0
    folds: int = 5
    grid_points: int = 50
    hyperparameters: dict = field(default_factory=dict)  # model -> {name: text}

    def validate(self):
        if not self.data:
            raise ConfigurationError("no data file given")
        if self.split not in SPLIT_METHODS:
            raise ConfigurationError(f"split must be one of {', '.join(SPLIT_METHODS)}")
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigurationError("train_frac must lie in (0, 1)")
        if not self.models:
            raise ConfigurationError("no models selected")
        for name in self.models:
            if name not in MODEL_NAMES:
                raise ConfigurationError(f"unknown model {name!r}; choose from all, {', '.join(MODEL_NAMES)}")
        for name, params in self.hyperparameters.items():
            if name not in MODEL_NAMES:
                raise ConfigurationError(f"hyperparameter for unknown model {name!r}")
            for key in params:
                if key not in DEFAULT_HYPERPARAMETERS[name]:
                    raise ConfigurationError(f"unknown hyperparameter {name}.{key}")
        if self.folds < 2:
            raise ConfigurationError("folds must be >= 2")
        if self.grid_points < 2:
            raise ConfigurationError("grid_points must be >= 2")

    def set(self, key, value):
        """Assign one ``key = value`` entry given as text."""
        value = value.strip()
        if "." in key:
            model, name = key.split(".", 1)
            self.hyperparameters.setdefault(model, {})[name] = value
        elif key == "models":
            names = [v.strip() for v in value.split(",") if v.strip()]
            self.models = MODEL_NAMES if names == ["all"] else tuple(names)
        elif key in ("data", "split", "output_dir"):
            setattr(self, key, value)
        elif key == "train_frac":
            self.train_frac = float(value)
        elif key in ("split_seed", "seed", "folds", "grid_points"):
            setattr(self, key, int(value))
        else:
            raise ConfigurationError(f"unknown configuration key {key!r}")

    def items(self):
        yield "data", self.data
        yield "split", self.split
        yield "train_frac", repr(float(self.train_frac))
        yield "split_seed", str(self.split_seed)
        yield "models", ",".join(self.models)
        yield "output_dir", self.output_dir
        yield "seed", str(self.seed)
        yield "folds", str(self.folds)
        yield "grid_points", str(self.grid_points)
        for model in sorted(self.hyperparameters):
            for key in sorted(self.hyperparameters[model]):
                yield f"{model}.{key}", self.hyperparameters[model][key]

    def to_text(self):
        return "".join(f"{k} = {v}\n" for k, v in self.items())

    @classmethod
    def from_text(cls, text):
        config = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"config line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key.startswith("meta."):
                continue
            config.set(key, value)
        return config

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def model_hyperparameters(self, name):
        return {k: parse_value(v) for k, v in self.hyperparameters.get(name, {}).items()}


# --------------------------------------------------------------------------
# file writers


def write_rows(path, header, rows):
    """Write a CSV to ``path``, or to an open text stream."""
    if hasattr(path, "write"):
        _write_csv(path, header, rows)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_csv(fh, header, rows)


def _write_csv(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_sensitivity(report, out_dir, prefix=""):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_rows(
        out_dir / f"{prefix}correlations.csv",
        ("input", "experimental_correlation", "model_correlation"),
        report.correlation_rows(),
    )
    for name, (grid, pred) in report.sweeps.items():
        write_rows(out_dir / f"{prefix}sweep_{name}.csv", (name, "mmp_predicted"), zip(grid, pred))


def write_predictions(path, model, X):
    header = list(FEATURE_NAMES) + ["mmp_predicted"]
    probabilistic = model.name in PROBABILISTIC
    if probabilistic:
        header += ["latent_variance", "predictive_variance"]
    if len(X) == 0:
        write_rows(path, header, [])
        return
    if probabilistic:
        mean, latent, obs = model.predict_with_variance(X)
        cols = [mean, latent, obs]
    else:
        cols = [model.predict(X)]
    write_rows(path, header, (list(x) + [c[i] for c in cols] for i, x in enumerate(X)))


# --------------------------------------------------------------------------
# pipeline


class StageError(Exception):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def run_pipeline(config: RunConfig, log=print):
    """Execute a run and write every artifact; returns the output directory.

    Stages run in a fixed order (load, partition, one fit per model,
    compare, sensitivity).  The manifest is rewritten after every stage so
    a failure leaves a record of which artifacts are complete.
    """
    config.validate()
    out = Path(config.output_dir or default_output_dir())
    (out / "models").mkdir(parents=True, exist_ok=True)
    (out / "curves").mkdir(exist_ok=True)
    status = {}
    seeds = {name: derive_seed(config.seed, name) for name in config.models}

    def write_manifest():
        lines = [config.to_text(), f"meta.version = {__version__}\n"]
        lines += [f"meta.seed.{n} = {s}\n" for n, s in seeds.items()]
        lines += [f"meta.stage.{n} = {s}\n" for n, s in status.items()]
        failed = [n for n, s in status.items() if s != "ok"]
        lines.append(f"meta.status = {'failed' if failed else 'ok'}\n")
        (out / "manifest.txt").write_text("".join(lines), encoding="utf-8")

    def stage(name, fn):
        status[name] = "running"
        write_manifest()
        try:
            result = fn()
        except Exception as exc:  # reported with the stage name, then re-raised
            status[name] = "failed"
            write_manifest()
            raise StageError(name, exc) from exc
        status[name] = "ok"
        write_manifest()
        return result

    data = stage("load", lambda: load_csv(config.data))

    def do_partition():
        part = split(data, config.split, config.train_frac, config.split_seed)
        part.save(out / "partition.json")
        return part

    part = stage("partition", do_partition)
    train = data.subset(part.train_indices)
    test = data.subset(part.test_indices)
    log(f"partition: {len(train)} training / {len(test)} test rows ({config.split})")

    fitted = {}
    for name in config.models:

        def do_fit(name=name):
            model, curves = fit_model(
                name, train, config.model_hyperparameters(name), seed=seeds[name], folds=config.folds
            )
            model.save(out / "models" / f"{name}.json")
            for stem, curve in curves.items():
                write_rows(out / "curves" / f"{stem}.csv", curve.header, curve.rows)
            return model

        fitted[name] = stage(f"fit.{name}", do_fit)
        log(f"fitted {name}")

    def do_compare():
        table = compare({DISPLAY_NAMES[n]: m.predict for n, m in fitted.items()}, test.X, test.y)
        (out / "comparison.txt").write_text(table.render(), encoding="utf-8")
        (out / "comparison.json").write_text(table.to_json(), encoding="utf-8")
        header = ["row"] + list(FEATURE_NAMES) + [TARGET_NAME] + [f"{n}_predicted" for n in fitted]
        preds = [m.predict(test.X) for m in fitted.values()]
        rows = (
            [int(r)] + list(x) + [t] + [p[i] for p in preds]
            for i, (r, x, t) in enumerate(zip(part.test_indices, test.X, test.y))
        )
        write_rows(out / "test_predictions.csv", header, rows)
        return table

    table = stage("compare", do_compare)
    log(table.render().rstrip("\n"))

    def do_sensitivity():
        for name, model in fitted.items():
            report = sensitivity(model.predict, data, config.grid_points)
            write_sensitivity(report, out / "sensitivity", prefix=f"{name}_")

    stage("sensitivity", do_sensitivity)
    return out


# --------------------------------------------------------------------------
# argument handling


def build_parser():
    parser = argparse.ArgumentParser(prog="n2mmp", description="MMP regression toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="summary statistics of a databank")
    p.add_argument("data", help="databank CSV")
    p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("synth", help="write a synthetic databank")
    p.add_argument("--n", type=int, default=200, help="number of rows (default 200)")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--noise", type=float, default=1.0, help="noise std in MPa (default 1.0)")
    p.add_argument("--out", required=True, help="output CSV")

    p = sub.add_parser("partition", help="split a databank into training and test rows")
    p.add_argument("data", help="databank CSV")
    p.add_argument("--split", choices=SPLIT_METHODS, default="hspxy", help="partition method")
    p.add_argument("--train-frac", type=float, default=0.8, help="training fraction in (0, 1)")
    p.add_argument("--seed", type=int, default=0, help="seed for the random split")
    p.add_argument("--out", help="partition JSON (default: stdout)")

    p = sub.add_parser("run", help="partition, fit, compare and analyse")
    p.add_argument("--config", help="key = value configuration file or a previous manifest")
    p.add_argument("--data", help="databank CSV")
    p.add_argument("--model", action="append", help="model name or 'all'; repeatable")
    p.add_argument("--split", choices=SPLIT_METHODS, help="partition method")
    p.add_argument("--train-frac", type=float, help="training fraction in (0, 1)")
    p.add_argument("--split-seed", type=int, help="seed for the random split")
    p.add_argument("--seed", type=int, help="master seed for model randomness")
    p.add_argument("--folds", type=int, help="cross-validation folds (default 5)")
    p.add_argument("--grid-points", type=int, help="points per sensitivity sweep (default 50)")
    p.add_argument("--output-dir", help=f"artifact directory (default ${OUTPUT_ENV} or ./n2mmp-output)")
    p.add_argument("--set", action="append", default=[], metavar="MODEL.KEY=VALUE",
                   help="hyperparameter override, e.g. wknn.k=3; repeatable")

    p = sub.add_parser("predict", help="predict MMP for an input CSV")
    p.add_argument("model", help="fitted model JSON")
    p.add_argument("inputs", help="CSV with the five input columns")
    p.add_argument("--out", help="predictions CSV (default: stdout)")

    p = sub.add_parser("sensitivity", help="correlation and sweep analysis of a fitted model")
    p.add_argument("model", help="fitted model JSON")
    p.add_argument("data", help="databank CSV")
    p.add_argument("--grid-points", type=int, default=50, help="points per sweep")
    p.add_argument("--output-dir", help="directory for the CSVs")

    p = sub.add_parser("compare", help="score fitted models on shared test rows")
    p.add_argument("data", help="databank CSV")
    p.add_argument("models", nargs="+", help="fitted model JSON files")
    p.add_argument("--partition", help="partition JSON; scores its test rows (default: all rows)")
    p.add_argument("--json", action="store_true", help="print JSON instead of text")
    return parser


def config_from_args(args):
    config = RunConfig.load(args.config) if args.config else RunConfig()
    if args.model:
        names = [n.strip() for item in args.model for n in item.split(",")]
        config.models = MODEL_NAMES if "all" in names else tuple(names)
    for flag, key in (("data", "data"), ("split", "split"), ("train_frac", "train_frac"),
                      ("split_seed", "split_seed"), ("seed", "seed"), ("folds", "folds"),
                      ("grid_points", "grid_points"), ("output_dir", "output_dir")):
        value = getattr(args, flag)
        if value is not None:
            setattr(config, key, value)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigurationError(f"--set expects MODEL.KEY=VALUE, got {item!r}")
        config.set(key.strip(), value)
    if not config.output_dir:
        config.output_dir = default_output_dir()
    return config


def _emit(text, path):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_stats(args):
    stats = describe(load_csv(args.data))
    _emit(json.dumps(stats.to_dict(), indent=2) + "\n", args.out)


def cmd_synth(args):
    save_csv(synthesize(args.n, args.seed, args.noise), args.out)


def cmd_partition(args):
    part = split(load_csv(args.data), args.split, args.train_frac, args.seed)
    _emit(json.dumps(part.to_dict(), indent=2) + "\n", args.out)


def cmd_run(args):
    out = run_pipeline(config_from_args(args), log=lambda msg: print(msg, file=sys.stderr))
    print(out)


def cmd_predict(args):
    model = FittedModel.load(args.model)
    X, _ = load_inputs(args.inputs)
    write_predictions(args.out or sys.stdout, model, X)


def cmd_sensitivity(args):
    model = FittedModel.load(args.model)
    report = sensitivity(model.predict, load_csv(args.data), args.grid_points)
    out = Path(args.output_dir or default_output_dir()) / "sensitivity"
    write_sensitivity(report, out, prefix=f"{model.name}_")
    print(out)


def cmd_compare(args):
    data = load_csv(args.data)
    if args.partition:
        data = data.subset(PartitionResult.load(args.partition).test_indices)
    models = [FittedModel.load(p) for p in args.models]
    table = compare({DISPLAY_NAMES[m.name]: m.predict for m in models}, data.X, data.y)
    sys.stdout.write(table.to_json() if args.json else table.render())


COMMANDS = {
    "stats": cmd_stats,
    "synth": cmd_synth,
    "partition": cmd_partition,
    "run": cmd_run,
    "predict": cmd_predict,
    "sensitivity": cmd_sensitivity,
    "compare": cmd_compare,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except StageError as exc:
        print(f"n2mmp {args.command}: {exc}", file=sys.stderr)
        return 1
    except (N2MMPError, OSError, ValueError) as exc:
        print(f"n2mmp {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
