"""``boostsel`` command line.

Exit codes: 0 success, 2 usage, 3 data, 4 training, 5 empty selection.
Every command writes ``manifest.json`` into its ``--out`` directory.
"""

import argparse
import datetime
import hashlib
import json
import logging
import os
import sys

from . import __version__
from .boosting import DIAGNOSIS_CONFIG, REDUCTION_CONFIG, TrainConfig, dumps_model, fit, load_model
from .dataset import drop_missing_age, ingest_csv, stratified_split
from .errors import (
    BoostselError,
    ConfigError,
    DatasetError,
    EmptySelection,
    ModelFileError,
    TrainingError,
)
from .evaluation import cross_validate, evaluate_gbdt, evaluate_knn, gbdt_runner, knn_runner
from .knn import knn_fit
from .metrics import format_confusion, format_table
from .parallel import ENV_VAR, thread_count
from .selection import SelectionConfig, run_pipeline

log = logging.getLogger("boostsel")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAINING, EXIT_EMPTY = 0, 2, 3, 4, 5


class Run:
    """Collects what a command read and wrote, then emits the manifest."""

    def __init__(self, command, args):
        self.command = command
        self.args = args
        self.out = args.out
        self.inputs = {}
        self.outputs = []
        self.notes = {}
        self.started = _now()
        os.makedirs(self.out, exist_ok=True)

    def read(self, path):
        self.inputs[path] = _sha256(path)
        return path

    def write(self, name, text):
        path = os.path.join(self.out, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.outputs.append(path)
        return path

    def write_json(self, name, doc):
        return self.write(name, json.dumps(doc, indent=1) + "\n")

    def finish(self, exit_code):
        params = {k: v for k, v in vars(self.args).items() if k != "func"}
        seeds = {k: v for k, v in params.items() if k.endswith("seed")}
        manifest = {
            "command": self.command,
            "parameters": params,
            "seeds": seeds,
            "inputs": self.inputs,
            "library_version": __version__,
            "threads": thread_count(),
            "notes": self.notes,
            "started_at": self.started,
            "finished_at": _now(),
            "outputs": self.outputs + [os.path.join(self.out, "manifest.json")],
            "exit_code": exit_code,
        }
        with open(os.path.join(self.out, "manifest.json"), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(manifest, indent=1, default=str) + "\n")


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _read_list(path):
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip() and not line.startswith("#")]


def _load(run, args, path=None):
    path = path or args.input
    d = ingest_csv(run.read(path), args.label_column, args.positive_label, args.id_column,
                   args.age_column, tuple(args.missing_age_token or [""]))
    if args.age_column:
        before = d.n_rows
        d = drop_missing_age(d)
        run.notes.setdefault("dropped_missing_age", {})[path] = before - d.n_rows
    return d


def _config(args, prefix=""):
    get = lambda name: getattr(args, prefix + name)  # noqa: E731
    return TrainConfig(
        iterations=get("iterations"),
        depth=get("depth"),
        learning_rate=get("learning_rate"),
        l2_leaf_reg=get("l2_leaf_reg"),
        class_weighting=get("class_weighting"),
        seed=args.seed,
        max_bins=get("max_bins"),
    )


# --- commands ---------------------------------------------------------------


def cmd_split(run, args):
    d = _load(run, args)
    plan = stratified_split(d, args.train_fraction, args.seed)
    run.write("train_indices.txt", "".join(f"{i}\n" for i in plan.train_indices))
    run.write("validation_indices.txt", "".join(f"{i}\n" for i in plan.validation_indices))
    run.write_json("split.json", plan.to_json())
    log.info("split %d rows: %d train / %d validation", d.n_rows,
             len(plan.train_indices), len(plan.validation_indices))
    return EXIT_OK


def cmd_train(run, args):
    d = _load(run, args)
    model = fit(d, _config(args))
    run.write("model.json", dumps_model(model))
    return EXIT_OK


def cmd_cv(run, args):
    d = _load(run, args)
    if args.model == "knn":
        runner = knn_runner(args.k)
        echo = {"model": "knn", "config": {"k": args.k, "distance": "euclidean"}}
    else:
        config = _config(args)
        runner = gbdt_runner(config, args.threshold)
        echo = {"model": "gbdt", "config": config.to_json(), "threshold": args.threshold}
    summary = cross_validate(d, runner, args.folds, args.seed, pooled=args.pooled)
    doc = summary.to_json()
    doc.update(echo)
    run.write_json("cv_summary.json", doc)
    columns = {f"{args.folds}CV": summary.mean}
    if summary.pooled is not None:
        columns["Pooled"] = summary.pooled
    run.write("cv_summary.txt", format_table(columns))
    return EXIT_OK


def cmd_select(run, args):
    d = _load(run, args)
    exclusions = _read_list(run.read(args.exclude_file)) if args.exclude_file else []
    cfg = SelectionConfig(
        top_k=args.top_k,
        exclusion_list=frozenset(exclusions),
        always_include=tuple(args.always_include or ()),
        wide_config=_config(args, "wide_"),
        compact_config=_config(args, "compact_"),
        seed=args.seed,
        compact_seed=args.compact_seed,
        train_fraction=args.train_fraction,
        cv_folds=args.folds,
        importance_repeats=args.importance_repeats,
        threshold=args.threshold,
    )
    try:
        result, compact, cv = run_pipeline(d, cfg)
    except EmptySelection as exc:
        for report in exc.reports:
            run.write(f"importance_{report.method}.csv", report.to_csv())
        raise
    for report in result.reports:
        run.write(f"importance_{report.method}.csv", report.to_csv())
    run.write_json("selection.json", result.to_json())
    run.write("final_features.txt", "".join(f"{n}\n" for n in result.final_features))
    run.write("wide_model.json", dumps_model(result.wide_model))
    run.write("compact_model.json", dumps_model(compact))
    run.write_json("cv_summary.json", cv.to_json())
    table = format_table({"Validation Set": result.validation, f"{args.folds}CV": cv.mean})
    run.write("metrics.txt", table + "\nValidation confusion matrix\n"
              + format_confusion(result.validation.matrix))
    log.info("selected %d features: %s", len(result.final_features),
             ", ".join(result.final_features))
    return EXIT_OK


def cmd_evaluate(run, args):
    run.notes["threshold"] = args.threshold
    d = _load(run, args)
    if args.model == "knn":
        if not args.train_input:
            raise ConfigError("--model knn needs --train-input")
        train = _load(run, args, args.train_input)
        if train.feature_names != d.feature_names:
            _mismatch(train.feature_names, d.feature_names)
        report = evaluate_knn(knn_fit(train, k=args.k), d)
    else:
        if not args.model_file:
            raise ConfigError("--model gbdt needs --model-file")
        model = load_model(run.read(args.model_file))
        missing = [n for n in model.feature_names if n not in d.feature_names]
        if missing:
            _mismatch(model.feature_names, d.feature_names)
        report = evaluate_gbdt(model, d.project(model.feature_names), args.threshold)
    run.write_json("metrics.json", report.to_json())
    run.write("metrics.txt", format_table({"Evaluation": report})
              + "\nConfusion matrix\n" + format_confusion(report.matrix))
    return EXIT_OK


def _mismatch(model_names, data_names):
    a, b = set(model_names), set(data_names)
    raise DatasetError(
        "feature mismatch between model and dataset; missing from dataset: "
        f"{sorted(a - b)}; not used by model: {sorted(b - a)}"
    )


def cmd_synth(run, args):
    from .synthetic import make_cohort, make_planted, write_csv

    if args.kind == "cohort":
        records = make_cohort(args.rows, args.noise_features, args.shift, seed=args.seed)
    else:
        d, informative = make_planted(args.rows, args.noise_features + args.informative,
                                      args.informative, args.shift, seed=args.seed)
        records = [["id", "label"] + list(d.feature_names)]
        for sid, y, row in zip(d.sample_ids, d.labels, d.rows):
            records.append([sid, "AML" if y else "healthy"] + [repr(float(v)) for v in row])
        run.notes["informative"] = informative
    path = os.path.join(args.out, args.name)
    write_csv(records, path)
    run.outputs.append(path)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _fraction(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _folds(text):
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError(f"need at least 2 folds, got {text}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_data_args(p):
    p.add_argument("--input", required=True, help="CSV with a header row")
    p.add_argument("--label-column", default="label")
    p.add_argument("--positive-label", default="AML")
    p.add_argument("--id-column", default="id")
    p.add_argument("--age-column", default=None,
                   help="rows with a missing age are dropped before use")
    p.add_argument("--missing-age-token", action="append",
                   help="cell value meaning 'age missing' (repeatable; empty cell always counts)")


def _add_common(p):
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", required=True, help="output directory")


def _add_gbdt_args(p, prefix="", defaults=DIAGNOSIS_CONFIG):
    flag = "--" + prefix.replace("_", "-")
    p.add_argument(flag + "iterations", dest=prefix + "iterations", type=_positive_int,
                   default=defaults.iterations)
    p.add_argument(flag + "depth", dest=prefix + "depth", type=_positive_int,
                   default=defaults.depth)
    p.add_argument(flag + "learning-rate", dest=prefix + "learning_rate", type=float,
                   default=defaults.learning_rate)
    p.add_argument(flag + "l2-leaf-reg", dest=prefix + "l2_leaf_reg", type=float,
                   default=defaults.l2_leaf_reg)
    p.add_argument(flag + "class-weighting", dest=prefix + "class_weighting",
                   choices=("none", "balanced"), default=defaults.class_weighting)
    p.add_argument(flag + "max-bins", dest=prefix + "max_bins", type=int,
                   default=defaults.max_bins)


def build_parser():
    parser = argparse.ArgumentParser(prog="boostsel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="stratified train/validation split")
    _add_data_args(p)
    _add_common(p)
    p.add_argument("--train-fraction", type=_fraction, default=0.8)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a GBDT model on a whole file")
    _add_data_args(p)
    _add_common(p)
    _add_gbdt_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", help="stratified K-fold cross-validation")
    _add_data_args(p)
    _add_common(p)
    p.add_argument("--model", choices=("gbdt", "knn"), default="gbdt")
    _add_gbdt_args(p)
    p.add_argument("--k", type=_positive_int, default=5, help="neighbours for --model knn")
    p.add_argument("--folds", type=_folds, default=10)
    p.add_argument("--threshold", type=_fraction, default=0.5)
    p.add_argument("--pooled", action="store_true",
                   help="also report metrics on pooled out-of-fold predictions")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("select", help="dual-importance feature selection pipeline")
    _add_data_args(p)
    _add_common(p)
    p.add_argument("--top-k", type=_positive_int, default=100)
    p.add_argument("--exclude-file", help="newline-delimited feature names to drop")
    p.add_argument("--always-include", action="append", metavar="FEATURE")
    p.add_argument("--compact-seed", type=_seed, default=None,
                   help="seed for the compact model's re-split (default: --seed)")
    p.add_argument("--train-fraction", type=_fraction, default=0.8)
    p.add_argument("--folds", type=_folds, default=10)
    p.add_argument("--importance-repeats", type=_positive_int, default=5)
    p.add_argument("--threshold", type=_fraction, default=0.5)
    _add_gbdt_args(p, "wide_", REDUCTION_CONFIG)
    _add_gbdt_args(p, "compact_", DIAGNOSIS_CONFIG)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="score a saved model on a dataset")
    _add_data_args(p)
    _add_common(p)
    p.add_argument("--model", choices=("gbdt", "knn"), default="gbdt")
    p.add_argument("--model-file")
    p.add_argument("--train-input", help="training CSV for --model knn")
    p.add_argument("--k", type=_positive_int, default=5)
    p.add_argument("--threshold", type=_fraction, default=0.5)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="write a synthetic demo cohort")
    _add_common(p)
    p.add_argument("--kind", choices=("planted", "cohort"), default="cohort")
    p.add_argument("--rows", type=_positive_int, default=400)
    p.add_argument("--noise-features", type=int, default=30)
    p.add_argument("--informative", type=_positive_int, default=5)
    p.add_argument("--shift", type=float, default=1.2)
    p.add_argument("--name", default="cohort.csv")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    run = Run(args.command, args)
    code = EXIT_OK
    try:
        code = args.func(run, args)
    except EmptySelection as exc:
        code = EXIT_EMPTY
        print(f"boostsel: {exc}", file=sys.stderr)
    except ConfigError as exc:
        code = EXIT_USAGE
        print(f"boostsel: {exc}", file=sys.stderr)
    except (DatasetError, ModelFileError, OSError) as exc:
        code = EXIT_DATA
        print(f"boostsel: {exc}", file=sys.stderr)
    except (TrainingError, BoostselError) as exc:
        code = EXIT_TRAINING
        print(f"boostsel: {exc}", file=sys.stderr)
    run.notes["threads_env"] = os.environ.get(ENV_VAR)
    run.finish(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
