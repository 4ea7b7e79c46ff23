"""Command-line surface: train a model grid, score datasets, evaluate with
threshold transfer, and run one-axis sweeps.

All commands resolve their settings from built-in defaults, then an optional
JSON config file, then command-line flags (flags win).  The effective
configuration is echoed into the output directory as ``config.json`` and is
itself a valid ``--config`` input, so any run can be reproduced from its
output directory alone.
"""

import argparse
import itertools
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .data import load_csv, sequential_split, stratified_split
from .detector import SCORING_METHODS, SortadDetector
from .errors import (
    ConfigError,
    DataError,
    ModelFormatError,
    ModelVersionError,
    SelectionError,
    TrainingDivergenceError,
)
from .evaluation import evaluate
from .serialization import load_model, save_model

DEFAULT_CONFIG = {
    "data": None,
    "train": None,
    "validation": None,
    "test": None,
    "label_col": "label",
    "split_fractions": [1 / 3, 1 / 3, 1 / 3],
    "split_mode": "stratified",
    "split_seed": 77,
    "seeds": [1235, 7234, 3553],
    "n_transformations": [5, 10, 15, 22],
    "epochs": [1, 50],
    "n_candidates": 20,
    "beta": 0.5,
    "max_degree": 10,
    "chain_length": 2,
    "divide_h": 2,
    "batch_size": 256,
    "learning_rate": 1e-3,
    "scoring": "modified",
    "r_multiplier": 3.0,
    "epsilon": 1e-12,
    "center_subsample": None,
    "thresholds": [0.03, 0.10],
    "out": "sortad-run",
}

SWEEP_AXES = ("num_transformations", "num_temp_transformations", "scoring_method")


def _as_list(value):
    return value if isinstance(value, list) else [value]


def _load_config_file(path):
    try:
        with open(path, encoding="utf-8") as handle:
            loaded = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(loaded, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    for key in loaded:
        if key not in DEFAULT_CONFIG:
            raise ConfigError(f"unknown config key {key!r}")
    return loaded


def _positive_int_list(cfg, key):
    values = _as_list(cfg[key])
    if not values:
        raise ConfigError(f"{key} must be non-empty")
    for v in values:
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ConfigError(f"{key} must contain positive integers, got {v!r}")
    return values


def _validate_config(cfg):
    cfg["n_transformations"] = _positive_int_list(cfg, "n_transformations")
    cfg["epochs"] = _positive_int_list(cfg, "epochs")
    cfg["seeds"] = [int(s) for s in _as_list(cfg["seeds"])]
    if not cfg["seeds"]:
        raise ConfigError("seeds must be non-empty")
    if not isinstance(cfg["n_candidates"], int) or cfg["n_candidates"] < 1:
        raise ConfigError(f"n_candidates must be a positive integer, got {cfg['n_candidates']!r}")
    if not 0.0 <= cfg["beta"] <= 1.0:
        raise ConfigError(f"beta must be in [0, 1], got {cfg['beta']}")
    if cfg["max_degree"] < 1:
        raise ConfigError(f"max_degree must be >= 1, got {cfg['max_degree']}")
    if cfg["chain_length"] < 1:
        raise ConfigError(f"chain_length must be >= 1, got {cfg['chain_length']}")
    if cfg["batch_size"] < 1:
        raise ConfigError(f"batch_size must be >= 1, got {cfg['batch_size']}")
    if cfg["learning_rate"] <= 0:
        raise ConfigError(f"learning_rate must be > 0, got {cfg['learning_rate']}")
    if cfg["scoring"] not in SCORING_METHODS:
        raise ConfigError(f"scoring must be one of {SCORING_METHODS}, got {cfg['scoring']!r}")
    if cfg["r_multiplier"] < 0:
        raise ConfigError(f"r_multiplier must be >= 0, got {cfg['r_multiplier']}")
    if not 0.0 < cfg["epsilon"] < 0.5:
        raise ConfigError(f"epsilon must be in (0, 0.5), got {cfg['epsilon']}")
    if cfg["split_mode"] not in ("stratified", "sequential"):
        raise ConfigError(f"split_mode must be stratified or sequential, got {cfg['split_mode']!r}")
    fractions = _as_list(cfg["split_fractions"])
    if not 1 <= len(fractions) <= 3:
        raise ConfigError("split_fractions must contain 1 to 3 values")
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-8:
        raise ConfigError(f"split_fractions must be positive and sum to 1, got {fractions}")
    cfg["split_fractions"] = [float(f) for f in fractions]
    thresholds = _as_list(cfg["thresholds"])
    if not thresholds or any(not 0.0 < t < 1.0 for t in thresholds):
        raise ConfigError(f"thresholds must lie in (0, 1), got {thresholds}")
    cfg["thresholds"] = [float(t) for t in thresholds]
    if cfg["center_subsample"] is not None and (
        not isinstance(cfg["center_subsample"], int) or cfg["center_subsample"] < 10_000
    ):
        raise ConfigError(
            f"center_subsample must be an integer >= 10000 or null, got {cfg['center_subsample']!r}"
        )
    return cfg


def _resolve_config(args):
    cfg = dict(DEFAULT_CONFIG)
    if args.config:
        cfg.update(_load_config_file(args.config))
    for key in ("data", "train", "validation", "test", "label_col", "split_mode", "out"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "seed", None):
        cfg["seeds"] = [int(s) for s in args.seed.split(",")]
    if getattr(args, "thresholds", None):
        try:
            cfg["thresholds"] = [float(t) for t in args.thresholds.split(",")]
        except ValueError as exc:
            raise ConfigError(f"thresholds flag is not a float list: {exc}") from exc
    return _validate_config(cfg)


def _load_dataset(path, label_col):
    # pass the label column through only when the file actually has it;
    # unlabeled feature-only CSVs are legitimate scoring inputs
    try:
        header = pd.read_csv(path, nrows=0).columns
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    use_label = label_col if label_col in header else None
    dataset, n_dropped = load_csv(path, label_col=use_label, name=Path(path).stem)
    if n_dropped:
        print(f"dropped {n_dropped} incomplete rows from {path}")
    return dataset


def _resolve_datasets(cfg):
    """Returns (train, validation, test); validation/test may be None."""
    if cfg["train"]:
        train = _load_dataset(cfg["train"], cfg["label_col"])
        validation = _load_dataset(cfg["validation"], cfg["label_col"]) if cfg["validation"] else None
        test = _load_dataset(cfg["test"], cfg["label_col"]) if cfg["test"] else None
        return train, validation, test
    if not cfg["data"]:
        raise ConfigError("either data or train must be provided")
    full = _load_dataset(cfg["data"], cfg["label_col"])
    fractions = cfg["split_fractions"]
    if len(fractions) == 1:
        return full, None, None
    try:
        if cfg["split_mode"] == "stratified":
            if full.labels is None:
                raise DataError(f"{cfg['data']} has no label column {cfg['label_col']!r}; stratified splitting needs labels")
            splits = stratified_split(full, fractions, cfg["split_seed"])
        else:
            splits = sequential_split(full, fractions)
            for k, part in enumerate(splits):
                if part.labels is not None:
                    print(f"sequential split {k}: {int(part.labels.sum())} anomalies in {len(part)} rows")
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if len(splits) == 2:
        return splits[0], None, splits[1]
    return splits[0], splits[1], splits[2]


def _echo_config(cfg, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w", encoding="utf-8", newline="\n") as handle:
        json.dump(cfg, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _model_name(m, epochs, seed):
    return f"model_M{m}_E{epochs}_s{seed}"


def _detector_params(cfg, m, epochs, seed):
    return dict(
        n_transformations=m,
        n_candidates=cfg["n_candidates"],
        beta=cfg["beta"],
        max_degree=cfg["max_degree"],
        chain_length=cfg["chain_length"],
        divide_h=cfg["divide_h"],
        epochs=epochs,
        batch_size=cfg["batch_size"],
        learning_rate=cfg["learning_rate"],
        scoring=cfg["scoring"],
        r_multiplier=cfg["r_multiplier"],
        epsilon=cfg["epsilon"],
        center_subsample=cfg["center_subsample"],
        alert_fraction=cfg["thresholds"][0],
        seed=seed,
    )


def cmd_train(args):
    cfg = _resolve_config(args)
    train, _, _ = _resolve_datasets(cfg)
    out_dir = Path(cfg["out"])
    _echo_config(cfg, out_dir)
    models_dir = out_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    log_lines = []
    for m, epochs in itertools.product(cfg["n_transformations"], cfg["epochs"]):
        for seed in cfg["seeds"]:
            name = _model_name(m, epochs, seed)
            detector = SortadDetector(**_detector_params(cfg, m, epochs, seed))
            detector.fit(train.features)
            save_model(detector, models_dir / f"{name}.sortad")
            for round_idx, (score, scored) in enumerate(detector.bank_.round_scores):
                log_lines.append(
                    f"model {name} round {round_idx} tscore {score:.6f} candidates {scored}"
                )
            log_lines.append(
                f"model {name} final_loss {detector.classifier_.final_epoch_loss:.6f}"
            )
            print(f"trained {name} (final loss {detector.classifier_.final_epoch_loss:.4f})")
    with open(out_dir / "train_log.txt", "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(log_lines) + "\n")
    print(f"wrote {out_dir / 'train_log.txt'}")
    return 0


def _write_scores_csv(report, path):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("sample_id,summation,dirichlet,modified,overflow\n")
        for i in range(report.summation.shape[0]):
            handle.write(
                f"{i},{report.summation[i]:.17e},{report.dirichlet[i]:.17e},"
                f"{report.modified[i]:.17e},{int(report.overflow[i])}\n"
            )


def cmd_score(args):
    cfg = _resolve_config(args)
    detector = load_model(args.model)
    if not cfg["data"]:
        raise ConfigError("score needs data (--data flag or a data path in the config)")
    dataset = _load_dataset(cfg["data"], cfg["label_col"])
    report = detector.score_report(dataset.features)
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"scores_{Path(args.model).stem}_{dataset.name}.csv"
    _write_scores_csv(report, out_path)
    print(f"wrote {out_path}")
    return 0


def _collect_model_paths(models_arg, cfg):
    path = Path(models_arg) if models_arg else Path(cfg["out"]) / "models"
    if path.is_dir():
        found = sorted(path.glob("*.sortad"))
        if not found:
            raise DataError(f"no .sortad model files in {path}")
        return found
    if path.is_file():
        return [path]
    raise DataError(f"model path {path} does not exist")


def _evaluate_model(detector, threshold_scores, target, thresholds):
    test_scores = detector.score_samples(target.features)
    return evaluate(threshold_scores, test_scores, target.labels, thresholds)


def cmd_evaluate(args):
    cfg = _resolve_config(args)
    train, validation, test = _resolve_datasets(cfg)
    if test is None:
        raise ConfigError("evaluate needs a test set (test path or 2+ split fractions)")
    if test.labels is None:
        raise DataError(f"test set {test.name} has no labels")
    if args.threshold_source == "validation" and validation is None:
        raise ConfigError("threshold-source validation requires a validation set")
    model_paths = _collect_model_paths(args.models, cfg)
    out_dir = Path(cfg["out"])
    reports_dir = out_dir / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)

    groups = {}
    for path in model_paths:
        detector = load_model(path)
        source = validation if args.threshold_source == "validation" else train
        threshold_scores = detector.score_samples(source.features)
        test_report = _evaluate_model(detector, threshold_scores, test, cfg["thresholds"])
        record = {
            "model": path.stem,
            "params": {
                "n_transformations": detector.n_transformations,
                "epochs": detector.epochs,
                "seed": detector.seed,
                "scoring": detector.scoring,
            },
            "threshold_source": args.threshold_source,
            "test": test_report.to_dict(),
        }
        if validation is not None and validation.labels is not None:
            val_report = _evaluate_model(detector, threshold_scores, validation, cfg["thresholds"])
            record["validation"] = val_report.to_dict()
        report_path = reports_dir / f"report_{path.stem}.json"
        with open(report_path, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(record, handle, indent=2, sort_keys=True)
            handle.write("\n")
        key = (detector.n_transformations, detector.epochs)
        groups.setdefault(key, []).append(record)
        print(f"evaluated {path.stem}: test ROC AUC {test_report.roc_auc:.4f}")

    summary = {"thresholds": cfg["thresholds"], "groups": []}
    for (m, epochs), records in sorted(groups.items()):
        entry = {
            "n_transformations": m,
            "epochs": epochs,
            "seeds": [r["params"]["seed"] for r in records],
            "test": _aggregate([r["test"] for r in records]),
        }
        if all("validation" in r for r in records):
            entry["validation"] = _aggregate([r["validation"] for r in records])
        summary["groups"].append(entry)
    selectable = [g for g in summary["groups"] if "validation" in g]
    if selectable:
        best = max(
            selectable,
            key=lambda g: (
                g["validation"]["vs_random"][0]["mean"],
                g["validation"]["roc_auc"]["mean"],
            ),
        )
        summary["selected"] = {
            "n_transformations": best["n_transformations"],
            "epochs": best["epochs"],
            "test": best["test"],
        }
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    _print_summary(summary)
    return 0


def _aggregate(reports):
    """Mean and standard deviation across seeds for AUC and per-threshold VS Random."""
    aucs = [r["roc_auc"] for r in reports]
    out = {"roc_auc": {"mean": float(np.mean(aucs)), "std": float(np.std(aucs))}}
    out["vs_random"] = []
    for t_idx in range(len(reports[0]["thresholds"])):
        values = [r["thresholds"][t_idx]["vs_random"] for r in reports]
        out["vs_random"].append(
            {
                "alert_fraction": reports[0]["thresholds"][t_idx]["alert_fraction"],
                "mean": float(np.mean(values)),
                "std": float(np.std(values)),
            }
        )
    return out


def _print_summary(summary):
    print("\nM      epochs  test AUC (mean+-std)   test VS Random per threshold")
    for group in summary["groups"]:
        auc = group["test"]["roc_auc"]
        vs_text = "  ".join(
            f"@{v['alert_fraction']:g}: {v['mean']:.2f}+-{v['std']:.2f}"
            for v in group["test"]["vs_random"]
        )
        print(
            f"{group['n_transformations']:<6} {group['epochs']:<7} "
            f"{auc['mean']:.4f}+-{auc['std']:.4f}      {vs_text}"
        )
    if "selected" in summary:
        sel = summary["selected"]
        print(
            f"selected on validation: M={sel['n_transformations']} "
            f"epochs={sel['epochs']} test AUC {sel['test']['roc_auc']['mean']:.4f}"
        )


def cmd_sweep(args):
    cfg = _resolve_config(args)
    train, _, test = _resolve_datasets(cfg)
    if test is None:
        raise ConfigError("sweep needs a test set (test path or 2+ split fractions)")
    if test.labels is None:
        raise DataError(f"test set {test.name} has no labels")
    values = args.values.split(",")
    if args.axis in ("num_transformations", "num_temp_transformations"):
        try:
            values = [int(v) for v in values]
        except ValueError as exc:
            raise ConfigError(f"values for {args.axis} must be integers: {exc}") from exc
        if any(v < 1 for v in values):
            raise ConfigError(f"values for {args.axis} must be positive")
    else:
        for v in values:
            if v not in SCORING_METHODS:
                raise ConfigError(f"unknown scoring method {v!r}")
    out_dir = Path(cfg["out"])
    _echo_config(cfg, out_dir)
    base_m = cfg["n_transformations"][0]
    base_epochs = cfg["epochs"][0]
    rows = []
    for value in values:
        per_seed = []
        for seed in cfg["seeds"]:
            params = _detector_params(cfg, base_m, base_epochs, seed)
            if args.axis == "num_transformations":
                params["n_transformations"] = value
            elif args.axis == "num_temp_transformations":
                params["n_candidates"] = value
            else:
                params["scoring"] = value
            detector = SortadDetector(**params).fit(train.features)
            report = evaluate(
                detector.train_scores_,
                detector.score_samples(test.features),
                test.labels,
                cfg["thresholds"][:1],
            )
            per_seed.append(report.thresholds[0].vs_random)
        rows.append((value, float(np.mean(per_seed)), float(np.std(per_seed))))
        print(f"{args.axis}={value}: vs_random {rows[-1][1]:.3f} +- {rows[-1][2]:.3f}")
    sweep_path = out_dir / f"sweep_{args.axis}.csv"
    with open(sweep_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("value,mean_vs_random_3,std_vs_random_3\n")
        for value, mean, std in rows:
            handle.write(f"{value},{mean:.17e},{std:.17e}\n")
    print(f"wrote {sweep_path}")
    return 0


def _add_common_flags(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", help="comma-separated seed list override")
    parser.add_argument("--label-col", dest="label_col", help="label column name")
    parser.add_argument("--thresholds", help="comma-separated alert fractions, e.g. 0.03,0.10")
    parser.add_argument(
        "--split-mode", dest="split_mode", choices=("stratified", "sequential")
    )
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--data", help="labeled CSV to split into train/validation/test")
    parser.add_argument("--train", help="pre-split training CSV")
    parser.add_argument("--validation", help="pre-split validation CSV")
    parser.add_argument("--test", help="pre-split test CSV")


def build_parser():
    parser = argparse.ArgumentParser(prog="sortad", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one model per grid point and seed")
    _add_common_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_score = sub.add_parser("score", help="score a CSV with a saved model")
    _add_common_flags(p_score)
    p_score.add_argument("--model", required=True, help="path to a .sortad model file")
    p_score.set_defaults(func=cmd_score)

    p_eval = sub.add_parser("evaluate", help="threshold-transfer evaluation of saved models")
    _add_common_flags(p_eval)
    p_eval.add_argument("--models", help="model file or directory (default: <out>/models)")
    p_eval.add_argument(
        "--threshold-source",
        dest="threshold_source",
        choices=("train", "validation"),
        default="train",
    )
    p_eval.set_defaults(func=cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="sweep one axis and emit a plottable CSV")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p_sweep.add_argument("--values", required=True, help="comma-separated axis values")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ModelFormatError, ModelVersionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (TrainingDivergenceError, SelectionError) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
