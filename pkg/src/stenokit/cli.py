"""Command-line pipeline: cohort generation, combination searches, multiclass
tables and the database-size sweep.

Every command is a pure function of its inputs, flags and seed: reruns write
byte-identical outputs for any worker count. Progress goes to stdout; errors
are emitted as one JSON object on stderr with exit codes 2 (usage), 3 (data)
and 4 (numerical failure).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .model import BloodProperties
from .solver import NumericsConfig
from .svg import line_plot
from .tasks import (MethodConfig, all_combinations, combination_label,
                    combination_search, cpc_roc, multiclass_evaluate,
                    split_folds, vpd_size_sweep)
from .vpd import (CohortDefaults, DEFAULT_N_PATIENTS, Dataset,
                  ParameterDistributions, build_vpd, load_dataset, save_dataset)

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

WORKERS_ENV = "STENOKIT_WORKERS"


class UsageError(ValueError):
    pass


class DataError(ValueError):
    pass


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise DataError("config file must hold a JSON object")
    return cfg


def _build_sections(cfg: dict):
    try:
        blood = BloodProperties(**cfg.get("blood", {}))
        pressures = cfg.get("pressures", {})
        defaults = CohortDefaults(
            blood=blood,
            external_pressure=pressures.get("external", 0.0),
            diastolic_pressure=pressures.get("diastolic", 10.0e3),
            outflow_pressure=pressures.get("outflow", 0.0),
            period=cfg.get("period", 1.0))
        numerics = NumericsConfig(**cfg.get("numerics", {}))
        dist_over = cfg.get("distributions", {})
        if "inlet_means" in dist_over:
            dist_over = dict(dist_over)
            dist_over["inlet_means"] = tuple(dist_over["inlet_means"])
        distributions = ParameterDistributions(**dist_over)
        ml_over = dict(cfg.get("ml", {}))
        method_config = MethodConfig(**ml_over)
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad config: {exc}") from exc
    return defaults, numerics, distributions, method_config


def _config_echo(args: argparse.Namespace, cfg: dict) -> dict:
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    return {"flags": flags, "config_file": cfg}


def _write_json(path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _stem(path: str) -> str:
    return path[:-4] if path.endswith(".csv") else path


def _load_dataset_checked(path: str):
    try:
        return load_dataset(path)
    except FileNotFoundError as exc:
        raise DataError(f"dataset not found: {path}") from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc


# --- commands -------------------------------------------------------------------

def cmd_generate(args: argparse.Namespace) -> int:
    if args.n < 4:
        raise UsageError("--n must be at least 4")
    cfg = _load_config(args.config)
    defaults, numerics, distributions, _ = _build_sections(cfg)
    print(f"generating {args.n} virtual patients (seed {args.seed}, "
          f"{args.workers} worker{'s' if args.workers != 1 else ''})")

    def progress(attempts, accepted):
        print(f"  {accepted} accepted / {attempts} attempts", flush=True)

    try:
        dataset = build_vpd(args.n, args.seed, distributions=distributions,
                            numerics=numerics, defaults=defaults,
                            workers=args.workers, progress=progress)
    except RuntimeError as exc:
        raise RuntimeError(f"generation failed: {exc}") from exc
    dataset.metadata["config"]["cli"] = _config_echo(args, cfg)
    save_dataset(dataset, args.out)
    print(f"wrote {args.out} ({len(dataset)} patients; "
          f"rejections {dataset.metadata['rejections']})")
    return 0


def _write_search_outputs(out: str, scheme: str, result, methods, echo: dict) -> None:
    lines = ["combination,method,f_mean,sensitivity_mean,specificity_mean,error"]
    for row in result.rows:
        err = row.error or ""
        lines.append(f"{combination_label(row.combination)},{row.method},"
                     f"{repr(row.f_mean)},{repr(row.sensitivity_mean)},"
                     f"{repr(row.specificity_mean)},{err}")
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    stem = _stem(out)
    agg_lines = ["method,size,f_mean,f_min,f_max,count"]
    series = []
    for method in methods:
        aggs = result.size_aggregates(method)
        for a in aggs:
            agg_lines.append(f"{method},{a['size']},{repr(a['mean'])},"
                             f"{repr(a['min'])},{repr(a['max'])},{a['count']}")
        if aggs:
            series.append({"label": method, "x": [a["size"] for a in aggs],
                           "y": [a["mean"] for a in aggs], "markers": True})
    with open(stem + "_sizes.csv", "w") as fh:
        fh.write("\n".join(agg_lines) + "\n")
    if series:
        line_plot(stem + "_f_vs_size.svg", series, "number of input measurements",
                  "mean F score", f"{scheme} combination search")
    _write_json(stem + "_meta.json", echo)


def cmd_search(args: argparse.Namespace) -> int:
    if args.scheme not in ("enbc", "ivbc:aorta", "ivbc:iliac1", "ivbc:iliac2"):
        raise UsageError(f"unknown scheme {args.scheme!r}")
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    known = {"lr", "svm", "svm_linear", "nb", "rf"}
    bad = set(methods) - known
    if not methods or bad:
        raise UsageError(f"bad methods {sorted(bad)}; choose from {sorted(known)}")
    cfg = _load_config(args.config)
    _, _, _, method_config = _build_sections(cfg)
    ids, classes, features, _meta = _load_dataset_checked(args.dataset)
    folds = split_folds(classes, args.seed)
    print(f"searching {len(all_combinations())} combinations x {len(methods)} "
          f"methods on {len(ids)} patients ({args.scheme})")
    result = combination_search(features, classes, args.scheme, methods, folds,
                                method_config, workers=args.workers)
    failures = [r for r in result.rows if r.error]
    echo = _config_echo(args, cfg)
    _write_search_outputs(args.out, args.scheme, result, methods, echo)
    print(f"wrote {args.out} ({len(result.rows)} rows, {len(failures)} failed cells)")
    return 0


def cmd_multiclass(args: argparse.Namespace) -> int:
    if args.strategy not in ("ova", "ovo", "cpc"):
        raise UsageError(f"unknown strategy {args.strategy!r}")
    if not 0.0 <= args.boundary <= 1.0:
        raise UsageError("--boundary must lie in [0, 1]")
    cfg = _load_config(args.config)
    _, _, _, method_config = _build_sections(cfg)
    ids, classes, features, _meta = _load_dataset_checked(args.dataset)
    folds = split_folds(classes, args.seed)
    print(f"{args.strategy} on {len(ids)} patients, boundary {args.boundary}")
    result = multiclass_evaluate(features, classes, args.strategy, folds,
                                 method_config, boundary=args.boundary)
    class_names = ("healthy", "aorta", "iliac1", "iliac2")
    lines = ["class,sensitivity,specificity"]
    for cls, name in enumerate(class_names):
        lines.append(f"{name},{repr(result.mean_sensitivity(cls))},"
                     f"{repr(result.mean_specificity(cls))}")
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    stem = _stem(args.out)
    echo = _config_echo(args, cfg)
    _write_json(stem + "_meta.json", echo)
    if args.roc:
        if args.strategy != "cpc":
            raise UsageError("--roc is only defined for the cpc strategy")
        curve = cpc_roc(features, classes, folds, method_config)
        roc_lines = ["boundary,false_positive_rate,true_positive_rate"]
        for b, fp, tp in zip(curve.boundaries, curve.fpr, curve.tpr):
            roc_lines.append(f"{repr(float(b))},{repr(float(fp))},{repr(float(tp))}")
        roc_lines.append(f"auc,{repr(curve.auc)},")
        with open(stem + "_roc.csv", "w") as fh:
            fh.write("\n".join(roc_lines) + "\n")
        line_plot(stem + "_roc.svg",
                  [{"label": f"healthy (AUC {curve.auc:.3f})",
                    "x": list(curve.fpr), "y": list(curve.tpr)},
                   {"label": "naive", "x": [0.0, 1.0], "y": [0.0, 1.0]}],
                  "false positive rate", "true positive rate", "healthy-class ROC")
        print(f"wrote {stem}_roc.csv (AUC {curve.auc:.4f})")
    print(f"wrote {args.out}")
    return 0


def cmd_size_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    _, _, _, method_config = _build_sections(cfg)
    ids, classes, features, _meta = _load_dataset_checked(args.dataset)
    if args.sizes:
        try:
            sizes = [int(s) for s in args.sizes.split(",")]
        except ValueError as exc:
            raise UsageError(f"bad --sizes: {exc}") from exc
    else:
        # default ladder: 1000 up to the dataset size in steps of 1000
        sizes = list(range(1000, min(7000, len(ids)) + 1, 1000))
        if not sizes:
            raise UsageError(f"dataset too small ({len(ids)} rows) for the "
                             "default size ladder; pass --sizes")
    if max(sizes) > len(ids):
        raise UsageError(f"size {max(sizes)} exceeds the dataset ({len(ids)} rows)")
    print(f"size sweep over {sizes} on {len(ids)} patients")
    rows = vpd_size_sweep(features, classes, sizes, args.seed, method_config)
    lines = ["size,scheme,train_f,test_f"]
    for row in rows:
        lines.append(f"{row['size']},{row['scheme']},{repr(row['train_f'])},"
                     f"{repr(row['test_f'])}")
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    stem = _stem(args.out)
    series = []
    for scheme in ("ivbc:aorta", "ivbc:iliac1", "ivbc:iliac2"):
        sub = [r for r in rows if r["scheme"] == scheme]
        series.append({"label": f"{scheme} test", "x": [r["size"] for r in sub],
                       "y": [r["test_f"] for r in sub], "markers": True})
        series.append({"label": f"{scheme} train", "x": [r["size"] for r in sub],
                       "y": [r["train_f"] for r in sub]})
    line_plot(stem + ".svg", series, "available patients", "mean F score",
              "classifier accuracy versus database size")
    _write_json(stem + "_meta.json", _config_echo(args, cfg))
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


# --- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stenokit",
        description="Synthetic arterial cohorts and stenosis classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build a virtual patient database")
    p.add_argument("--n", type=int, default=DEFAULT_N_PATIENTS,
                   help=f"cohort size (default {DEFAULT_N_PATIENTS})")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset CSV path")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--workers", type=int, default=_default_workers())
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("search", help="measurement-combination search")
    p.add_argument("--dataset", required=True)
    p.add_argument("--scheme", required=True,
                   help="enbc or ivbc:aorta|ivbc:iliac1|ivbc:iliac2")
    p.add_argument("--methods", default="lr,svm,nb,rf",
                   help="comma list from lr,svm,svm_linear,nb,rf")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--workers", type=int, default=_default_workers())
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("multiclass", help="OVA/OVO/CPC per-class table")
    p.add_argument("--dataset", required=True)
    p.add_argument("--strategy", required=True, help="ova, ovo or cpc")
    p.add_argument("--boundary", type=float, default=0.5)
    p.add_argument("--roc", action="store_true",
                   help="emit the healthy-class ROC (cpc only)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_multiclass)

    p = sub.add_parser("size-sweep", help="accuracy versus database size")
    p.add_argument("--dataset", required=True)
    p.add_argument("--sizes", default=None, help="comma list of subset sizes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_size_sweep)
    return parser


def _error_json(kind: str, message: str) -> str:
    return json.dumps({"error": kind, "message": message})


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(_error_json("usage", str(exc)), file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(_error_json("data", str(exc)), file=sys.stderr)
        return EXIT_DATA
    except (RuntimeError, FloatingPointError, ValueError) as exc:
        print(_error_json("numerical", str(exc)), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
