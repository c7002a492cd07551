"""Command-line entry point (``ucreduce``).

Exit codes: 0 success, 2 validation or input error, 3 stage failure.
``UCREDUCE_WORKERS`` sets the worker count and ``UCREDUCE_VERBOSE``
(0, 1 or 2) the log level.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .datagen import NoiseParams, generate_dataset, read_dataset, shuffle_split, write_dataset
from .errors import ParseError, StageError, UcReduceError, ValidationError
from .grid import load_system, save_system
from .lr import (LrConfig, load_ensemble, save_ensemble, threshold_accuracies,
                 train_ensemble, tune_threshold)
from .mip import MipOptions
from .reduction import ProcedureId

EXIT_OK, EXIT_VALIDATION, EXIT_STAGE = 0, 2, 3
SYSTEM_COPY = "system.json"


def parse_grid(text: str) -> tuple:
    """``LO:HI:STEP`` (inclusive) or a comma-separated list of thresholds."""
    try:
        if ":" in text:
            lo, hi, step = (float(v) for v in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(round((hi - lo) / step))
            grid = tuple(round(lo + k * step, 10) for k in range(n + 1))
        else:
            grid = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"bad threshold grid {text!r}; expected LO:HI:STEP or a list") from None
    if not grid or any(not 0.0 <= g <= 1.0 for g in grid):
        raise ValidationError(f"threshold grid {text!r} must be non-empty and within [0, 1]")
    return grid


def parse_procedures(text: str) -> tuple:
    try:
        return tuple(ProcedureId.parse(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def _verbosity() -> int:
    level = os.environ.get("UCREDUCE_VERBOSE", "0")
    return {"0": logging.WARNING, "1": logging.INFO}.get(level, logging.DEBUG)


def _dataset_system(dataset_dir: Path, explicit=None):
    path = Path(explicit) if explicit else dataset_dir / SYSTEM_COPY
    if not path.is_file():
        raise ValidationError(f"system file not found: {path} (pass --system)")
    return load_system(path)


def _load_dataset(path):
    path = Path(path)
    if not (path / "samples.jsonl").is_file() or not (path / "manifest.json").is_file():
        raise ValidationError(f"not a dataset directory: {path}")
    return read_dataset(path)


def _require_split(dataset, path):
    if dataset.split is None:
        raise ValidationError(f"dataset {path} has no split; run 'ucreduce split' first")


def _lr_config(path) -> LrConfig:
    if path is None:
        return LrConfig()
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    doc = doc.get("lr", doc)
    fields = {k: doc[k] for k in ("C", "tol", "max_iter", "seed", "grid") if k in doc}
    if "grid" in fields:
        fields["grid"] = tuple(fields["grid"])
    try:
        return LrConfig(**fields)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def _print(doc) -> None:
    print(json.dumps(doc, indent=2, default=str))


def cmd_generate(args) -> None:
    system = load_system(args.system)
    params = NoiseParams(args.global_sigma, args.nodal_sigma, args.seed)
    dataset = generate_dataset(system, args.count, params, MipOptions(relative_gap=args.gap),
                               harness.env_workers())
    out = Path(args.out)
    write_dataset(dataset, out)
    save_system(system, out / SYSTEM_COPY)
    _print({"samples": len(dataset), "rejected": dataset.infeasible_ids, "out": str(out)})


def cmd_split(args) -> None:
    dataset = _load_dataset(args.dataset)
    dataset = shuffle_split(dataset, args.fraction, args.seed)
    write_dataset(dataset, args.dataset)
    _print({"train": len(dataset.split[0]), "test": len(dataset.split[1])})


def cmd_train(args) -> None:
    dataset = _load_dataset(args.dataset)
    _require_split(dataset, args.dataset)
    config = _lr_config(args.config)
    ens = train_ensemble(dataset.train, config, dataset.system_hash)
    save_ensemble(ens, args.out)
    _print({"model": str(args.out), "training_time_s": ens.training_time})


def cmd_tune(args) -> None:
    dataset = _load_dataset(args.dataset)
    _require_split(dataset, args.dataset)
    ens = load_ensemble(args.model)
    grid = parse_grid(args.grid) if args.grid else ens.config.grid
    th = tune_threshold(ens, dataset.train, grid)
    save_ensemble(ens.with_threshold(th), args.model)
    train_acc = threshold_accuracies(ens, dataset.train, grid)
    test_acc = threshold_accuracies(ens, dataset.test, [th])
    _print({"threshold": th, "train_accuracy": train_acc[th], "test_accuracy": test_acc[th],
            "train_accuracy_by_threshold": {f"{k:.2f}": v for k, v in train_acc.items()}})


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else Path(args.dataset)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_benchmark(args) -> None:
    dataset = _load_dataset(args.dataset)
    _require_split(dataset, args.dataset)
    system = _dataset_system(Path(args.dataset), args.system)
    ens = load_ensemble(args.model)
    options = MipOptions(relative_gap=args.gap)
    rows = harness.benchmark(system, dataset.test, ens, parse_procedures(args.procedures),
                             options, harness.env_workers())
    out = _out_dir(args)
    harness.write_csv(rows, harness.OUTCOME_FIELDS, out / "outcomes.csv")
    summary = harness.summarize(rows, extra={"system_hash": system.digest(),
                                             "threshold": ens.threshold})
    harness.write_json(summary, out / "summary.json")
    _print(summary["procedures"])


def cmd_sensitivity(args) -> None:
    dataset = _load_dataset(args.dataset)
    _require_split(dataset, args.dataset)
    system = _dataset_system(Path(args.dataset), args.system)
    ens = load_ensemble(args.model)
    out = _out_dir(args)
    options = MipOptions(relative_gap=args.gap)
    b1_rows = None
    if (out / "outcomes.csv").exists():
        b1_rows = [r for r in harness.read_csv(out / "outcomes.csv") if r["procedure"] == "B1"]
        if {r["sample_id"] for r in b1_rows} != set(dataset.split[1]):
            b1_rows = None
    table, rows = harness.threshold_sensitivity(system, dataset.test, ens, parse_grid(args.grid),
                                                parse_procedures(args.procedures), options, b1_rows)
    harness.write_csv(table, harness.SENSITIVITY_FIELDS, out / "sensitivity.csv")
    harness.write_csv(rows, harness.OUTCOME_FIELDS, out / "sensitivity_outcomes.csv")
    _print(table)


def cmd_report(args) -> None:
    directory = Path(args.input)
    if not (directory / "outcomes.csv").is_file():
        raise ValidationError(f"no outcomes.csv in {directory}")
    summary = harness.report(directory)
    _print(summary["procedures"])


def cmd_run(args) -> None:
    path = Path(args.config) if args.config else harness.bundled_config_path()
    config = harness.load_config(path, args.out)
    config = replace(config, workers=harness.env_workers(config.workers), resume=args.resume)
    rep = harness.run_pipeline(config)
    harness.write_plot_data(rep.out_dir)
    _print({"out": str(rep.out_dir), "training": rep.summary["training"],
            "procedures": {p: {"n_infeasible": a["n_infeasible"], "mean_sq": a["mean_sq"],
                               "mean_nodes": a["mean_nodes"]}
                           for p, a in rep.summary["procedures"].items()}})


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ucreduce", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="solve perturbed demand profiles into a dataset")
    p.add_argument("--system", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.add_argument("--global-sigma", type=float, default=0.03)
    p.add_argument("--nodal-sigma", type=float, default=0.05)
    p.add_argument("--gap", type=float, default=0.01)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("split", help="shuffle a dataset into train/test ids")
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--fraction", type=float, default=0.8)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="fit the per-target classifiers on the training split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", help="JSON with C, tol, max_iter, grid (or an experiment config)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="pick the decision threshold on training accuracy")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--grid", help="LO:HI:STEP, default 0.2:0.8:0.05")
    p.set_defaults(func=cmd_tune)

    for name, helptext in (("benchmark", "run B1/B2/P1/P2 on the test split"),
                           ("sensitivity", "rerun procedures across decision thresholds")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--model", required=True)
        p.add_argument("--dataset", required=True)
        p.add_argument("--system", help=f"system file, default <dataset>/{SYSTEM_COPY}")
        p.add_argument("--gap", type=float, default=0.01)
        p.add_argument("--out", help="report directory, default the dataset directory")
        if name == "benchmark":
            p.add_argument("--procedures", default="b1,b2,p1,p2")
            p.set_defaults(func=cmd_benchmark)
        else:
            p.add_argument("--grid", default="0.2:0.9:0.1")
            p.add_argument("--procedures", default="b2,p1,p2")
            p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("report", help="recompute summary.json and write plot data")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="run the whole experiment from a config file")
    p.add_argument("--config", help="experiment JSON, default the bundled 6-bus experiment")
    p.add_argument("--out", help="override the config's output directory")
    p.add_argument("--resume", action="store_true", help="reuse data and model already in --out")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=_verbosity(), format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValidationError, ParseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except UcReduceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
