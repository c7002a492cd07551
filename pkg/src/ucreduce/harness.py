"""End-to-end experiment driver and benchmark metrics.

``run_pipeline`` goes generate -> split -> train -> tune -> benchmark ->
sensitivity and writes, into the output directory::

    samples.jsonl   manifest.json   model.json
    outcomes.csv    sensitivity.csv summary.json

Solution quality (SQ) and solve time (ST) are reported as percentages of
the B1 value for the same sample, averaged over samples where both the
procedure and B1 finished within the gap.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .datagen import Dataset, NoiseParams, generate_dataset, read_dataset, shuffle_split, write_dataset
from .errors import StageError, ValidationError
from .grid import GridSystem, load_system
from .lr import (LrConfig, LrEnsemble, classify, load_ensemble, save_ensemble,
                 threshold_accuracies, train_ensemble, tune_threshold)
from .mip import WITHIN_GAP, MipOptions
from .reduction import ProcedureId, fixing_counts, run_procedure

log = logging.getLogger(__name__)

ALL_PROCEDURES = (ProcedureId.B1, ProcedureId.B2, ProcedureId.P1, ProcedureId.P2)
SENSITIVITY_GRID = tuple(round(0.2 + 0.1 * k, 1) for k in range(8))

OUTCOME_FIELDS = (
    "sample_id", "procedure", "threshold", "status", "objective", "wall_time", "build_time",
    "nodes_explored", "n_fixed_u", "n_fixed_v",
    "n_linear_vars", "n_binary_vars", "n_constraints", "n_nonzeros",
    "sq", "st", "node_ratio",
)
SENSITIVITY_FIELDS = (
    "threshold", "procedure", "n_samples", "n_infeasible", "n_feasible",
    "mean_sq", "mean_st", "mean_nodes",
)
# summary keys whose values depend on wall-clock measurements
TIMING_KEYS = frozenset({"mean_st", "mean_wall_time", "training_time_s", "elapsed_s",
                         "time_savings"})


def env_workers(default: int = 1) -> int:
    try:
        return max(1, int(os.environ.get("UCREDUCE_WORKERS", default)))
    except ValueError:
        return default


def normalized_sq(obj_proc: Optional[float], obj_b1: Optional[float]) -> Optional[float]:
    """Objective as a percent of B1's; ``None`` when not applicable."""
    if obj_proc is None or obj_b1 is None or not obj_b1 > 0:
        return None
    return 100.0 * (obj_proc / obj_b1)


def normalized_st(time_proc: Optional[float], time_b1: Optional[float]) -> Optional[float]:
    """Solve time as a percent of B1's (time savings is 100 minus this)."""
    if time_proc is None or time_b1 is None or not time_b1 > 0:
        return None
    return 100.0 * (time_proc / time_b1)


@dataclass
class ExperimentConfig:
    system_path: str
    out_dir: str
    target_count: int = 60
    noise: NoiseParams = field(default_factory=lambda: NoiseParams(master_seed=42))
    split_seed: int = 42
    train_fraction: float = 0.8
    lr: LrConfig = field(default_factory=LrConfig)
    mip: MipOptions = field(default_factory=MipOptions)
    procedures: tuple = ALL_PROCEDURES
    sensitivity_grid: tuple = SENSITIVITY_GRID
    sensitivity_procedures: tuple = (ProcedureId.B2, ProcedureId.P1, ProcedureId.P2)
    workers: int = 1
    resume: bool = False

    def validate(self) -> None:
        if not Path(self.system_path).is_file():
            raise ValidationError(f"system file not found: {self.system_path}")
        if self.target_count < 2:
            raise ValidationError("target_count must be >= 2 to split")
        if any(not 0.0 <= g <= 1.0 for g in self.sensitivity_grid):
            raise ValidationError("sensitivity grid must lie within [0, 1]")

    def to_dict(self) -> dict:
        return {
            "system_path": str(self.system_path),
            "out_dir": str(self.out_dir),
            "target_count": self.target_count,
            "noise": asdict(self.noise),
            "split_seed": self.split_seed,
            "train_fraction": self.train_fraction,
            "lr": {**asdict(self.lr), "grid": list(self.lr.grid)},
            "mip": asdict(self.mip),
            "procedures": [p.value for p in self.procedures],
            "sensitivity_grid": list(self.sensitivity_grid),
            "sensitivity_procedures": [p.value for p in self.sensitivity_procedures],
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        kw = {k: doc[k] for k in ("system_path", "out_dir", "target_count", "split_seed",
                                  "train_fraction", "workers", "resume") if k in doc}
        if "noise" in doc:
            kw["noise"] = NoiseParams(**doc["noise"])
        if "lr" in doc:
            lr = dict(doc["lr"])
            if "grid" in lr:
                lr["grid"] = tuple(lr["grid"])
            kw["lr"] = LrConfig(**lr)
        if "mip" in doc:
            kw["mip"] = MipOptions(**doc["mip"])
        for key in ("procedures", "sensitivity_procedures"):
            if key in doc:
                kw[key] = tuple(ProcedureId.parse(p) for p in doc[key])
        if "sensitivity_grid" in doc:
            kw["sensitivity_grid"] = tuple(float(g) for g in doc["sensitivity_grid"])
        return cls(**kw)


def load_config(path, out_dir=None) -> ExperimentConfig:
    """Read an experiment config; a relative ``system_path`` is taken from the config's folder."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if "system_path" not in doc:
        raise ValidationError(f"{path}: missing 'system_path'")
    sys_path = Path(doc["system_path"])
    if not sys_path.is_absolute():
        doc["system_path"] = str(path.parent / sys_path)
    if out_dir is not None:
        doc["out_dir"] = str(out_dir)
    doc.setdefault("out_dir", "ucreduce_run")
    try:
        return ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: {exc}") from None


def bundled_config_path(name: str = "six_bus_experiment.json") -> Path:
    return Path(__file__).parent / "data" / name


def _outcome_row(sample_id, threshold, outcome, b1) -> dict:
    st = outcome.stats
    sq = stv = ratio = None
    if outcome.feasible and b1 is not None and b1.feasible:
        sq = normalized_sq(outcome.objective, b1.objective)
        stv = normalized_st(outcome.wall_time, b1.wall_time)
        ratio = outcome.nodes_explored / b1.nodes_explored if b1.nodes_explored else None
    return {
        "sample_id": sample_id,
        "procedure": outcome.procedure.value,
        "threshold": threshold,
        "status": outcome.status,
        "objective": outcome.objective,
        "wall_time": outcome.wall_time,
        "build_time": outcome.build_time,
        "nodes_explored": outcome.nodes_explored,
        "n_fixed_u": outcome.n_fixed_u,
        "n_fixed_v": outcome.n_fixed_v,
        "n_linear_vars": st.n_linear_vars,
        "n_binary_vars": st.n_binary_vars,
        "n_constraints": st.n_constraints,
        "n_nonzeros": st.n_nonzeros,
        "sq": sq,
        "st": stv,
        "node_ratio": ratio,
    }


def _benchmark_one(system, sample, classified, threshold, procedures, options):
    b1 = run_procedure(ProcedureId.B1, system, sample.demand, options=options)
    rows = []
    for proc in procedures:
        if proc is ProcedureId.B1:
            out = b1
        else:
            out = run_procedure(proc, system, sample.demand, classified, options)
        rows.append(_outcome_row(sample.sample_id, threshold, out, b1))
    return rows


def benchmark(system: GridSystem, samples: Sequence, ensemble: LrEnsemble,
              procedures: Sequence = ALL_PROCEDURES, options: MipOptions = MipOptions(),
              workers: int = 1) -> list:
    """Run each procedure on each sample at the ensemble's threshold; one row per pair.

    B1 is always solved, since every other procedure is normalized by it.
    """
    procedures = tuple(ProcedureId(p) for p in procedures)
    samples = sorted(samples, key=lambda s: s.sample_id)
    probs = ensemble.predict_proba([s.demand for s in samples])
    cls = classify(probs, ensemble.threshold)
    args = [(system, s, cls[k], ensemble.threshold, procedures, options)
            for k, s in enumerate(samples)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_benchmark_one, *zip(*args)))
    else:
        chunks = [_benchmark_one(*a) for a in args]
    return [row for chunk in chunks for row in chunk]


def _mean(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def aggregate(rows: Sequence) -> dict:
    """Per-procedure aggregates from outcome rows (B1 rows included)."""
    out = {}
    procs = sorted({r["procedure"] for r in rows})
    for proc in procs:
        mine = [r for r in rows if r["procedure"] == proc]
        ok = [r for r in mine if r["status"] == WITHIN_GAP]
        paired = [r for r in ok if r["sq"] is not None]
        out[proc] = {
            "n_samples": len(mine),
            "n_feasible": len(ok),
            "n_infeasible": sum(r["status"] == "infeasible" for r in mine),
            "n_limit": sum(r["status"] == "limit-reached" for r in mine),
            "n_paired": len(paired),
            "mean_sq": _mean([r["sq"] for r in paired]),
            "mean_st": _mean([r["st"] for r in paired]),
            "mean_nodes": _mean([r["nodes_explored"] for r in mine]),
            "mean_node_ratio": _mean([r["node_ratio"] for r in paired]),
            "mean_stats": {k: _mean([r[k] for r in mine])
                           for k in ("n_linear_vars", "n_binary_vars", "n_constraints", "n_nonzeros")},
            "mean_n_fixed_u": _mean([r["n_fixed_u"] for r in mine]),
            "mean_n_fixed_v": _mean([r["n_fixed_v"] for r in mine]),
        }
    return out


def threshold_sensitivity(system: GridSystem, samples: Sequence, ensemble: LrEnsemble,
                          grid: Sequence = SENSITIVITY_GRID,
                          procedures: Sequence = (ProcedureId.B2, ProcedureId.P1, ProcedureId.P2),
                          options: MipOptions = MipOptions(), b1_rows: Optional[Sequence] = None):
    """Re-threshold the predictions at each grid value and rerun the procedures.

    Returns ``(table, rows)``: one table entry per (threshold, procedure)
    and the per-sample outcome rows behind it. ``b1_rows`` (from
    :func:`benchmark`) avoids re-solving B1.
    """
    samples = sorted(samples, key=lambda s: s.sample_id)
    procedures = tuple(ProcedureId(p) for p in procedures)
    if b1_rows is None:
        b1_rows = benchmark(system, samples, ensemble, (ProcedureId.B1,), options)
    b1 = {r["sample_id"]: r for r in b1_rows if r["procedure"] == "B1"}
    probs = ensemble.predict_proba([s.demand for s in samples])
    table, rows = [], []
    for th in grid:
        cls = classify(probs, th)
        for proc in procedures:
            prow = []
            for k, smp in enumerate(samples):
                out = run_procedure(proc, system, smp.demand, cls[k], options)
                ref = b1[smp.sample_id]
                row = _outcome_row(smp.sample_id, float(th), out, None)
                if out.feasible and ref["status"] == WITHIN_GAP:
                    row["sq"] = normalized_sq(out.objective, ref["objective"])
                    row["st"] = normalized_st(out.wall_time, ref["wall_time"])
                    row["node_ratio"] = (out.nodes_explored / ref["nodes_explored"]
                                         if ref["nodes_explored"] else None)
                prow.append(row)
            agg = aggregate(prow)[proc.value]
            table.append({
                "threshold": float(th),
                "procedure": proc.value,
                "n_samples": agg["n_samples"],
                "n_infeasible": agg["n_infeasible"],
                "n_feasible": agg["n_feasible"],
                "mean_sq": agg["mean_sq"],
                "mean_st": agg["mean_st"],
                "mean_nodes": agg["mean_nodes"],
            })
            rows.extend(prow)
    return table, rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows: Sequence, fields: Sequence, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r.get(f)) for f in fields])


_INT_FIELDS = {"sample_id", "nodes_explored", "n_fixed_u", "n_fixed_v", "n_linear_vars",
               "n_binary_vars", "n_constraints", "n_nonzeros", "n_samples", "n_infeasible",
               "n_feasible"}
_STR_FIELDS = {"procedure", "status"}


def read_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if k in _STR_FIELDS:
                    row[k] = v
                elif v == "":
                    row[k] = None
                elif k in _INT_FIELDS:
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            out.append(row)
    return out


def summarize(outcome_rows, sensitivity_table=None, training=None, extra=None) -> dict:
    summary = {
        "procedures": aggregate(outcome_rows),
        "sensitivity": list(sensitivity_table or []),
    }
    if training is not None:
        summary["training"] = training
    if extra:
        summary.update(extra)
    for proc in summary["procedures"].values():
        proc["time_savings"] = None if proc["mean_st"] is None else 100.0 - proc["mean_st"]
    return summary


def strip_timing(obj):
    """Copy of a summary with wall-clock-derived fields removed."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def write_json(doc, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")


def _stage(name, fn, *args, **kwargs):
    log.info("stage %s", name)
    try:
        return fn(*args, **kwargs)
    except (ValidationError, StageError):
        raise
    except Exception as exc:  # stage failures carry the stage name
        raise StageError(name, exc) from exc


@dataclass
class BenchmarkReport:
    outcomes: list
    sensitivity: list
    sensitivity_rows: list
    summary: dict
    out_dir: Path
    dataset: Dataset
    ensemble: LrEnsemble


def run_pipeline(config: ExperimentConfig) -> BenchmarkReport:
    """Generate data, train, tune, benchmark and write every report file."""
    config.validate()
    started = time.perf_counter()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    system = _stage("load", load_system, config.system_path)
    write_json(config.to_dict(), out / "config.json")

    dataset = None
    if config.resume and (out / "samples.jsonl").exists() and (out / "manifest.json").exists():
        dataset = read_dataset(out)
        if dataset.system_hash != system.digest() or len(dataset) != config.target_count:
            dataset = None
    if dataset is None:
        dataset = _stage("generate", generate_dataset, system, config.target_count,
                         config.noise, config.mip, config.workers)
        write_dataset(dataset, out)
    if dataset.split is None:
        dataset = _stage("split", shuffle_split, dataset, config.train_fraction, config.split_seed)
        write_dataset(dataset, out)

    train, test = dataset.train, dataset.test
    ensemble = None
    if config.resume and (out / "model.json").exists():
        ensemble = load_ensemble(out / "model.json")
    if ensemble is None:
        ensemble = _stage("train", train_ensemble, train, config.lr, system.digest())
        training_time = ensemble.training_time
        th = _stage("tune", tune_threshold, ensemble, train, config.lr.grid)
        ensemble = ensemble.with_threshold(th)
        save_ensemble(ensemble, out / "model.json")
    else:
        training_time = None

    train_acc_grid = threshold_accuracies(ensemble, train, config.lr.grid)
    test_acc_grid = threshold_accuracies(ensemble, test, config.lr.grid)
    training = {
        "n_samples": len(dataset),
        "n_train": len(train),
        "n_test": len(test),
        "n_rejected": len(dataset.infeasible_ids),
        "threshold": ensemble.threshold,
        "train_accuracy": train_acc_grid[ensemble.threshold],
        "test_accuracy": test_acc_grid[ensemble.threshold],
        "train_accuracy_by_threshold": {f"{k:.2f}": v for k, v in train_acc_grid.items()},
        "test_accuracy_by_threshold": {f"{k:.2f}": v for k, v in test_acc_grid.items()},
        "training_time_s": training_time,
    }

    rows = _stage("benchmark", benchmark, system, test, ensemble, config.procedures,
                  config.mip, config.workers)
    for row in rows:
        smp = dataset.by_id()[row["sample_id"]]
        u = classify(ensemble.predict_proba([smp.demand])[0], ensemble.threshold)
        expect = fixing_counts(u, ProcedureId(row["procedure"]))
        if (row["n_fixed_u"], row["n_fixed_v"]) != expect:
            raise StageError("benchmark", f"fixing counts {row['n_fixed_u'], row['n_fixed_v']} "
                                          f"!= predicted {expect} for sample {row['sample_id']}")
    write_csv(rows, OUTCOME_FIELDS, out / "outcomes.csv")

    table, srows = [], []
    if config.sensitivity_grid and config.sensitivity_procedures:
        table, srows = _stage("sensitivity", threshold_sensitivity, system, test, ensemble,
                              config.sensitivity_grid, config.sensitivity_procedures,
                              config.mip, rows)
    write_csv(table, SENSITIVITY_FIELDS, out / "sensitivity.csv")
    write_csv(srows, OUTCOME_FIELDS, out / "sensitivity_outcomes.csv")

    summary = summarize(rows, table, training,
                        {"system_hash": system.digest(),
                         "elapsed_s": time.perf_counter() - started})
    write_json(summary, out / "summary.json")
    return BenchmarkReport(rows, table, srows, summary, out, dataset, ensemble)


def write_plot_data(directory) -> list:
    """Gnuplot-ready ``.dat`` files for the sensitivity and benchmark figures."""
    directory = Path(directory)
    rows = read_csv(directory / "outcomes.csv")
    agg = aggregate(rows)
    written = []
    sens_path = directory / "sensitivity.csv"
    sens = read_csv(sens_path) if sens_path.exists() else []

    def dump(name, header, lines):
        path = directory / name
        with open(path, "w") as fh:
            fh.write("# " + " ".join(header) + "\n")
            for line in lines:
                fh.write(" ".join("nan" if v is None else (repr(v) if isinstance(v, float) else str(v))
                                  for v in line) + "\n")
        written.append(path)

    b2 = [r for r in sens if r["procedure"] == "B2"]
    dump("b2_infeasibility.dat", ["threshold", "n_infeasible", "n_samples"],
         [(r["threshold"], r["n_infeasible"], r["n_samples"]) for r in b2])
    ths = sorted({r["threshold"] for r in sens})
    procs = sorted({r["procedure"] for r in sens})
    lines = []
    for th in ths:
        line = [th]
        for p in procs:
            match = [r for r in sens if r["threshold"] == th and r["procedure"] == p]
            line += [match[0]["mean_sq"], match[0]["mean_st"]] if match else [None, None]
        lines.append(line)
    dump("sensitivity_sq_st.dat",
         ["threshold"] + [f"{p}_{m}" for p in procs for m in ("sq", "st")], lines)
    dump("normalized_sq.dat", ["procedure", "mean_sq_percent", "n_paired"],
         [(p, a["mean_sq"], a["n_paired"]) for p, a in agg.items()])
    dump("normalized_st.dat", ["procedure", "mean_st_percent", "mean_node_ratio"],
         [(p, a["mean_st"], a["mean_node_ratio"]) for p, a in agg.items()])
    return written


def report(directory) -> dict:
    """Recompute aggregates from the CSVs, refresh summary.json, emit plot data."""
    directory = Path(directory)
    rows = read_csv(directory / "outcomes.csv")
    sens_path = directory / "sensitivity.csv"
    table = read_csv(sens_path) if sens_path.exists() else []
    old = {}
    if (directory / "summary.json").exists():
        old = json.loads((directory / "summary.json").read_text())
    extra = {k: v for k, v in old.items() if k not in ("procedures", "sensitivity", "training")}
    summary = summarize(rows, table, old.get("training"), extra)
    write_json(summary, directory / "summary.json")
    write_plot_data(directory)
    return summary
