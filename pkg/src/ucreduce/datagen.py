"""Labeled dataset generation: perturb the base demand, solve SCUC, keep feasible draws.

Each sample's randomness comes from ``SeedSequence([master_seed, sample_id])``
so any sample can be regenerated alone, in any order, on any worker.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import AttemptCapExceeded, ParseError, TooFewSamples
from .grid import DemandProfile, GridSystem, base_profile
from .mip import WITHIN_GAP, MipOptions, solve_mip
from .scuc import build

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseParams:
    global_sigma: float = 0.03
    nodal_sigma: float = 0.05
    master_seed: int = 42
    clamp_floor: float = 0.0

    def __post_init__(self):
        if self.global_sigma < 0 or self.nodal_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")
        if self.clamp_floor != 0.0:
            raise ValueError("clamp_floor is fixed at 0 (demands are never negative)")


@dataclass
class Sample:
    sample_id: int
    demand: DemandProfile
    commitment: np.ndarray
    objective: float
    solve_time: float

    def to_json(self) -> str:
        return json.dumps({
            "sample_id": self.sample_id,
            "demand": [[float(v) for v in row] for row in self.demand.values],
            "commitment": [[int(v) for v in row] for row in self.commitment],
            "objective": float(self.objective),
            "solve_time": float(self.solve_time),
        })

    @classmethod
    def from_json(cls, line: str) -> "Sample":
        d = json.loads(line)
        return cls(
            sample_id=int(d["sample_id"]),
            demand=DemandProfile(d["demand"]),
            commitment=np.array(d["commitment"], dtype=np.int8),
            objective=float(d["objective"]),
            solve_time=float(d["solve_time"]),
        )


@dataclass
class Dataset:
    samples: list
    system_hash: str
    params: Optional[NoiseParams] = None
    split: Optional[tuple] = None
    infeasible_ids: list = field(default_factory=list)

    def __len__(self):
        return len(self.samples)

    def by_id(self) -> dict:
        return {s.sample_id: s for s in self.samples}

    def subset(self, ids) -> list:
        lookup = self.by_id()
        return [lookup[i] for i in ids]

    @property
    def train(self) -> list:
        if self.split is None:
            raise ValueError("dataset has no train/test split")
        return self.subset(self.split[0])

    @property
    def test(self) -> list:
        if self.split is None:
            raise ValueError("dataset has no train/test split")
        return self.subset(self.split[1])


def perturb_profile(base: DemandProfile, params: NoiseParams, sample_id: int) -> DemandProfile:
    """Multiplicative global-by-period and nodal Gaussian noise, clamped at zero."""
    n_bus, n_t = base.shape
    rng = np.random.default_rng(np.random.SeedSequence([params.master_seed, sample_id]))
    g = rng.normal(1.0, params.global_sigma, size=n_t)
    n = rng.normal(1.0, params.nodal_sigma, size=(n_bus, n_t))
    return DemandProfile(np.maximum(0.0, base.values * g[None, :] * n))


def _solve_one(system: GridSystem, params: NoiseParams, options: MipOptions, sample_id: int):
    demand = perturb_profile(base_profile(system), params, sample_id)
    problem = build(system, demand)
    res = solve_mip(problem, options)
    if res.status != WITHIN_GAP:
        return sample_id, demand, res.status, None, None, res.wall_time
    return (sample_id, demand, res.status, problem.commitment(res.incumbent.values),
            res.incumbent.objective, res.wall_time)


def generate_dataset(system: GridSystem, target_count: int, params: NoiseParams = NoiseParams(),
                     options: MipOptions = MipOptions(), workers: int = 1,
                     first_id: int = 0) -> Dataset:
    """Solve perturbed profiles until ``target_count`` feasible samples are stored.

    Infeasible (or limit-reached) draws consume their sample id and are
    logged, not stored. At most ``3 * target_count`` ids are attempted.
    """
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    cap = 3 * target_count
    samples, rejected = [], []
    next_id = first_id
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        while len(samples) < target_count and next_id - first_id < cap:
            batch = list(range(next_id, min(next_id + max(1, workers), first_id + cap)))
            next_id = batch[-1] + 1
            if pool is None:
                results = [_solve_one(system, params, options, i) for i in batch]
            else:
                results = list(pool.map(_solve_one, *zip(*[(system, params, options, i) for i in batch])))
            for sid, demand, status, commit, obj, wall in results:
                if len(samples) >= target_count:
                    break
                if commit is None:
                    log.info("sample %d rejected: %s", sid, status)
                    rejected.append(sid)
                    continue
                samples.append(Sample(sid, demand, commit, obj, wall))
    finally:
        if pool is not None:
            pool.shutdown()
    if len(samples) < target_count:
        raise AttemptCapExceeded(
            f"only {len(samples)} of {target_count} feasible samples after {cap} attempts",
            feasible_count=len(samples),
        )
    return Dataset(samples, system.digest(), params, None, rejected)


def shuffle_split(dataset: Dataset, train_fraction: float = 0.8, seed: int = 0) -> Dataset:
    """Seeded permutation of sample ids into (train, test) with round(fraction * n) train ids."""
    n = len(dataset.samples)
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples to split, have {n}")
    ids = np.array([s.sample_id for s in dataset.samples])
    perm = np.random.default_rng(seed).permutation(ids)
    n_train = int(round(train_fraction * n))
    split = ([int(i) for i in perm[:n_train]], [int(i) for i in perm[n_train:]])
    return replace(dataset, split=split)


def write_samples(dataset: Dataset, path) -> None:
    with open(path, "w") as fh:
        for s in sorted(dataset.samples, key=lambda s: s.sample_id):
            fh.write(s.to_json() + "\n")


def read_samples(path) -> list:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    out.append(Sample.from_json(line))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return out


def manifest(dataset: Dataset) -> dict:
    return {
        "system_hash": dataset.system_hash,
        "params": None if dataset.params is None else asdict(dataset.params),
        "split": None if dataset.split is None else {
            "train": list(dataset.split[0]), "test": list(dataset.split[1])},
        "infeasible_ids": list(dataset.infeasible_ids),
        "n_samples": len(dataset.samples),
    }


def write_dataset(dataset: Dataset, directory) -> None:
    """Write ``samples.jsonl`` and ``manifest.json`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_samples(dataset, directory / "samples.jsonl")
    (directory / "manifest.json").write_text(json.dumps(manifest(dataset), indent=2) + "\n")


def read_dataset(directory) -> Dataset:
    directory = Path(directory)
    samples = read_samples(directory / "samples.jsonl")
    man = json.loads((directory / "manifest.json").read_text())
    params = None if man.get("params") is None else NoiseParams(**man["params"])
    split = man.get("split")
    if split is not None:
        split = (list(split["train"]), list(split["test"]))
    return Dataset(samples, man["system_hash"], params, split, list(man.get("infeasible_ids", [])))
