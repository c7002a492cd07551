"""The four solve procedures compared in the benchmark.

B1  full MILP, no ML input.
B2  every commit variable fixed to the ML prediction; a pure dispatch LP.
P1  predicted-ON commit variables fixed to 1; the rest free, warm-started at 0.
P2  generators predicted ON (or OFF) in every period fixed for the whole
    horizon; the rest free, warm-started at the prediction.

Infeasible outcomes are ordinary results, not exceptions.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import DemandProfile, GridSystem
from .mip import INFEASIBLE, OPTIMAL, WITHIN_GAP, MipOptions, WarmStart, solve_lp, solve_mip
from .scuc import Fixings, ProblemStats, apply_fixings, build, implied_startup_count, problem_stats


class ProcedureId(str, enum.Enum):
    B1 = "B1"
    B2 = "B2"
    P1 = "P1"
    P2 = "P2"

    @classmethod
    def parse(cls, text: str) -> "ProcedureId":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"unknown procedure {text!r}; expected one of b1, b2, p1, p2") from None


@dataclass
class ReductionOutcome:
    procedure: ProcedureId
    status: str
    objective: Optional[float]
    wall_time: float
    stats: ProblemStats
    n_fixed_u: int
    n_fixed_v: int
    nodes_explored: int
    build_time: float = 0.0
    commitment: Optional[np.ndarray] = None

    @property
    def feasible(self) -> bool:
        return self.status == WITHIN_GAP

    def record(self, sample_id=None) -> dict:
        return {
            "sample_id": sample_id,
            "procedure": self.procedure.value,
            "status": self.status,
            "objective": self.objective,
            "wall_time": self.wall_time,
            "nodes_explored": self.nodes_explored,
            "n_fixed_u": self.n_fixed_u,
            "n_fixed_v": self.n_fixed_v,
            "stats": self.stats.as_dict(),
        }


def procedure_fixings(classified, procedure: ProcedureId) -> Fixings:
    """Commit fixings a procedure derives from a 0/1 prediction matrix."""
    u = np.asarray(classified)
    G, T = u.shape
    procedure = ProcedureId(procedure)
    if procedure is ProcedureId.B1:
        return Fixings({})
    if procedure is ProcedureId.B2:
        return Fixings.all_of(u)
    if procedure is ProcedureId.P1:
        return Fixings({(g, t): 1 for g in range(G) for t in range(T) if u[g, t] == 1})
    entries = {}
    for g in range(G):
        if np.all(u[g] == 1):
            entries.update({(g, t): 1 for t in range(T)})
        elif np.all(u[g] == 0):
            entries.update({(g, t): 0 for t in range(T)})
    return Fixings(entries)


def procedure_warm_start(classified, procedure: ProcedureId) -> Optional[WarmStart]:
    u = np.asarray(classified)
    G, T = u.shape
    procedure = ProcedureId(procedure)
    if procedure is ProcedureId.P1:
        return WarmStart({(g, t): 0 for g in range(G) for t in range(T) if u[g, t] == 0})
    if procedure is ProcedureId.P2:
        fixed = procedure_fixings(u, procedure).entries
        return WarmStart({(g, t): int(u[g, t]) for g in range(G) for t in range(T)
                          if (g, t) not in fixed})
    return None


def fixing_counts(classified, procedure) -> tuple:
    """(n_fixed_u, n_fixed_v) for a procedure, computed without building a problem."""
    u = np.asarray(classified)
    fix = procedure_fixings(u, procedure)
    return len(fix), implied_startup_count(fix, *u.shape)


def _classified(prediction):
    return np.asarray(getattr(prediction, "classified", prediction))


def run_b1(system: GridSystem, demand: DemandProfile, options: MipOptions = MipOptions()) -> ReductionOutcome:
    t0 = time.perf_counter()
    problem = build(system, demand)
    build_time = time.perf_counter() - t0
    res = solve_mip(problem, options)
    commit = None if res.incumbent is None else problem.commitment(res.incumbent.values)
    return ReductionOutcome(ProcedureId.B1, res.status, res.objective, res.wall_time,
                            problem_stats(problem), 0, 0, res.nodes_explored, build_time, commit)


def run_b2(system: GridSystem, demand: DemandProfile, prediction,
           options: MipOptions = MipOptions()) -> ReductionOutcome:
    u = _classified(prediction)
    t0 = time.perf_counter()
    problem = build(system, demand)
    fix = procedure_fixings(u, ProcedureId.B2)
    reduced = apply_fixings(problem, fix)
    build_time = time.perf_counter() - t0
    t1 = time.perf_counter()
    sol = solve_lp(reduced, options.lp_method)
    wall = time.perf_counter() - t1
    status = WITHIN_GAP if sol.status == OPTIMAL else INFEASIBLE
    n_v = problem.n_vars - reduced.n_vars - len(fix)
    return ReductionOutcome(ProcedureId.B2, status, sol.objective, wall, problem_stats(reduced),
                            len(fix), n_v, 1, build_time,
                            u.astype(np.int8) if status == WITHIN_GAP else None)


def _run_reduced(procedure: ProcedureId, system, demand, prediction, options) -> ReductionOutcome:
    u = _classified(prediction)
    t0 = time.perf_counter()
    problem = build(system, demand)
    fix = procedure_fixings(u, procedure)
    reduced = apply_fixings(problem, fix)
    warm = procedure_warm_start(u, procedure)
    build_time = time.perf_counter() - t0
    res = solve_mip(reduced, options, warm)
    commit = None if res.incumbent is None else reduced.commitment(res.incumbent.values)
    n_v = problem.n_vars - reduced.n_vars - len(fix)
    return ReductionOutcome(procedure, res.status, res.objective, res.wall_time,
                            problem_stats(reduced), len(fix), n_v, res.nodes_explored,
                            build_time, commit)


def run_p1(system, demand, prediction, options: MipOptions = MipOptions()) -> ReductionOutcome:
    return _run_reduced(ProcedureId.P1, system, demand, prediction, options)


def run_p2(system, demand, prediction, options: MipOptions = MipOptions()) -> ReductionOutcome:
    return _run_reduced(ProcedureId.P2, system, demand, prediction, options)


def run_procedure(procedure, system, demand, prediction=None,
                  options: MipOptions = MipOptions()) -> ReductionOutcome:
    procedure = ProcedureId(procedure)
    if procedure is ProcedureId.B1:
        return run_b1(system, demand, options)
    if prediction is None:
        raise ValueError(f"{procedure.value} needs a prediction")
    if procedure is ProcedureId.B2:
        return run_b2(system, demand, prediction, options)
    return _run_reduced(procedure, system, demand, prediction, options)
