"""LP and MILP solving for SCUC problems.

``solve_lp`` solves the continuous relaxation, either with HiGHS (the
default, and the engine used inside branch-and-bound, where one model is
kept per solve and re-optimized from the previous basis after each bound
change) or with the package's own dense simplex.

``solve_mip`` is a best-bound branch-and-bound over the binary columns
with a depth-first dive every eight nodes, most-fractional branching and
relative-gap termination. A warm start fixes every binary to a candidate
pattern and, if the resulting LP is feasible, seeds the incumbent.
"""
from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional, TextIO

import highspy
import numpy as np
import scipy.sparse as sp

from .errors import NumericalError
from .scuc import Fixings, ScucProblem, VarRef, apply_fixings
from .simplex import simplex_solve

INT_TOL = 1e-6
ROW_TOL = 1e-6
BOUND_TOL = 1e-9
DIVE_EVERY = 8

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
WITHIN_GAP = "optimal-within-gap"
LIMIT = "limit-reached"


@dataclass
class LpSolution:
    status: str
    values: Optional[np.ndarray] = None
    objective: Optional[float] = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass(frozen=True)
class MipOptions:
    relative_gap: float = 0.01
    node_limit: int = 100_000
    time_limit: float = 600.0
    branching: str = "most-fractional"
    search: str = "best-bound-dive"
    lp_method: str = "highs"

    def __post_init__(self):
        if self.relative_gap < 0:
            raise ValueError("relative_gap must be >= 0")
        if self.node_limit <= 0 or self.time_limit <= 0:
            raise ValueError("node_limit and time_limit must be positive")
        if self.branching != "most-fractional":
            raise ValueError(f"unsupported branching rule {self.branching!r}")
        if self.search != "best-bound-dive":
            raise ValueError(f"unsupported search strategy {self.search!r}")
        if self.lp_method not in ("highs", "simplex"):
            raise ValueError(f"unknown lp_method {self.lp_method!r}")


@dataclass
class MipResult:
    status: str
    incumbent: Optional[LpSolution]
    best_bound: float
    achieved_gap: float
    nodes_explored: int
    wall_time: float
    warm_start_used: bool = False

    @property
    def objective(self) -> Optional[float]:
        return None if self.incumbent is None else self.incumbent.objective


@dataclass(frozen=True)
class WarmStart:
    """Candidate commit pattern keyed by (generator, period); startups are derived."""

    binary_values: Mapping = field(default_factory=dict)

    def __post_init__(self):
        vals = {}
        for key, value in dict(self.binary_values).items():
            if value not in (0, 1):
                raise ValueError(f"warm-start value for {key} must be 0 or 1")
            vals[tuple(int(k) for k in key)] = int(value)
        object.__setattr__(self, "binary_values", vals)


def relative_gap(incumbent: float, bound: float) -> float:
    return (incumbent - bound) / max(1e-10, abs(incumbent))


class _HighsModel:
    """A HiGHS model of the relaxation whose column bounds can be changed in place."""

    def __init__(self, problem: ScucProblem):
        self.problem = problem
        inf = highspy.kHighsInf
        A = sp.vstack([problem.A_ub, problem.A_eq]).tocsc()
        lp = highspy.HighsLp()
        lp.num_col_ = problem.n_vars
        lp.num_row_ = A.shape[0]
        lp.col_cost_ = np.asarray(problem.cost, dtype=float)
        self.lb = np.array(problem.lb)
        self.ub = np.array(problem.ub)
        lp.col_lower_ = np.where(np.isinf(self.lb), -inf, self.lb)
        lp.col_upper_ = np.where(np.isinf(self.ub), inf, self.ub)
        lp.row_lower_ = np.concatenate([np.full(problem.A_ub.shape[0], -inf), problem.b_eq])
        lp.row_upper_ = np.concatenate([problem.b_ub, problem.b_eq])
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr.astype(np.int32)
        lp.a_matrix_.index_ = A.indices.astype(np.int32)
        lp.a_matrix_.value_ = A.data.astype(float)
        self.h = highspy.Highs()
        self.h.setOptionValue("output_flag", False)
        self.h.setOptionValue("threads", 1)
        self.h.setOptionValue("random_seed", 0)
        self.h.passModel(lp)

    def solve(self, lb, ub) -> LpSolution:
        problem = self.problem
        changed = np.flatnonzero((lb != self.lb) | (ub != self.ub))
        if changed.size:
            inf = highspy.kHighsInf
            lo = np.where(np.isinf(lb[changed]), -inf, lb[changed])
            hi = np.where(np.isinf(ub[changed]), inf, ub[changed])
            self.h.changeColsBounds(changed.size, changed.astype(np.int32), lo, hi)
            self.lb, self.ub = np.array(lb), np.array(ub)
        self.h.run()
        status = self.h.getModelStatus()
        if status == highspy.HighsModelStatus.kUnboundedOrInfeasible:
            # resolve the ambiguity from scratch without presolve
            self.h.setOptionValue("presolve", "off")
            self.h.clearSolver()
            self.h.run()
            status = self.h.getModelStatus()
            self.h.setOptionValue("presolve", "choose")
        if status == highspy.HighsModelStatus.kOptimal:
            x = np.clip(np.array(self.h.getSolution().col_value), lb, ub)
            return LpSolution(OPTIMAL, x, float(problem.cost @ x) + problem.obj_offset)
        if status == highspy.HighsModelStatus.kInfeasible:
            return LpSolution(INFEASIBLE)
        if status == highspy.HighsModelStatus.kUnbounded:
            return LpSolution(UNBOUNDED)
        raise NumericalError(f"HiGHS returned model status {self.h.modelStatusToString(status)}")


def _trivial(problem: ScucProblem) -> LpSolution:
    ok = np.all(problem.b_ub >= -ROW_TOL) and np.all(np.abs(problem.b_eq) <= ROW_TOL)
    if ok:
        return LpSolution(OPTIMAL, np.zeros(0), problem.obj_offset)
    return LpSolution(INFEASIBLE)


def _lp(problem: ScucProblem, lb, ub, method: str) -> LpSolution:
    if problem.n_vars == 0:
        return _trivial(problem)
    if method == "simplex":
        A_ub = problem.A_ub if problem.A_ub.shape[0] else None
        A_eq = problem.A_eq if problem.A_eq.shape[0] else None
        status, x, _ = simplex_solve(problem.cost, A_ub, problem.b_ub if A_ub is not None else None,
                                     A_eq, problem.b_eq if A_eq is not None else None, lb, ub)
        if status != OPTIMAL:
            return LpSolution(status)
        x = np.clip(x, lb, ub)
        return LpSolution(OPTIMAL, x, float(problem.cost @ x) + problem.obj_offset)
    return _HighsModel(problem).solve(np.asarray(lb, dtype=float), np.asarray(ub, dtype=float))


def solve_lp(problem: ScucProblem, method: str = "highs") -> LpSolution:
    """Continuous relaxation of ``problem`` (binaries relaxed to [0, 1])."""
    return _lp(problem, np.array(problem.lb), np.array(problem.ub), method)


def fix_and_solve(problem: ScucProblem, commitment, method: str = "highs") -> LpSolution:
    """Fix every commit variable to ``commitment`` (N_g x N_t) and solve the dispatch LP.

    Values in the returned solution refer to the reduced problem's columns.
    """
    fixings = commitment if isinstance(commitment, Fixings) else Fixings.all_of(commitment)
    reduced = apply_fixings(problem, fixings)
    if reduced.integrality.any():
        left = [v.name for v, b in zip(reduced.variables, reduced.integrality) if b]
        raise ValueError(f"fixings leave binary columns free: {left[:5]}")
    return solve_lp(reduced, method)


def _warm_bounds(problem: ScucProblem, warm: WarmStart):
    """Bounds pinning every binary column to the warm pattern, or None if incomplete."""
    lb, ub = np.array(problem.lb), np.array(problem.ub)
    vals = warm.binary_values

    def commit(g, t):
        if t < 0:
            return problem.initial_status[g]
        ref = VarRef("u", g, t)
        if ref in problem.fixed:
            return int(round(problem.fixed[ref]))
        return vals.get((g, t))

    for j, ref in enumerate(problem.variables):
        if ref.kind == "u":
            val = vals.get((ref.index, ref.period))
        elif ref.kind == "v":
            cur, prev = commit(ref.index, ref.period), commit(ref.index, ref.period - 1)
            val = None if cur is None or prev is None else max(0, cur - prev)
        else:
            continue
        if val is None:
            return None
        lb[j] = ub[j] = val
    return lb, ub


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    depth: int = field(compare=False)
    lb: np.ndarray = field(compare=False, repr=False)
    ub: np.ndarray = field(compare=False, repr=False)


def solve_mip(problem: ScucProblem, options: MipOptions = MipOptions(),
              warm: Optional[WarmStart] = None, log: Optional[TextIO] = None) -> MipResult:
    """Branch-and-bound over the binary columns of ``problem``.

    If ``log`` is given, one line per explored node is written::

        node <id> depth <d> bound <b> incumbent <z|-> gap <g|->
    """
    start = time.perf_counter()
    binaries = np.flatnonzero(problem.integrality)
    is_commit = np.array([problem.variables[j].kind == "u" for j in binaries], dtype=bool)
    method = options.lp_method
    if problem.n_vars == 0:
        sol = _trivial(problem)
        wall = time.perf_counter() - start
        if sol.optimal:
            return MipResult(WITHIN_GAP, sol, sol.objective, 0.0, 1, wall)
        return MipResult(INFEASIBLE, None, -np.inf, np.inf, 1, wall)
    if method == "highs":
        model = _HighsModel(problem)
        relax = model.solve
    else:
        def relax(lb, ub):
            return _lp(problem, lb, ub, method)

    inc: Optional[LpSolution] = None
    warm_used = False
    if warm is not None:
        pinned = _warm_bounds(problem, warm)
        if pinned is None:
            raise ValueError("warm start does not cover every free commit variable")
        cand = relax(*pinned)
        if cand.optimal:
            inc = cand
            warm_used = True

    heap: list = []
    seq = 0
    explored = 0
    best_bound = -np.inf
    next_node: Optional[_Node] = None
    diving = False
    hit_limit = False

    root = _Node(-np.inf, seq, 0, np.array(problem.lb), np.array(problem.ub))
    heapq.heappush(heap, root)

    def open_bound():
        bounds = [heap[0].bound] if heap else []
        if next_node is not None:
            bounds.append(next_node.bound)
        return min(bounds) if bounds else None

    while True:
        lower = open_bound()
        if lower is None:
            break
        if inc is not None:
            best_bound = max(best_bound, min(lower, inc.objective))
            if relative_gap(inc.objective, best_bound) <= options.relative_gap:
                break
        else:
            best_bound = max(best_bound, lower)
        if explored >= options.node_limit or time.perf_counter() - start > options.time_limit:
            hit_limit = True
            break

        if next_node is not None:
            node, next_node = next_node, None
        else:
            node = heapq.heappop(heap)
            diving = False
        if inc is not None and node.bound >= inc.objective:
            diving = False
            continue

        explored += 1
        sol = relax(node.lb, node.ub)
        node_bound = node.bound
        if sol.optimal:
            node_bound = max(node.bound, sol.objective)
        if log is not None:
            inc_s = "-" if inc is None else f"{inc.objective:.6f}"
            gap_s = "-" if inc is None else f"{relative_gap(inc.objective, best_bound):.6g}"
            b_s = f"{node_bound:.6f}" if sol.optimal else "infeasible"
            log.write(f"node {explored} depth {node.depth} bound {b_s} "
                      f"incumbent {inc_s} gap {gap_s}\n")
        if sol.status == UNBOUNDED:
            raise NumericalError("LP relaxation is unbounded; SCUC problems are bounded")
        if not sol.optimal or (inc is not None and node_bound >= inc.objective):
            diving = False
            continue

        xb = sol.values[binaries]
        frac = np.abs(xb - np.round(xb))
        fractional = frac > INT_TOL
        if not fractional.any():
            x = sol.values.copy()
            x[binaries] = np.round(xb)
            inc = LpSolution(OPTIMAL, x, sol.objective)
            diving = False
            continue

        pool = fractional & is_commit if (fractional & is_commit).any() else fractional
        score = np.where(pool, np.minimum(xb - np.floor(xb), np.ceil(xb) - xb), -1.0)
        k = int(np.argmax(score))  # first maximum -> lowest column index
        j = binaries[k]
        lb_dn, ub_dn = node.lb.copy(), node.ub.copy()
        ub_dn[j] = 0.0
        lb_up, ub_up = node.lb.copy(), node.ub.copy()
        lb_up[j] = 1.0
        seq += 1
        down = _Node(node_bound, seq, node.depth + 1, lb_dn, ub_dn)
        seq += 1
        up = _Node(node_bound, seq, node.depth + 1, lb_up, ub_up)
        if diving or explored % DIVE_EVERY == 1:
            diving = True
            preferred, other = (up, down) if xb[k] >= 0.5 else (down, up)
            next_node = preferred
            heapq.heappush(heap, other)
        else:
            heapq.heappush(heap, down)
            heapq.heappush(heap, up)

    wall = time.perf_counter() - start
    if inc is None:
        if hit_limit:
            return MipResult(LIMIT, None, best_bound, np.inf, explored, wall, warm_used)
        return MipResult(INFEASIBLE, None, best_bound, np.inf, explored, wall, warm_used)
    if open_bound() is None:
        best_bound = max(best_bound, inc.objective) if not hit_limit else best_bound
        best_bound = min(best_bound, inc.objective)
    gap = max(0.0, relative_gap(inc.objective, best_bound))
    status = WITHIN_GAP if gap <= options.relative_gap else LIMIT
    return MipResult(status, inc, best_bound, gap, explored, wall, warm_used)
