"""SCUC MILP construction in B-theta form, and variable fixing.

Variables are ordered by kind (P, r, u, v, f, theta), then by element
position (generator, branch or bus), then by period. Commit (u) and
startup (v) variables are binary, everything else is continuous. The
reference-bus angle is pinned to zero and never becomes a column.

Fixing substitutes constants for columns and deletes them, so a reduced
problem is strictly smaller than its parent; the objective keeps the
fixed columns' cost in ``obj_offset`` so objective values stay
comparable across procedures.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import ConflictError
from .grid import DemandProfile, GridSystem, check_profile

KINDS = ("P", "r", "u", "v", "f", "theta")
BINARY_KINDS = frozenset({"u", "v"})

# A row whose activity is identically zero is dropped when its constant
# part is satisfied within this slack.
VACUOUS_TOL = 1e-9


class VarRef(NamedTuple):
    kind: str
    index: int
    period: int

    @property
    def name(self) -> str:
        return f"{self.kind}_{self.index}_{self.period}"


@dataclass(frozen=True)
class ProblemStats:
    n_linear_vars: int
    n_binary_vars: int
    n_constraints: int
    n_nonzeros: int

    def as_dict(self) -> dict:
        return {
            "n_linear_vars": self.n_linear_vars,
            "n_binary_vars": self.n_binary_vars,
            "n_constraints": self.n_constraints,
            "n_nonzeros": self.n_nonzeros,
        }


@dataclass(frozen=True)
class Fixings:
    """Commit-variable fixings keyed by (generator position, period)."""

    entries: Mapping

    def __post_init__(self):
        clean = {}
        for key, value in dict(self.entries).items():
            g, t = (int(k) for k in key)
            if value not in (0, 1):
                raise ValueError(f"fixing value for {key} must be 0 or 1, got {value!r}")
            clean[(g, t)] = int(value)
        object.__setattr__(self, "entries", clean)

    def __len__(self):
        return len(self.entries)

    @classmethod
    def all_of(cls, commitment) -> "Fixings":
        """Fix every (g, t) to the matching entry of an N_g x N_t 0/1 matrix."""
        commitment = np.asarray(commitment)
        return cls({(g, t): int(round(commitment[g, t]))
                    for g in range(commitment.shape[0]) for t in range(commitment.shape[1])})


@dataclass(frozen=True, eq=False)
class ScucProblem:
    variables: tuple
    lb: np.ndarray
    ub: np.ndarray
    cost: np.ndarray
    obj_offset: float
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    ub_names: tuple
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    eq_names: tuple
    n_generators: int
    n_periods: int
    initial_status: tuple
    provenance: tuple = ("", "")
    fixed: Mapping = field(default_factory=dict)
    _index: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        for name in ("lb", "ub", "cost", "b_ub", "b_eq"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_index", {v: j for j, v in enumerate(self.variables)})

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def integrality(self) -> np.ndarray:
        return np.array([v.kind in BINARY_KINDS for v in self.variables], dtype=bool)

    def column(self, ref: VarRef):
        return self._index.get(ref)

    def commit_column(self, g: int, t: int):
        return self._index.get(VarRef("u", g, t))

    def startup_column(self, g: int, t: int):
        return self._index.get(VarRef("v", g, t))

    def value_of(self, ref: VarRef, x) -> float:
        """Value of ``ref`` in solution ``x``, including fixed constants."""
        j = self._index.get(ref)
        if j is not None:
            return float(x[j])
        if ref in self.fixed:
            return float(self.fixed[ref])
        raise KeyError(ref)

    def commitment(self, x) -> np.ndarray:
        """N_g x N_t commit matrix from a solution vector, rounded to exact 0/1."""
        out = np.zeros((self.n_generators, self.n_periods), dtype=np.int8)
        for g in range(self.n_generators):
            for t in range(self.n_periods):
                out[g, t] = int(round(self.value_of(VarRef("u", g, t), x)))
        return out

    def objective_value(self, x) -> float:
        return float(self.cost @ np.asarray(x, dtype=float)) + self.obj_offset


def problem_stats(problem: ScucProblem) -> ProblemStats:
    n_bin = int(problem.integrality.sum())
    return ProblemStats(
        n_linear_vars=problem.n_vars - n_bin,
        n_binary_vars=n_bin,
        n_constraints=problem.A_ub.shape[0] + problem.A_eq.shape[0],
        n_nonzeros=int(problem.A_ub.nnz + problem.A_eq.nnz),
    )


class _Rows:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []
        self.rhs, self.names = [], []

    def add(self, name, terms, rhs):
        r = len(self.rhs)
        for col, coef in terms:
            if coef != 0.0:
                self.rows.append(r)
                self.cols.append(col)
                self.vals.append(float(coef))
        self.rhs.append(float(rhs))
        self.names.append(name)

    def matrix(self, n_cols):
        m = sp.coo_matrix((self.vals, (self.rows, self.cols)), shape=(len(self.rhs), n_cols))
        m = m.tocsr()
        m.sum_duplicates()
        m.eliminate_zeros()
        return m


def build(system: GridSystem, profile: DemandProfile) -> ScucProblem:
    """Assemble the full SCUC MILP for one demand profile."""
    check_profile(system, profile)
    demand = profile.values
    G, T = system.n_generators, system.n_periods
    ref = system.bus_index(system.reference_bus)
    gens = system.generators

    variables, lb, ub, cost = [], [], [], []

    def declare(ref_, lo, hi, c=0.0):
        variables.append(ref_)
        lb.append(lo)
        ub.append(hi)
        cost.append(c)
        return len(variables) - 1

    P = [[declare(VarRef("P", g, t), 0.0, gens[g].p_max, gens[g].cost_energy) for t in range(T)]
         for g in range(G)]
    R = [[declare(VarRef("r", g, t), 0.0, np.inf) for t in range(T)] for g in range(G)]
    U = [[declare(VarRef("u", g, t), 0.0, 1.0, gens[g].cost_noload) for t in range(T)]
         for g in range(G)]
    V = [[declare(VarRef("v", g, t), 0.0, 1.0, gens[g].cost_startup) for t in range(T)]
         for g in range(G)]
    F = [[declare(VarRef("f", l, t), -br.flow_limit, br.flow_limit) for t in range(T)]
         for l, br in enumerate(system.branches)]
    TH = {}
    for b in range(system.n_buses):
        if b == ref:
            continue
        for t in range(T):
            TH[b, t] = declare(VarRef("theta", b, t), -np.inf, np.inf)

    le = _Rows()
    eq = _Rows()
    for g, gen in enumerate(gens):
        u0 = gen.initial_status
        for t in range(T):
            p, r, u, v = P[g][t], R[g][t], U[g][t], V[g][t]
            le.add(f"pmin_{g}_{t}", [(u, gen.p_min), (p, -1.0)], 0.0)
            le.add(f"pmax_{g}_{t}", [(p, 1.0), (r, 1.0), (u, -gen.p_max)], 0.0)
            le.add(f"rsv10_{g}_{t}", [(r, 1.0), (u, -gen.ramp_10min)], 0.0)
            if t > 0:
                pp, up = P[g][t - 1], U[g][t - 1]
                le.add(f"rampup_{g}_{t}",
                       [(p, 1.0), (pp, -1.0), (up, -gen.ramp_hourly), (v, -gen.p_min)], 0.0)
                le.add(f"rampdn_{g}_{t}",
                       [(pp, 1.0), (p, -1.0), (u, gen.p_max - gen.ramp_hourly),
                        (up, -gen.p_max), (v, -gen.p_max)], 0.0)
                le.add(f"su_on_{g}_{t}", [(u, 1.0), (up, -1.0), (v, -1.0)], 0.0)
                le.add(f"su_le_u_{g}_{t}", [(v, 1.0), (u, -1.0)], 0.0)
                le.add(f"su_prev_{g}_{t}", [(v, 1.0), (up, 1.0)], 1.0)
            else:
                if u0 == 1:
                    # prior dispatch anchored at p_min
                    le.add(f"rampup_{g}_{t}", [(p, 1.0), (v, -gen.p_min)],
                           gen.p_min + gen.ramp_hourly)
                    le.add(f"rampdn_{g}_{t}",
                           [(p, -1.0), (u, gen.p_max - gen.ramp_hourly), (v, -gen.p_max)],
                           gen.p_max - gen.p_min)
                le.add(f"su_on_{g}_{t}", [(u, 1.0), (v, -1.0)], float(u0))
                le.add(f"su_le_u_{g}_{t}", [(v, 1.0), (u, -1.0)], 0.0)
                le.add(f"su_prev_{g}_{t}", [(v, 1.0)], 1.0 - u0)

    if system.reserve_requirement:
        for t in range(T):
            for g in range(G):
                terms = [(P[g][t], 1.0)] + [(R[h][t], -1.0) for h in range(G) if h != g]
                le.add(f"sysrsv_{g}_{t}", terms, 0.0)

    for l, br in enumerate(system.branches):
        fb, tb = system.bus_index(br.from_bus), system.bus_index(br.to_bus)
        for t in range(T):
            terms = [(F[l][t], 1.0)]
            if fb != ref:
                terms.append((TH[fb, t], -1.0 / br.reactance))
            if tb != ref:
                terms.append((TH[tb, t], 1.0 / br.reactance))
            eq.add(f"flow_{l}_{t}", terms, 0.0)

    at_bus = [[] for _ in range(system.n_buses)]
    for g, gen in enumerate(gens):
        at_bus[system.bus_index(gen.bus)].append(g)
    for b in range(system.n_buses):
        for t in range(T):
            terms = [(P[g][t], 1.0) for g in at_bus[b]]
            for l, br in enumerate(system.branches):
                if system.bus_index(br.from_bus) == b:
                    terms.append((F[l][t], -1.0))
                elif system.bus_index(br.to_bus) == b:
                    terms.append((F[l][t], 1.0))
            eq.add(f"bal_{b}_{t}", terms, demand[b, t])

    n = len(variables)
    return ScucProblem(
        variables=tuple(variables),
        lb=np.array(lb), ub=np.array(ub), cost=np.array(cost), obj_offset=0.0,
        A_ub=le.matrix(n), b_ub=np.array(le.rhs), ub_names=tuple(le.names),
        A_eq=eq.matrix(n), b_eq=np.array(eq.rhs), eq_names=tuple(eq.names),
        n_generators=G, n_periods=T,
        initial_status=tuple(int(g.initial_status) for g in gens),
        provenance=(system.digest(), profile.digest()),
        fixed={},
    )


def _drop_rows(A, b, names, kind):
    """Remove rows with no remaining coefficients whose constant part holds."""
    nnz = np.diff(A.indptr)
    keep = np.ones(A.shape[0], dtype=bool)
    for i in np.flatnonzero(nnz == 0):
        if kind == "le" and b[i] >= -VACUOUS_TOL:
            keep[i] = False
        elif kind == "eq" and abs(b[i]) <= VACUOUS_TOL:
            keep[i] = False
    idx = np.flatnonzero(keep)
    return A[idx], b[idx], tuple(names[i] for i in idx)


def fix_columns(problem: ScucProblem, values: Mapping) -> ScucProblem:
    """Substitute constants for the given columns and delete them.

    ``values`` maps column index to value. Rows that become constant and
    satisfied are dropped; violated ones are kept so infeasibility is
    reported by the LP rather than hidden.
    """
    if not values:
        return problem
    cols = np.array(sorted(values), dtype=int)
    vals = np.array([float(values[j]) for j in cols])
    for j, val in zip(cols, vals):
        if val < problem.lb[j] - VACUOUS_TOL or val > problem.ub[j] + VACUOUS_TOL:
            raise ConflictError(
                f"fixing {problem.variables[j].name}={val} outside bounds "
                f"[{problem.lb[j]}, {problem.ub[j]}]"
            )
    keep = np.setdiff1d(np.arange(problem.n_vars), cols)
    b_ub = problem.b_ub - problem.A_ub[:, cols] @ vals
    b_eq = problem.b_eq - problem.A_eq[:, cols] @ vals
    A_ub, b_ub, ub_names = _drop_rows(problem.A_ub[:, keep].tocsr(), b_ub, problem.ub_names, "le")
    A_eq, b_eq, eq_names = _drop_rows(problem.A_eq[:, keep].tocsr(), b_eq, problem.eq_names, "eq")
    fixed = dict(problem.fixed)
    for j, val in zip(cols, vals):
        fixed[problem.variables[j]] = val
    return ScucProblem(
        variables=tuple(problem.variables[j] for j in keep),
        lb=problem.lb[keep], ub=problem.ub[keep], cost=problem.cost[keep],
        obj_offset=problem.obj_offset + float(problem.cost[cols] @ vals),
        A_ub=A_ub, b_ub=b_ub, ub_names=ub_names,
        A_eq=A_eq, b_eq=b_eq, eq_names=eq_names,
        n_generators=problem.n_generators, n_periods=problem.n_periods,
        initial_status=problem.initial_status,
        provenance=problem.provenance,
        fixed=fixed,
    )


def resolve_fixings(problem: ScucProblem, fixings: Fixings) -> dict:
    """Column -> value map for the commit fixings plus implied startup fixings.

    A startup variable is fixed only when the commit values of its own
    period and of the previous period (or the initial status) are both
    known, either from ``fixings`` or from earlier reductions.
    """
    G, T = problem.n_generators, problem.n_periods
    known = {}
    out = {}
    for (g, t), val in fixings.entries.items():
        if not (0 <= g < G and 0 <= t < T):
            raise ConflictError(f"fixing ({g}, {t}) outside the problem's generator/period range")
        ref = VarRef("u", g, t)
        col = problem.column(ref)
        if col is None:
            if ref in problem.fixed and problem.fixed[ref] != val:
                raise ConflictError(f"u({g},{t}) already fixed to {problem.fixed[ref]}, not {val}")
        else:
            if val < problem.lb[col] or val > problem.ub[col]:
                raise ConflictError(
                    f"fixing u({g},{t})={val} contradicts bounds [{problem.lb[col]}, {problem.ub[col]}]"
                )
            out[col] = val
        known[g, t] = val

    def commit_known(g, t):
        if t < 0:
            return problem.initial_status[g]
        if (g, t) in known:
            return known[g, t]
        ref = VarRef("u", g, t)
        if ref in problem.fixed:
            return int(round(problem.fixed[ref]))
        return None

    for g in range(G):
        for t in range(T):
            col = problem.startup_column(g, t)
            if col is None:
                continue
            cur, prev = commit_known(g, t), commit_known(g, t - 1)
            if cur is not None and prev is not None:
                out[col] = max(0, cur - prev)
    return out


def apply_fixings(problem: ScucProblem, fixings: Fixings) -> ScucProblem:
    """Reduced problem with the commit fixings (and implied startups) substituted."""
    return fix_columns(problem, resolve_fixings(problem, fixings))


def implied_startup_count(fixings: Fixings, n_generators: int, n_periods: int) -> int:
    """Startup fixings implied on a fresh (unreduced) problem, without building it."""
    count = 0
    for (g, t) in fixings.entries:
        if t == 0 or (g, t - 1) in fixings.entries:
            count += 1
    return count


def to_lp_text(problem: ScucProblem) -> str:
    """Render the problem in a CPLEX-LP-like text format.

    Columns appear in stored order; the objective constant from fixed
    columns is written as a trailing ``+ constant`` term.
    """
    names = [v.name for v in problem.variables]

    def expr(row_vals, row_cols):
        parts = []
        for c, j in zip(row_vals, row_cols):
            sign = "-" if c < 0 else "+"
            parts.append(f"{sign} {abs(c):.17g} {names[j]}")
        text = " ".join(parts) if parts else "0"
        return text[2:] if text.startswith("+ ") else text

    lines = ["\\ SCUC problem", f"\\ provenance {problem.provenance[0]} {problem.provenance[1]}",
             "Minimize"]
    nz = np.flatnonzero(problem.cost)
    obj = expr(problem.cost[nz], nz)
    lines.append(f" obj: {obj} + {problem.obj_offset:.17g} constant")
    lines.append("Subject To")
    for A, b, rnames, op in ((problem.A_ub, problem.b_ub, problem.ub_names, "<="),
                             (problem.A_eq, problem.b_eq, problem.eq_names, "=")):
        for i in range(A.shape[0]):
            s, e = A.indptr[i], A.indptr[i + 1]
            lines.append(f" {rnames[i]}: {expr(A.data[s:e], A.indices[s:e])} {op} {b[i]:.17g}")
    lines.append("Bounds")
    lines.append(" constant = 1")
    for j, name in enumerate(names):
        lo, hi = problem.lb[j], problem.ub[j]
        if np.isinf(lo) and np.isinf(hi):
            lines.append(f" {name} free")
        else:
            lo_s = "-inf" if np.isinf(lo) else f"{lo:.17g}"
            hi_s = "+inf" if np.isinf(hi) else f"{hi:.17g}"
            lines.append(f" {lo_s} <= {name} <= {hi_s}")
    lines.append("Binaries")
    lines.extend(f" {names[j]}" for j in np.flatnonzero(problem.integrality))
    lines.append("End")
    return "\n".join(lines) + "\n"
