"""Independent reference computations used by the tests.

The MILP oracle enumerates every commit pattern, pins the commit columns
through their bounds on the unreduced problem and solves each LP with the
package's dense simplex (not HiGHS, and without going through the fixing
code). Startup values are forced by the startup rows once commits are
integral, so enumerating commits covers every binary pattern.
"""
from __future__ import annotations

import itertools

import numpy as np

from ucreduce.grid import Branch, Bus, Generator, GridSystem
from ucreduce.simplex import simplex_solve


def toy_system(demand=150.0) -> GridSystem:
    """One bus, two 100 MW units at 10 and 20 $/MWh, 5 $/h no-load, no reserves."""
    gens = [
        Generator(1, 1, 0.0, 100.0, 100.0, 0.0, 10.0, 5.0, 0.0, 0),
        Generator(2, 1, 0.0, 100.0, 100.0, 0.0, 20.0, 5.0, 0.0, 0),
    ]
    return GridSystem([Bus(1, [demand])], [], gens, 1, 1, reserve_requirement=False)


def random_system(rng: np.random.Generator) -> GridSystem:
    """1-3 buses, 1-3 generators, 1-3 periods, at most 12 binaries."""
    n_bus = int(rng.integers(1, 4))
    while True:
        n_gen, n_t = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        if 2 * n_gen * n_t <= 12:
            break
    gens = []
    for g in range(n_gen):
        p_max = float(rng.uniform(40, 150))
        p_min = float(rng.uniform(0, 0.4) * p_max) if rng.random() < 0.7 else 0.0
        gens.append(Generator(
            g + 1, int(rng.integers(1, n_bus + 1)), round(p_min, 3), round(p_max, 3),
            round(float(rng.uniform(0.3, 1.0) * p_max), 3), round(float(rng.uniform(0.2, 0.8) * p_max), 3),
            round(float(rng.uniform(5, 40)), 3), round(float(rng.uniform(0, 200)), 3),
            round(float(rng.uniform(0, 300)), 3), int(rng.integers(0, 2))))
    total = sum(g.p_max for g in gens)
    branches = []
    for b in range(2, n_bus + 1):
        branches.append(Branch(len(branches) + 1, int(rng.integers(1, b)), b,
                               round(float(rng.uniform(0.05, 0.4)), 3),
                               round(float(rng.uniform(30, 150)), 3)))
    if n_bus == 3 and rng.random() < 0.5:
        branches.append(Branch(len(branches) + 1, 2, 3, 0.2, round(float(rng.uniform(30, 150)), 3)))
    # system-wide demand up to 70% of capacity, split randomly across buses
    peak = float(rng.uniform(0.15, 0.7)) * total
    shares = rng.dirichlet(np.ones(n_bus))
    shape = rng.uniform(0.6, 1.0, size=n_t)
    buses = [Bus(b + 1, np.round(peak * shares[b] * shape, 3)) for b in range(n_bus)]
    reserve = bool(n_gen > 1 and rng.random() < 0.5)
    return GridSystem(buses, branches, gens, 1, n_t, reserve_requirement=reserve)


def enumerate_optimum(problem):
    """(objective, commitment) of the best commit pattern, or (None, None) if none is feasible."""
    G, T = problem.n_generators, problem.n_periods
    cols = [[problem.commit_column(g, t) for t in range(T)] for g in range(G)]
    A_ub = problem.A_ub.toarray() if problem.A_ub.shape[0] else None
    A_eq = problem.A_eq.toarray() if problem.A_eq.shape[0] else None
    b_ub = problem.b_ub if A_ub is not None else None
    b_eq = problem.b_eq if A_eq is not None else None
    best, best_u = None, None
    for bits in itertools.product((0, 1), repeat=G * T):
        u = np.array(bits, dtype=float).reshape(G, T)
        lb, ub = np.array(problem.lb), np.array(problem.ub)
        for g in range(G):
            for t in range(T):
                lb[cols[g][t]] = ub[cols[g][t]] = u[g, t]
        status, x, obj = simplex_solve(problem.cost, A_ub, b_ub, A_eq, b_eq, lb, ub)
        if status == "optimal":
            obj += problem.obj_offset
            if best is None or obj < best:
                best, best_u = obj, u.astype(np.int8)
    return best, best_u


def central_gradient(f, z, h=1e-5):
    g = np.zeros_like(z)
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = h
        g[k] = (f(z + e) - f(z - e)) / (2 * h)
    return g


def row_residuals(problem, x):
    """Largest inequality violation and largest equality residual of ``x``."""
    viol = 0.0
    if problem.A_ub.shape[0]:
        viol = max(0.0, float(np.max(problem.A_ub @ x - problem.b_ub)))
    resid = 0.0
    if problem.A_eq.shape[0]:
        resid = float(np.max(np.abs(problem.A_eq @ x - problem.b_eq)))
    return viol, resid
