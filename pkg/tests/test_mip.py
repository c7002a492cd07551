import io
import re

import numpy as np
import pytest
from oracles import enumerate_optimum, random_system, row_residuals, toy_system

from ucreduce import grid, mip, scuc
from ucreduce.mip import MipOptions, WarmStart
from ucreduce.scuc import VarRef


def _toy(demand=150.0):
    sys_ = toy_system(demand)
    return scuc.build(sys_, grid.base_profile(sys_))


@pytest.mark.parametrize("method", ["highs", "simplex"])
def test_toy_dispatch(method):
    p = _toy()
    res = mip.solve_mip(p, MipOptions(lp_method=method))
    assert res.status == mip.WITHIN_GAP
    assert res.objective == pytest.approx(2010.0, abs=1e-7)
    x = res.incumbent.values
    assert p.value_of(VarRef("P", 0, 0), x) == pytest.approx(100.0)
    assert p.value_of(VarRef("P", 1, 0), x) == pytest.approx(50.0)
    assert p.commitment(x).tolist() == [[1], [1]]


def test_toy_relaxation_bounds_milp():
    for method in ("highs", "simplex"):
        lp = mip.solve_lp(_toy(), method)
        assert lp.optimal and lp.objective <= 2010.0 + 1e-9


def test_toy_warm_start():
    p = _toy()
    cold = mip.solve_mip(p)
    warm = mip.solve_mip(p, warm=WarmStart({(0, 0): 1, (1, 0): 1}))
    assert warm.warm_start_used
    assert warm.objective == pytest.approx(cold.objective)
    assert warm.nodes_explored <= cold.nodes_explored


def test_fix_and_solve_toy():
    p = _toy()
    assert mip.fix_and_solve(p, [[1], [1]]).objective == pytest.approx(2010.0)
    assert mip.fix_and_solve(p, [[1], [0]]).status == mip.INFEASIBLE
    with pytest.raises(ValueError):
        mip.fix_and_solve(p, scuc.Fixings({(0, 0): 1}))


def test_zero_demand_all_off(six_bus):
    p = scuc.build(six_bus, grid.DemandProfile(np.zeros((6, 24))))
    sol = mip.fix_and_solve(p, np.zeros((8, 24), dtype=int))
    assert sol.optimal and sol.objective == pytest.approx(0.0, abs=1e-9)


def test_infeasible_relaxation():
    p = _toy(demand=150.0)
    red = scuc.apply_fixings(p, scuc.Fixings({(1, 0): 0}))
    res = mip.solve_mip(red)
    assert res.status == mip.INFEASIBLE and res.incumbent is None


def test_lp_solution_tolerances(six_bus):
    p = scuc.build(six_bus, grid.base_profile(six_bus))
    sol = mip.solve_lp(p)
    viol, resid = row_residuals(p, sol.values)
    assert viol <= 1e-6 and resid <= 1e-6
    assert np.all(sol.values >= p.lb - 1e-9) and np.all(sol.values <= p.ub + 1e-9)


@pytest.fixture(scope="module")
def six_result(six_bus):
    p = scuc.build(six_bus, grid.base_profile(six_bus))
    buf = io.StringIO()
    return p, mip.solve_mip(p, log=buf), buf.getvalue()


def test_six_bus_result_invariants(six_result):
    p, res, _ = six_result
    assert res.status == mip.WITHIN_GAP
    assert res.best_bound <= res.objective
    assert res.achieved_gap == pytest.approx(mip.relative_gap(res.objective, res.best_bound))
    assert res.achieved_gap <= 0.01
    x = res.incumbent.values
    viol, resid = row_residuals(p, x)
    assert viol <= 1e-6 and resid <= 1e-6
    assert np.all(x[p.integrality] == np.round(x[p.integrality]))
    assert res.objective == pytest.approx(p.objective_value(x))


def test_node_log_format_and_monotone_incumbent(six_result):
    _, res, text = six_result
    lines = text.splitlines()
    assert len(lines) == res.nodes_explored
    pat = re.compile(r"^node (\d+) depth (\d+) bound (\S+) incumbent (\S+) gap (\S+)$")
    incumbents = []
    for k, line in enumerate(lines, start=1):
        m = pat.match(line)
        assert m and int(m.group(1)) == k
        if m.group(4) != "-":
            incumbents.append(float(m.group(4)))
    assert incumbents == sorted(incumbents, reverse=True)


def test_best_bound_monotone(six_bus):
    # the reported bound never decreases as the node limit grows
    p = scuc.build(six_bus, grid.base_profile(six_bus))
    bounds = [mip.solve_mip(p, MipOptions(relative_gap=0.0, node_limit=n)).best_bound
              for n in (1, 5, 10, 20, 40)]
    assert bounds == sorted(bounds)


def test_deterministic(six_bus):
    p = scuc.build(six_bus, grid.base_profile(six_bus))
    a, b = mip.solve_mip(p), mip.solve_mip(p)
    assert a.objective == b.objective and a.nodes_explored == b.nodes_explored
    assert np.array_equal(a.incumbent.values, b.incumbent.values)


def test_node_limit_reports_limit(six_bus):
    p = scuc.build(six_bus, grid.base_profile(six_bus))
    res = mip.solve_mip(p, MipOptions(relative_gap=0.0, node_limit=3))
    assert res.status == mip.LIMIT and res.nodes_explored == 3


@pytest.mark.parametrize("seed", range(25))
def test_warm_start_soundness(seed):
    rng = np.random.default_rng(500 + seed)
    best = None
    while best is None:
        sys_ = random_system(rng)
        p = scuc.build(sys_, grid.base_profile(sys_))
        best, commit = enumerate_optimum(p)
    cold = mip.solve_mip(p)
    guess = rng.integers(0, 2, size=commit.shape)
    for pattern in (commit, guess):
        warm = mip.solve_mip(p, warm=WarmStart({(g, t): int(pattern[g, t])
                                                for g in range(pattern.shape[0])
                                                for t in range(pattern.shape[1])}))
        assert warm.status == cold.status == mip.WITHIN_GAP
        assert abs(warm.objective - cold.objective) <= 2 * 0.01 * abs(cold.objective) + 1e-9


def test_incomplete_warm_start_rejected():
    with pytest.raises(ValueError):
        mip.solve_mip(_toy(), warm=WarmStart({(0, 0): 1}))
    with pytest.raises(ValueError):
        WarmStart({(0, 0): 2})


@pytest.mark.parametrize("kwargs", [dict(relative_gap=-0.1), dict(node_limit=0), dict(time_limit=0),
                                    dict(branching="random"), dict(lp_method="cplex")])
def test_options_validation(kwargs):
    with pytest.raises(ValueError):
        MipOptions(**kwargs)
