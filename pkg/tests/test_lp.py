import numpy as np
import pytest
from scipy.optimize import linprog

from stochmatch import hard_instances as hard
from stochmatch.lp import (
    LpProblem,
    OPTIMAL,
    add_column,
    dumps_lp,
    solution_residuals,
    solve,
)
from stochmatch.stars import build_arbitrary_patience_lp


def test_one_variable_lp():
    sol = solve(LpProblem.make([1.0], [[1.0]], ["<="], [1.0]))
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(1.0, abs=1e-12)
    assert sol.x[0] == pytest.approx(1.0, abs=1e-12)
    assert sol.duals[0] == pytest.approx(1.0, abs=1e-9)


def test_degenerate_optimum():
    sol = solve(LpProblem.make([1.0, 1.0], [[1.0, 1.0]], ["<="], [1.0]))
    assert sol.objective == pytest.approx(1.0, abs=1e-12)


def test_tight_example_lp_objective():
    star = hard.gen_tight_example(0.1)
    sol = solve(build_arbitrary_patience_lp(star))
    assert sol.objective == pytest.approx(0.1, abs=1e-9)


def test_infeasible_and_unbounded():
    assert solve(LpProblem.make([1.0], [[1.0], [1.0]], ["<=", ">="], [1.0, 2.0])).status == "infeasible"
    assert solve(LpProblem.make([1.0], np.zeros((0, 1)), [], [])).status == "unbounded"


def test_add_column_duplicate_keeps_objective():
    p = LpProblem.make([2.0, 1.0], [[1.0, 1.0]], ["<="], [1.0])
    base = solve(p).objective
    p2 = add_column(p, 2.0, [1.0])  # duplicate of the optimal column
    assert solve(p2).objective == pytest.approx(base, abs=1e-10)


def test_add_column_with_positive_reduced_cost_improves():
    p = LpProblem.make([1.0], [[1.0]], ["<="], [1.0])
    base = solve(p)
    # new column consumes the same row but pays more: must enter
    p2 = add_column(p, 3.0, [1.0])
    sol = solve(p2)
    assert sol.objective > base.objective + 0.5


def test_dimension_mismatch_raises():
    p = LpProblem.make([1.0], [[1.0]], ["<="], [1.0])
    with pytest.raises(ValueError):
        add_column(p, 1.0, [1.0, 2.0])


def _random_problem(rng):
    n = int(rng.integers(1, 9))
    m = int(rng.integers(1, 9))
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    senses = [("<=", "=", ">=")[rng.integers(0, 3)] for _ in range(m)]
    b = rng.normal(size=m)
    lb = np.where(rng.random(n) < 0.8, 0.0, -np.inf)
    ub = np.where(rng.random(n) < 0.5, rng.uniform(0.5, 3.0, n), np.inf)
    return LpProblem.make(c, A, senses, b, lb, ub)


def _scipy_solve(p):
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i, s in enumerate(p.senses):
        if s == "<=":
            A_ub.append(p.A[i]); b_ub.append(p.b[i])
        elif s == ">=":
            A_ub.append(-p.A[i]); b_ub.append(-p.b[i])
        else:
            A_eq.append(p.A[i]); b_eq.append(p.b[i])
    bounds = [(l if np.isfinite(l) else None, u if np.isfinite(u) else None)
              for l, u in zip(p.lb, p.ub)]
    return linprog(-p.c, A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                   A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
                   bounds=bounds, method="highs")


@pytest.mark.parametrize("seed", range(8))
def test_matches_reference_solver_on_random_lps(seed):
    rng = np.random.default_rng(seed)
    for _ in range(25):
        p = _random_problem(rng)
        sol = solve(p)
        ref = _scipy_solve(p)
        expected = {2: "infeasible", 3: "unbounded"}.get(ref.status, "optimal")
        assert sol.status == expected
        if expected == "optimal":
            assert sol.objective == pytest.approx(-ref.fun, abs=1e-6, rel=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_optimal_solutions_satisfy_invariants(seed):
    rng = np.random.default_rng(100 + seed)
    for _ in range(30):
        p = _random_problem(rng)
        sol = solve(p)
        if sol.status != OPTIMAL:
            continue
        res = solution_residuals(p, sol)
        assert res["primal"] <= 1e-8
        assert res["cs"] <= 1e-7
        # strong duality, relative
        assert abs(sol.objective - sol.dual_objective) <= 1e-7 * (1 + abs(sol.objective))


def test_objective_scaling_property():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n, m = 5, 4
        c = rng.random(n) + 0.1
        A = rng.random((m, n))
        b = rng.random(m) + 0.5
        p = LpProblem.make(c, A, ["<="] * m, b)
        lam = 3.5
        p_scaled = LpProblem.make(lam * c, A, ["<="] * m, b)
        s1, s2 = solve(p), solve(p_scaled)
        assert s2.objective == pytest.approx(lam * s1.objective, rel=1e-9)
        assert np.allclose(s1.x, s2.x, atol=1e-8)


def test_deterministic_resolve():
    rng = np.random.default_rng(11)
    p = _random_problem(rng)
    s1, s2 = solve(p), solve(p)
    if s1.status == OPTIMAL:
        assert np.array_equal(s1.x, s2.x)
        assert s1.objective == s2.objective
        assert np.array_equal(s1.duals, s2.duals)


def test_dump_has_one_row_per_constraint():
    p = LpProblem.make([1.0, 2.0], [[1.0, 0.0], [1.0, 1.0]], ["<=", "="], [1.0, 2.0])
    text = dumps_lp(p)
    lines = text.strip().splitlines()
    assert lines[0].startswith("max ")
    assert sum(1 for ln in lines if ln.startswith("r")) == 2
