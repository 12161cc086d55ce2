"""The dense LP engine: exact solves, row duals, and growing a problem
column by column.

Everything downstream (star LP, offline benchmarks, the policy LP master)
runs on this solver, so it exposes duals and deterministic pivoting.
"""

import numpy as np

from stochmatch import LpProblem, add_column, dumps_lp, solution_residuals, solve

# max 3x + 2y  s.t.  x + y <= 4,  x <= 2.5,  x,y >= 0
problem = LpProblem.make(c=[3.0, 2.0],
                         A=[[1.0, 1.0], [1.0, 0.0]],
                         senses=["<=", "<="],
                         b=[4.0, 2.5])
sol = solve(problem)
print("status:", sol.status)
print("x =", sol.x, "objective =", sol.objective)
print("row duals =", sol.duals)          # marginal value of each constraint
print("dual objective =", sol.dual_objective)  # equals the primal objective
print("residuals:", solution_residuals(problem, sol))

# The dual of the first row says another unit of capacity is worth 2.0.
# Price a new activity against the duals: a column consuming (1, 0) with
# reward 2.5 has reduced cost 2.5 - 2.0 = 0.5 > 0, so adding it must help.
grown = add_column(problem, 2.5, [1.0, 0.0])
sol2 = solve(grown)
print("\nafter adding a priced-out column:", sol2.objective, ">", sol.objective)

# a duplicate of an existing optimal column changes nothing
dup = add_column(problem, 3.0, [1.0, 1.0])
print("after adding a duplicate column:", solve(dup).objective)

# textual dump, one constraint per line (also behind `stochmatch lp --dump`)
print("\n" + dumps_lp(problem))

# solves are bit-reproducible
a, b = solve(problem), solve(problem)
assert np.array_equal(a.x, b.x) and a.objective == b.objective
print("re-solve is bit-identical")
