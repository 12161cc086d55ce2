"""Dense exact LP solver with dual values and incremental column addition.

All linear programs in this package are small and dense (hundreds of rows),
and the probing algorithms consume both primal values and row duals, so a
self-contained revised simplex is used: Dantzig pricing with a Bland's-rule
anti-cycling fallback, two-phase start, and an explicit dense basis inverse
that is refactorized periodically.  Pivoting is deterministic, so repeated
solves of the same problem return bit-identical solutions.

Problems are stated as maximization; rows may be ``<=``, ``=`` or ``>=`` and
variables carry individual bounds.  Reported duals refer to the rows as
given: in a maximization, a binding ``<=`` row has a nonnegative dual and a
binding ``>=`` row a nonpositive one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instances import CapacityError, LpNumericalError

FEAS_TOL = 1e-8    # primal feasibility
OPT_TOL = 1e-9     # reduced-cost optimality
PIVOT_TOL = 1e-10  # smallest acceptable pivot element
REFACTOR_EVERY = 100
MAX_DENSE_ENTRIES = 30_000_000  # desk scale; protects the dense representation

LE, EQ, GE = "<=", "=", ">="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LpProblem:
    """``max c.x  s.t.  A x (senses) b,  lb <= x <= ub``."""

    c: np.ndarray
    A: np.ndarray
    senses: tuple[str, ...]
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    @staticmethod
    def make(c, A, senses, b, lb=None, ub=None) -> "LpProblem":
        c = np.asarray(c, dtype=float)
        A = np.asarray(A, dtype=float)
        if A.size == 0:
            A = A.reshape((len(senses) if senses else 0, len(c)))
        b = np.asarray(b, dtype=float)
        n = len(c)
        if A.shape != (len(b), n):
            raise ValueError(f"A has shape {A.shape}, expected ({len(b)}, {n})")
        senses = tuple(senses)
        if any(s not in (LE, EQ, GE) for s in senses):
            raise ValueError("row senses must be one of <=, =, >=")
        lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
        ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
        if np.any(lb > ub):
            raise ValueError("lower bound exceeds upper bound")
        return LpProblem(c=c, A=A, senses=senses, b=b, lb=lb, ub=ub)

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.b)


@dataclass(frozen=True)
class LpSolution:
    status: str
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float | None = None
    dual_objective: float | None = None
    iterations: int = 0


def add_column(problem: LpProblem, obj_coeff: float, column,
               lb: float = 0.0, ub: float = np.inf) -> LpProblem:
    """Problem with one extra variable appended (default bounds [0, inf))."""
    column = np.asarray(column, dtype=float)
    if column.shape != (problem.n_rows,):
        raise ValueError(f"column has length {column.shape}, expected {problem.n_rows}")
    return LpProblem(
        c=np.append(problem.c, float(obj_coeff)),
        A=np.hstack([problem.A, column[:, None]]) if problem.n_rows else
          problem.A.reshape(0, problem.n_vars + 1),
        senses=problem.senses,
        b=problem.b,
        lb=np.append(problem.lb, lb),
        ub=np.append(problem.ub, ub),
    )


# ---------------------------------------------------------------------------
# Standard-form conversion
# ---------------------------------------------------------------------------

class _Standardized:
    """max c.x, A x = b, x >= 0, b >= 0, plus bookkeeping to map back."""

    def __init__(self, p: LpProblem):
        m0, n0 = p.n_rows, p.n_vars
        cols, c_int, recover = [], [], []
        base = np.zeros(n0)
        ub_rows = []  # (internal structural col, residual bound)
        for j in range(n0):
            l, u = p.lb[j], p.ub[j]
            a = p.A[:, j] if m0 else np.zeros(0)
            if np.isfinite(l):
                base[j] = l
                cols.append(a)
                c_int.append(p.c[j])
                recover.append((j, 1.0))
                if np.isfinite(u):
                    ub_rows.append((len(cols) - 1, u - l))
            elif np.isfinite(u):
                base[j] = u  # reflect: x = u - x'
                cols.append(-a)
                c_int.append(-p.c[j])
                recover.append((j, -1.0))
            else:
                cols.append(a)
                c_int.append(p.c[j])
                recover.append((j, 1.0))
                cols.append(-a)
                c_int.append(-p.c[j])
                recover.append((j, -1.0))
        n_struct = len(cols)
        A_struct = np.column_stack(cols) if cols else np.zeros((m0, 0))
        shift = (p.A @ base) if m0 else np.zeros(0)
        rows, rhs, is_eq, row_sign = [], [], [], []
        for i in range(m0):
            s = -1.0 if p.senses[i] == GE else 1.0
            rows.append(s * A_struct[i])
            rhs.append(s * (p.b[i] - shift[i]))
            is_eq.append(p.senses[i] == EQ)
            row_sign.append(s)
        for col, bound in ub_rows:
            row = np.zeros(n_struct)
            row[col] = 1.0
            rows.append(row)
            rhs.append(bound)
            is_eq.append(False)
            row_sign.append(1.0)
        m = len(rows)
        A_rows = np.vstack(rows) if rows else np.zeros((0, n_struct))
        rhs = np.asarray(rhs)
        n_slack = sum(1 for e in is_eq if not e)
        A_full = np.zeros((m, n_struct + n_slack + m))
        A_full[:, :n_struct] = A_rows
        slack_of_row = np.full(m, -1, dtype=int)
        k = n_struct
        for i in range(m):
            if not is_eq[i]:
                A_full[i, k] = 1.0
                slack_of_row[i] = k
                k += 1
        art0 = n_struct + n_slack
        row_scale = np.ones(m)
        for i in range(m):
            if rhs[i] < 0:
                rhs[i] = -rhs[i]
                A_full[i, :art0] = -A_full[i, :art0]
                row_scale[i] = -1.0
            A_full[i, art0 + i] = 1.0

        self.n0, self.m0 = n0, m0
        self.base, self.recover = base, recover
        self.row_sign = np.asarray(row_sign)
        self.row_scale = row_scale
        self.A = A_full
        self.b = rhs
        self.n_struct, self.art0 = n_struct, art0
        self.slack_of_row = slack_of_row
        self.c = np.zeros(A_full.shape[1])
        self.c[:n_struct] = c_int
        self.const = float(np.dot(p.c, base))

    def basis_start(self) -> list[int]:
        basis = []
        for i in range(len(self.b)):
            s = self.slack_of_row[i]
            if s >= 0 and self.row_scale[i] > 0:
                basis.append(s)
            else:
                basis.append(self.art0 + i)
        return basis

    def x_original(self, x_int: np.ndarray) -> np.ndarray:
        x = self.base.copy()
        for k, (j, sgn) in enumerate(self.recover):
            x[j] += sgn * x_int[k]
        return x

    def duals_original(self, y: np.ndarray) -> np.ndarray:
        return (self.row_sign[: self.m0] * self.row_scale[: self.m0] * y[: self.m0]
                if self.m0 else np.zeros(0))


# ---------------------------------------------------------------------------
# Revised simplex core
# ---------------------------------------------------------------------------

def _refactor(A, basis, b):
    B = A[:, basis]
    try:
        Binv = np.linalg.inv(B)
    except np.linalg.LinAlgError as e:
        raise LpNumericalError(f"singular basis during refactorization: {e}") from e
    return Binv, Binv @ b


def _simplex_phase(A, b, c, basis, allowed, max_iter):
    """Run primal simplex until optimality for cost ``c``.

    Returns (basis, Binv, xB, status, iters); status is OPTIMAL or UNBOUNDED.
    """
    m, N = A.shape
    if m == 0:
        return basis, np.zeros((0, 0)), np.zeros(0), OPTIMAL, 0
    Binv, xB = _refactor(A, basis, b)
    in_basis = np.zeros(N, dtype=bool)
    in_basis[basis] = True
    bland = False
    degenerate = 0
    bland_after = 10 * (m + N)
    it = 0
    while True:
        if it >= max_iter:
            raise LpNumericalError(f"simplex exceeded {max_iter} iterations")
        if it and it % REFACTOR_EVERY == 0:
            Binv, xB = _refactor(A, basis, b)
        y = c[basis] @ Binv
        z = c - y @ A
        z[in_basis] = -np.inf
        z[~allowed] = -np.inf
        if bland:
            pos = np.nonzero(z > OPT_TOL)[0]
            if pos.size == 0:
                return basis, Binv, xB, OPTIMAL, it
            j = int(pos[0])
        else:
            j = int(np.argmax(z))
            if z[j] <= OPT_TOL:
                return basis, Binv, xB, OPTIMAL, it
        d = Binv @ A[:, j]
        cand = np.nonzero(d > PIVOT_TOL)[0]
        if cand.size == 0:
            return basis, Binv, xB, UNBOUNDED, it
        ratios = xB[cand] / d[cand]
        rmin = float(np.min(ratios))
        ties = cand[ratios <= rmin + FEAS_TOL]
        if bland:
            # leave the tied basic variable with the smallest index
            r = int(ties[np.argmin(np.asarray(basis)[ties])])
        else:
            r = int(ties[np.argmax(d[ties])])
        if rmin <= FEAS_TOL:
            degenerate += 1
            if degenerate > bland_after:
                bland = True
        t = xB[r] / d[r]
        xB = xB - d * t
        xB[r] = t
        np.clip(xB, 0.0, None, out=xB)
        br = Binv[r] / d[r]
        Binv = Binv - np.outer(d, br)
        Binv[r] = br
        in_basis[basis[r]] = False
        in_basis[j] = True
        basis[r] = j
        it += 1


def _drive_out_artificials(std, basis, Binv):
    m = len(std.b)
    for r in range(m):
        if basis[r] < std.art0:
            continue
        row = Binv[r] @ std.A[:, : std.art0]
        cand = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
        if cand.size == 0:
            continue  # redundant row; artificial stays basic at value 0
        j = int(cand[0])
        d = Binv @ std.A[:, j]
        br = Binv[r] / d[r]
        Binv = Binv - np.outer(d, br)
        Binv[r] = br
        basis[r] = j
    return basis, Binv


def solve(problem: LpProblem, max_iter: int | None = None) -> LpSolution:
    """Solve to optimality; returns primal values, row duals, and objective.

    Raises ``LpNumericalError`` if the pivot tolerance cannot make progress
    within the iteration budget even after the Bland's-rule fallback.
    """
    n_bounded = int(np.count_nonzero(np.isfinite(problem.ub)))
    est_rows = problem.n_rows + n_bounded
    if est_rows * (problem.n_vars + 2 * est_rows) > MAX_DENSE_ENTRIES:
        raise CapacityError("problem too large for the dense exact solver")
    std = _Standardized(problem)
    m, N = std.A.shape
    if max_iter is None:
        max_iter = 5000 + 60 * (m + N)
    if m == 0:
        # only bounds; maximize each variable independently
        x = np.where(problem.c > 0, problem.ub, problem.lb)
        x = np.where(problem.c == 0, np.where(np.isfinite(problem.lb), problem.lb,
                                              np.where(np.isfinite(problem.ub), problem.ub, 0.0)), x)
        if np.any(~np.isfinite(x[problem.c != 0])):
            return LpSolution(status=UNBOUNDED)
        obj = float(problem.c @ x)
        return LpSolution(status=OPTIMAL, x=x, duals=np.zeros(0), objective=obj,
                          dual_objective=obj)

    basis = std.basis_start()
    allowed = np.ones(N, dtype=bool)
    c1 = np.zeros(N)
    c1[std.art0:] = -1.0
    basis, Binv, xB, status, it1 = _simplex_phase(std.A, std.b, c1, basis, allowed, max_iter)
    if status != OPTIMAL:
        raise LpNumericalError("phase 1 did not terminate at an optimum")
    art_values = sum(xB[r] for r in range(m) if basis[r] >= std.art0)
    if art_values > FEAS_TOL * (1.0 + float(np.abs(std.b).max(initial=0.0))):
        return LpSolution(status=INFEASIBLE, iterations=it1)
    basis, Binv = _drive_out_artificials(std, basis, Binv)
    allowed[std.art0:] = False

    basis, Binv, xB, status, it2 = _simplex_phase(std.A, std.b, std.c, basis, allowed, max_iter)
    if status == UNBOUNDED:
        return LpSolution(status=UNBOUNDED, iterations=it1 + it2)

    Binv, xB = _refactor(std.A, basis, std.b)
    np.clip(xB, 0.0, None, out=xB)
    x_int = np.zeros(N)
    x_int[basis] = xB
    y = std.c[basis] @ Binv
    x = std.x_original(x_int[: std.n_struct])
    obj = float(std.c @ x_int) + std.const
    dual_obj = float(y @ std.b) + std.const
    return LpSolution(status=OPTIMAL, x=x, duals=std.duals_original(y),
                      objective=obj, dual_objective=dual_obj, iterations=it1 + it2)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

def solution_residuals(problem: LpProblem, sol: LpSolution) -> dict:
    """Max feasibility and complementary-slackness residuals of a solution.

    ``primal``: constraint/bound violation; ``dual``: wrong-signed dual;
    ``cs``: max over rows of |dual * row slack| and over columns of
    |reduced cost * distance to the active bound| (scaled check used by the
    test-suite invariants).
    """
    x, y = sol.x, sol.duals
    Ax = problem.A @ x if problem.n_rows else np.zeros(0)
    primal = 0.0
    cs = 0.0
    for i, s in enumerate(problem.senses):
        slack = problem.b[i] - Ax[i]
        if s == LE:
            primal = max(primal, -slack)
        elif s == GE:
            primal = max(primal, slack)
        else:
            primal = max(primal, abs(slack))
        cs = max(cs, abs(y[i] * slack))
    primal = max(primal, float(np.max(problem.lb - x, initial=0.0)))
    primal = max(primal, float(np.max(x - problem.ub, initial=0.0)))
    dual = 0.0
    for i, s in enumerate(problem.senses):
        if s == LE:
            dual = max(dual, -y[i])
        elif s == GE:
            dual = max(dual, y[i])
    rc = problem.c - (y @ problem.A if problem.n_rows else 0.0)
    for j in range(problem.n_vars):
        at_lb = x[j] <= problem.lb[j] + FEAS_TOL
        at_ub = x[j] >= problem.ub[j] - FEAS_TOL
        if at_lb and not at_ub:
            dual = max(dual, rc[j])     # at lower bound: rc must be <= 0
        elif at_ub and not at_lb:
            dual = max(dual, -rc[j])    # at upper bound: rc must be >= 0
        elif not at_lb and not at_ub:
            cs = max(cs, abs(rc[j]))    # strictly interior: rc must vanish
    return {"primal": primal, "dual": dual, "cs": cs}


def dumps_lp(problem: LpProblem) -> str:
    """Readable dump, one constraint per line, 12 significant digits."""
    def num(v):
        return f"{v:.12g}"

    lines = ["max " + " + ".join(f"{num(ci)} x{j}" for j, ci in enumerate(problem.c) if ci != 0.0)]
    for i in range(problem.n_rows):
        terms = " + ".join(f"{num(a)} x{j}" for j, a in enumerate(problem.A[i]) if a != 0.0)
        lines.append(f"r{i}: {terms or '0'} {problem.senses[i]} {num(problem.b[i])}")
    for j in range(problem.n_vars):
        lines.append(f"b{j}: {num(problem.lb[j])} <= x{j} <= {num(problem.ub[j])}")
    return "\n".join(lines) + "\n"
