"""Probing a single arrival against a set of weighted stochastic items.

Probes are made one at a time under probe-commit: a successful probe must be
matched and probing stops.  The arrival's patience limits how many probes
can be attempted, under any of the three patience models.  This module
provides

* exact evaluation of a fixed probing order,
* an exact dynamic program for deterministic patience,
* the exact index rule ``w_i p_i / q_i`` for per-item hazard rates,
* an attempt-indexed LP relaxation for arbitrary explicit patience
  distributions and the randomized policy read off its optimal solution
  (guaranteed at least half the LP bound),
* brute-force enumeration oracles, and
* the adjusted-weight pricing problem used by column generation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import lp
from .instances import (
    CapacityError,
    EMPTY_POLICY,
    HAZARD,
    PatienceVariantError,
    Policy,
    StarInstance,
    StochmatchError,
    check_policy,
)

BRUTE_FORCE_MAX_ITEMS = 7
RANDOMIZED_EVAL_MAX_ITEMS = 15
ZERO_SURVIVAL = 1e-9  # attempt rows with survival mass below this are zeroed


@dataclass(frozen=True)
class RandomizedStarPolicy:
    """Per-attempt probe distributions read off the attempt-indexed LP.

    ``attempt_probs[t, j]`` is the probability of probing item ``j`` on
    attempt ``t+1`` conditioned on the process being alive then; it equals
    ``x*_{j,t+1} / s*_{t+1}`` (zero row where the survival mass vanishes).
    Rows sum to at most 1; leftover mass means no probe is made on that
    attempt.  When execution re-selects an item that was already probed,
    the probe is simulated: a simulated success terminates the arrival
    with no reward.  ``row_renormalization`` records the largest downward
    scaling applied to keep row sums at 1 despite solver noise.
    """

    attempt_probs: np.ndarray  # (n, n)
    survival: np.ndarray       # (n,) optimal s* values
    lp_objective: float
    row_renormalization: float = 0.0


@dataclass(frozen=True)
class StarResult:
    """A probing policy with its exact expected reward and, when one is
    attached, the benchmark it was measured against (LP objective for the
    randomized policy, the optimal value for exact solvers)."""

    policy: Policy | RandomizedStarPolicy
    expected_value: float | None
    benchmark: float | None = None


# ---------------------------------------------------------------------------
# Exact evaluation of deterministic policies
# ---------------------------------------------------------------------------

def termination_probs(star: StarInstance) -> np.ndarray:
    """Per item, the probability that probing it ends the process under
    hazard patience: success, or failure followed by balking."""
    p = np.asarray(star.probs)
    r = star.patience.hazard_rates(star.n)
    return p + (1.0 - p) * r


def eval_policy_exact(star: StarInstance, policy: Policy) -> float:
    """Exact expected reward of probing in the given order.

    Survival-curve and deterministic patience: the k-th probe happens iff
    the patience is at least ``k`` and the first ``k-1`` probes failed.
    Hazard patience: after each failed probe of item ``i`` the arrival balks
    with probability ``r_i``.
    """
    check_policy(policy, star.n)
    w, p = star.weights, star.probs
    total = 0.0
    if star.patience.kind == HAZARD:
        q = termination_probs(star)
        alive = 1.0
        for i in policy.order:
            total += alive * p[i] * w[i]
            alive *= 1.0 - q[i]
    else:
        curve = star.patience.survival_curve(star.n)
        fail = 1.0
        for k, i in enumerate(policy.order):
            total += curve[k] * fail * p[i] * w[i]
            fail *= 1.0 - p[i]
    return total


def policy_match_probabilities(star: StarInstance, policy: Policy) -> np.ndarray:
    """Probability that the arrival is matched to each item when following
    ``policy`` with every item available; zero for items not probed."""
    check_policy(policy, star.n)
    out = np.zeros(star.n)
    p = star.probs
    if star.patience.kind == HAZARD:
        q = termination_probs(star)
        alive = 1.0
        for i in policy.order:
            out[i] = alive * p[i]
            alive *= 1.0 - q[i]
    else:
        curve = star.patience.survival_curve(star.n)
        fail = 1.0
        for k, i in enumerate(policy.order):
            out[i] = curve[k] * fail * p[i]
            fail *= 1.0 - p[i]
    return out


# ---------------------------------------------------------------------------
# Exact solvers
# ---------------------------------------------------------------------------

def _positive_items(star: StarInstance):
    return [i for i in range(star.n) if star.probs[i] > 0.0]


def solve_deterministic_patience(star: StarInstance) -> StarResult:
    """Optimal ordered subset for a fixed probe budget ``theta``.

    Within any chosen set that fits the budget, probing in decreasing
    weight order is optimal (an adjacent swap changes the value by
    ``prefix * p_a p_b (w_a - w_b)``), so a knapsack-style DP over the
    weight-sorted items with the budget as capacity finds the optimum.
    Ties in the DP are broken toward probing.
    """
    if not star.patience.is_deterministic:
        raise PatienceVariantError("deterministic-patience solver needs deterministic patience")
    theta = star.patience.theta
    items = _positive_items(star)
    items.sort(key=lambda i: (-star.weights[i], i))
    n = len(items)
    cap = min(theta, n)
    if cap == 0 or n == 0:
        return StarResult(EMPTY_POLICY, 0.0, 0.0)
    # D[i][t]: best value from sorted position i on with t probes left
    D = [[0.0] * (cap + 1) for _ in range(n + 1)]
    take = [[False] * (cap + 1) for _ in range(n)]
    for i in range(n - 1, -1, -1):
        w = star.weights[items[i]]
        p = star.probs[items[i]]
        for t in range(1, cap + 1):
            skip = D[i + 1][t]
            probe = p * w + (1.0 - p) * D[i + 1][t - 1]
            if probe >= skip:
                D[i][t] = probe
                take[i][t] = True
            else:
                D[i][t] = skip
    order = []
    t = cap
    for i in range(n):
        if t > 0 and take[i][t]:
            order.append(items[i])
            t -= 1
    value = D[0][cap]
    return StarResult(Policy(tuple(order)), value, value)


def solve_constant_hazard(star: StarInstance) -> StarResult:
    """Optimal order under per-item hazard rates: sort by ``w_i p_i / q_i``
    with ``q_i = p_i + (1-p_i) r_i``, descending, ties to the lower index.
    Items that cannot contribute (``w_i p_i = 0``) only burn patience and
    are dropped."""
    if not star.patience.is_hazard:
        raise PatienceVariantError("constant-hazard solver needs hazard patience")
    q = termination_probs(star)
    items = [i for i in _positive_items(star) if star.weights[i] * star.probs[i] > 0.0]
    items.sort(key=lambda i: (-star.weights[i] * star.probs[i] / q[i], i))
    policy = Policy(tuple(items))
    value = eval_policy_exact(star, policy)
    return StarResult(policy, value, value)


def enumerate_policies(n: int, max_len: int | None = None):
    """All ordered subsets of ``range(n)`` up to ``max_len``, in a fixed
    deterministic order (by length, then lexicographic)."""
    cap = n if max_len is None else min(max_len, n)
    yield EMPTY_POLICY
    for r in range(1, cap + 1):
        for combo in itertools.combinations(range(n), r):
            for perm in itertools.permutations(combo):
                yield Policy(perm)


def _policy_length_cap(star: StarInstance) -> int:
    pat = star.patience
    if pat.is_deterministic:
        return min(pat.theta, star.n)
    if pat.is_survival:
        support = 0
        for k, v in enumerate(pat.q):
            if v > 0.0:
                support = k + 1
        return min(support, star.n)
    return star.n


def brute_force_optimal(star: StarInstance) -> StarResult:
    """Exhaustive search over all ordered subsets (failed probes carry no
    information beyond their count, so some ordered subset is optimal).
    Only for tiny stars."""
    if star.n > BRUTE_FORCE_MAX_ITEMS:
        raise CapacityError(
            f"brute force capped at {BRUTE_FORCE_MAX_ITEMS} items, got {star.n}")
    items = _positive_items(star)
    sub = star.with_items(items)
    best_policy, best = EMPTY_POLICY, 0.0
    for pol in enumerate_policies(sub.n, _policy_length_cap(sub)):
        v = eval_policy_exact(sub, pol)
        if v > best:
            best, best_policy = v, pol
    mapped = Policy(tuple(items[i] for i in best_policy.order))
    return StarResult(mapped, best, best)


# ---------------------------------------------------------------------------
# Attempt-indexed LP for arbitrary patience distributions
# ---------------------------------------------------------------------------

def _lp_attempt_count(star: StarInstance) -> int:
    curve = star.patience.survival_curve(star.n)
    support = int(np.nonzero(curve > 0.0)[0][-1] + 1) if np.any(curve > 0.0) else 0
    return support


def build_arbitrary_patience_lp(star: StarInstance) -> lp.LpProblem:
    """LP relaxation over probe variables ``x_{j,t}`` (probability of
    probing item ``j`` on attempt ``t``) and survival variables ``s_t``.

    Constraints: each item is probed at most once across any attempt
    suffix (``sum_{t >= t'} x_{j,t} <= s_{t'}``); at most one probe per
    attempt (``sum_j x_{j,t} <= s_t``); ``s_1 = 1``; and the survival
    recursion ``s_t = (q_t / q_{t-1}) (s_{t-1} - sum_j p_j x_{j,t-1})``
    with the ratio read as 0 when both survival values vanish.  The
    optimal objective upper-bounds every probing algorithm.  Attempts are
    capped at the item count (an item can be probed at most once) and
    trimmed past the survival support, both of which leave the optimum
    unchanged.

    Variable layout: ``x_{j,t}`` at ``j * T + t``, then ``s_t`` at
    ``n * T + t``, with ``T`` the attempt count.
    """
    n = star.n
    T = _lp_attempt_count(star)
    if n == 0 or T == 0:
        return lp.LpProblem.make(np.zeros(0), np.zeros((0, 0)), (), np.zeros(0))
    curve = star.patience.survival_curve(n)
    p = np.asarray(star.probs)
    w = np.asarray(star.weights)
    nx = n * T
    nv = nx + T
    c = np.zeros(nv)
    for j in range(n):
        c[j * T: (j + 1) * T] = w[j] * p[j]
    rows, senses, rhs = [], [], []
    # suffix sums: each item probed at most once given survival to attempt t'
    for j in range(n):
        for t0 in range(T):
            row = np.zeros(nv)
            row[j * T + t0: (j + 1) * T] = 1.0
            row[nx + t0] = -1.0
            rows.append(row)
            senses.append(lp.LE)
            rhs.append(0.0)
    # one probe per attempt
    for t in range(T):
        row = np.zeros(nv)
        row[t: nx: T] = 1.0
        row[nx + t] = -1.0
        rows.append(row)
        senses.append(lp.LE)
        rhs.append(0.0)
    # survival recursion
    row = np.zeros(nv)
    row[nx] = 1.0
    rows.append(row)
    senses.append(lp.EQ)
    rhs.append(1.0)
    for t in range(1, T):
        ratio = curve[t] / curve[t - 1] if curve[t - 1] > 0.0 else 0.0
        row = np.zeros(nv)
        row[nx + t] = 1.0
        row[nx + t - 1] = -ratio
        for j in range(n):
            row[j * T + t - 1] = ratio * p[j]
        rows.append(row)
        senses.append(lp.EQ)
        rhs.append(0.0)
    return lp.LpProblem.make(c, np.vstack(rows), senses, rhs)


def _lp_supported_patience(star: StarInstance) -> bool:
    pat = star.patience
    return pat.is_survival or pat.is_deterministic or pat.has_global_rate


def solve_arbitrary_patience(star: StarInstance) -> StarResult:
    """Solve the attempt-indexed LP and read off the randomized policy.

    Works for any explicitly given patience distribution (survival curve,
    deterministic step, or the geometric curve of a global hazard rate).
    The returned policy's exact expected reward is at least half the LP
    objective; it is computed exactly when the star is small enough and
    left as ``None`` otherwise.
    """
    if not _lp_supported_patience(star):
        raise PatienceVariantError(
            "the LP policy needs a policy-independent patience distribution")
    n = star.n
    T = _lp_attempt_count(star)
    if n == 0 or T == 0:
        rsp = RandomizedStarPolicy(np.zeros((n, n)), np.zeros(n), 0.0)
        return StarResult(rsp, 0.0, 0.0)
    problem = build_arbitrary_patience_lp(star)
    sol = lp.solve(problem)
    if sol.status != lp.OPTIMAL:
        raise StochmatchError(f"attempt-indexed LP came back {sol.status}")
    x = sol.x[: n * T].reshape(n, T)
    s = sol.x[n * T:]
    probs = np.zeros((n, n))
    surv = np.zeros(n)
    surv[:T] = np.clip(s, 0.0, None)
    worst_scale = 0.0
    for t in range(T):
        if surv[t] <= ZERO_SURVIVAL:
            surv[t] = max(surv[t], 0.0)
            continue
        row = np.clip(x[:, t], 0.0, None) / surv[t]
        total = row.sum()
        if total > 1.0:
            row /= total
            worst_scale = max(worst_scale, total - 1.0)
        probs[t, :] = row
    rsp = RandomizedStarPolicy(probs, surv, sol.objective, worst_scale)
    value = eval_randomized_exact(star, rsp) if n <= RANDOMIZED_EVAL_MAX_ITEMS else None
    return StarResult(rsp, value, sol.objective)


def eval_randomized_exact(star: StarInstance, rsp: RandomizedStarPolicy) -> float:
    """Exact expected reward of executing a randomized attempt policy.

    State: the set of items already really probed, and the attempt index.
    On each attempt an item is drawn from that attempt's row (leftover row
    mass makes no probe but the attempt still elapses).  Probing a fresh
    item pays ``w_j`` with probability ``p_j``; re-drawing an already
    probed item simulates the probe and a simulated success terminates
    with no reward.  Only real successes accrue reward.  Surviving into
    the next attempt multiplies by the patience ratio ``q_{t+1}/q_t``.
    """
    n = star.n
    if n > RANDOMIZED_EVAL_MAX_ITEMS:
        raise CapacityError(
            f"exact randomized evaluation capped at {RANDOMIZED_EVAL_MAX_ITEMS} items")
    if n == 0:
        return 0.0
    curve = star.patience.survival_curve(n)
    p = np.asarray(star.probs)
    w = np.asarray(star.weights)
    rows = rsp.attempt_probs
    T = rows.shape[0]
    row_has_mass = rows.sum(axis=1) > 0.0
    memo: dict[tuple[int, int], float] = {}

    def go(t: int, probed: int) -> float:
        if t >= T or curve[t] <= 0.0 or not row_has_mass[t:].any():
            return 0.0
        key = (t, probed)
        cached = memo.get(key)
        if cached is not None:
            return cached
        ratio_next = (curve[t + 1] / curve[t]) if t + 1 < T and curve[t] > 0.0 else 0.0
        row = rows[t]
        idle = 1.0 - row.sum()
        nxt_same = None
        total = 0.0
        for j in range(n):
            pr = row[j]
            if pr <= 0.0:
                continue
            if probed >> j & 1:
                # simulated probe: success terminates with no reward
                if nxt_same is None:
                    nxt_same = ratio_next * go(t + 1, probed) if ratio_next > 0.0 else 0.0
                total += pr * (1.0 - p[j]) * nxt_same
            else:
                cont = ratio_next * go(t + 1, probed | (1 << j)) if ratio_next > 0.0 else 0.0
                total += pr * (p[j] * w[j] + (1.0 - p[j]) * cont)
        if idle > 1e-15:
            if nxt_same is None:
                nxt_same = ratio_next * go(t + 1, probed) if ratio_next > 0.0 else 0.0
            total += idle * nxt_same
        memo[key] = total
        return total

    return go(0, 0)


def randomized_match_probabilities(star: StarInstance,
                                   rsp: RandomizedStarPolicy) -> np.ndarray:
    """Per-item probabilities of a real match when executing ``rsp``;
    same process as ``eval_randomized_exact`` but resolved per item."""
    n = star.n
    if n > RANDOMIZED_EVAL_MAX_ITEMS:
        raise CapacityError(
            f"exact randomized evaluation capped at {RANDOMIZED_EVAL_MAX_ITEMS} items")
    if n == 0:
        return np.zeros(0)
    curve = star.patience.survival_curve(n)
    p = np.asarray(star.probs)
    rows = rsp.attempt_probs
    T = rows.shape[0]
    zero = np.zeros(n)
    memo: dict[tuple[int, int], np.ndarray] = {}

    def go(t: int, probed: int) -> np.ndarray:
        if t >= T or curve[t] <= 0.0 or not rows[t:].any():
            return zero
        key = (t, probed)
        cached = memo.get(key)
        if cached is not None:
            return cached
        ratio_next = (curve[t + 1] / curve[t]) if t + 1 < T else 0.0
        row = rows[t]
        idle = 1.0 - row.sum()
        nxt_same = None
        total = np.zeros(n)
        for j in range(n):
            pr = row[j]
            if pr <= 0.0:
                continue
            if probed >> j & 1:
                if nxt_same is None:
                    nxt_same = ratio_next * go(t + 1, probed) if ratio_next > 0.0 else zero
                total += pr * (1.0 - p[j]) * nxt_same
            else:
                total[j] += pr * p[j]
                if ratio_next > 0.0:
                    total += pr * (1.0 - p[j]) * ratio_next * go(t + 1, probed | (1 << j))
        if idle > 1e-15:
            if nxt_same is None:
                nxt_same = ratio_next * go(t + 1, probed) if ratio_next > 0.0 else zero
            total += idle * nxt_same
        memo[key] = total
        return total

    return go(0, 0)


# ---------------------------------------------------------------------------
# Black boxes and pricing
# ---------------------------------------------------------------------------

_SOLVERS = {
    "dp": (solve_deterministic_patience, 1.0),
    "hazard": (solve_constant_hazard, 1.0),
    "lp": (solve_arbitrary_patience, 0.5),
    "brute": (brute_force_optimal, 1.0),
}


@dataclass(frozen=True)
class StarSolver:
    """A named star-graph black box with its approximation factor kappa."""

    name: str
    kappa: float

    def solve(self, star: StarInstance) -> StarResult:
        return _SOLVERS[self.name][0](star)

    def policy_for(self, star: StarInstance) -> Policy:
        """A deterministic probing order, extracting one from the
        randomized LP policy when needed (items ranked by total LP probe
        mass; heuristic, carries no approximation guarantee)."""
        result = self.solve(star)
        if isinstance(result.policy, Policy):
            return result.policy
        rsp = result.policy
        mass = rsp.attempt_probs.T @ rsp.survival  # total x*_j per item
        items = [j for j in range(star.n) if mass[j] > 1e-12]
        items.sort(key=lambda j: (-mass[j], j))
        cap = _policy_length_cap(star)
        return Policy(tuple(items[:cap]))


def solver_by_name(name: str) -> StarSolver:
    if name not in _SOLVERS:
        raise StochmatchError(f"unknown star solver {name!r}")
    return StarSolver(name, _SOLVERS[name][1])


def auto_solver(star_or_patience) -> StarSolver:
    """The exact solver for the patience variant when one exists, the
    1/2-approximate LP policy otherwise."""
    pat = star_or_patience.patience if isinstance(star_or_patience, StarInstance) else star_or_patience
    if pat.is_deterministic:
        return solver_by_name("dp")
    if pat.is_hazard:
        return solver_by_name("hazard")
    return solver_by_name("lp")


def price_policy(star: StarInstance, adjusted_weights,
                 selector: StarSolver) -> tuple[Policy, float]:
    """Best probing policy for dual-adjusted item weights.

    Items with nonpositive adjusted weight can never help (probing them
    only spends patience) and are dropped before the selector runs.
    Returns the policy over the original item indices together with its
    exact adjusted value ``sum_u p_u(pi) w'_u``.
    """
    adjusted = np.asarray(adjusted_weights, dtype=float)
    if adjusted.shape != (star.n,):
        raise StochmatchError("adjusted weights must match the item count")
    keep = [i for i in range(star.n) if adjusted[i] > 0.0 and star.probs[i] > 0.0]
    if not keep:
        return EMPTY_POLICY, 0.0
    sub = StarInstance(tuple(adjusted[i] for i in keep),
                       tuple(star.probs[i] for i in keep),
                       star.patience.subset(keep))
    sub_policy = selector.policy_for(sub)
    policy = Policy(tuple(keep[i] for i in sub_policy.order))
    value = float(policy_match_probabilities(star, policy) @ adjusted)
    return policy, value
