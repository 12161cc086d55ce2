"""Online matching driven by star-graph black boxes.

Three matchers are provided:

* ``AdvGreedyMatcher``: for adversarial arrivals, greedily solve the star
  induced by each arrival on the still-unmatched neighbors and probe in the
  returned order.
* ``PolicyLpMatcher``: for prophet or IID arrivals, sample a probing policy
  per arrival from the policy-LP solution.  In the edge-weighted prophet
  setting the matcher skips entries whose edge weight is below half the
  vertex's LP-expected reward; with IID arrivals (or vertex weights) it
  never skips.  Probing an already-matched vertex is simulated so that the
  availability process stays coupled to the LP: a simulated success ends
  the arrival with no reward.
* ``SimpleGreedyMatcher``: the opportunistic baseline that probes an
  arbitrary (rule-selected) available neighbor.

Patience semantics: real and simulated probes each consume one unit of
patience, weight-skips consume none.  A survival-curve patience is realized
once per arrival (hidden from the matcher); hazard patience flips a balk
coin after each failed probe.

Also here: the offline benchmark LP over edge-probe variables (optionally
tightened with per-subset star-optimum rows), and the policy LP over probing
policies solved by column generation against its pricing problem.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .instances import (
    ADVERSARIAL,
    CapabilityError,
    CapacityError,
    EMPTY_POLICY,
    IID,
    MatchingInstance,
    PatienceModel,
    PatienceVariantError,
    Policy,
    PolicyMixture,
    PROPHET,
    StarInstance,
    StochmatchError,
)
from .stars import (
    RandomizedStarPolicy,
    StarSolver,
    auto_solver,
    enumerate_policies,
    policy_match_probabilities,
    price_policy,
    randomized_match_probabilities,
    solver_by_name,
    _policy_length_cap,
)

PRICING_TOL = 1e-7
COLUMN_CAP = 10_000
BIG_PATIENCE = 10 ** 9


# ---------------------------------------------------------------------------
# Matcher state and traces
# ---------------------------------------------------------------------------

@dataclass
class ProbeRecord:
    step: int
    vtype: int
    attempt: int
    vertex: int
    kind: str     # real | simulated | skip
    outcome: str  # success | fail | skip


@dataclass
class MatcherState:
    """Result of one matcher run: who got matched and the weight collected."""

    matched: dict[int, tuple[int, int, float]] = field(default_factory=dict)
    total_weight: float = 0.0
    trace: list[ProbeRecord] | None = None

    def record(self, *args):
        if self.trace is not None:
            self.trace.append(ProbeRecord(*args))

    def match(self, u: int, step: int, vtype: int, weight: float):
        self.matched[u] = (step, vtype, weight)
        self.total_weight += weight


def format_trace(state: MatcherState) -> str:
    """Line-delimited trace: step type attempt vertex kind outcome."""
    if state.trace is None:
        return ""
    return "\n".join(
        f"{r.step} {r.vtype} {r.attempt} {r.vertex} {r.kind} {r.outcome}"
        for r in state.trace) + ("\n" if state.trace else "")


# ---------------------------------------------------------------------------
# Randomness helpers
# ---------------------------------------------------------------------------

class RandomTape:
    """Buffered uniform stream over a numpy Generator (cuts per-draw cost)."""

    __slots__ = ("gen", "buf", "pos")

    def __init__(self, gen, block: int = 192):
        self.gen = gen
        self.buf = gen.random(block)
        self.pos = 0

    def u(self) -> float:
        buf, pos = self.buf, self.pos
        if pos >= buf.shape[0]:
            self.buf = buf = self.gen.random(buf.shape[0])
            self.pos = pos = 0
        self.pos = pos + 1
        return buf[pos]


class AliasSampler:
    """Vose alias table for O(1) draws from a fixed discrete distribution."""

    __slots__ = ("n", "prob", "alias")

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if total <= 0:
            raise StochmatchError("alias sampler needs positive total mass")
        n = len(w)
        scaled = w * (n / total)
        prob = np.zeros(n)
        alias = np.zeros(n, dtype=int)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        for i in large + small:
            prob[i] = 1.0
        self.n, self.prob, self.alias = n, prob, alias

    def sample(self, tape: RandomTape) -> int:
        i = min(int(tape.u() * self.n), self.n - 1)
        return i if tape.u() < self.prob[i] else int(self.alias[i])


def realized_patience(patience: PatienceModel, tape: RandomTape) -> int:
    """Sample the number of probes an arrival will tolerate.

    Survival curves are inverted in one draw; a global hazard rate is the
    geometric special case.  Per-item hazard rates have no order-free
    realization and are handled by per-probe balk coins instead.
    """
    if patience.is_deterministic:
        return patience.theta
    if patience.is_survival:
        u = tape.u()
        k = 0
        for qk in patience.q:
            if qk > u:
                k += 1
            else:
                break
        return k
    if patience.has_global_rate:
        r = patience.rate
        if r >= 1.0:
            return 1
        if r <= 0.0:
            return BIG_PATIENCE
        u = tape.u()
        return 1 + int(np.log(max(u, 1e-300)) / np.log(1.0 - r))
    raise PatienceVariantError("per-item hazard patience is realized probe by probe")


# ---------------------------------------------------------------------------
# Per-arrival probe execution
# ---------------------------------------------------------------------------

class _Tables:
    """Plain-list views of one instance, built once per matcher run series
    (numpy scalar indexing is too slow for the per-probe hot loop)."""

    __slots__ = ("m", "patience", "prob_cols", "weight_cols", "rate_cols", "neighbors")

    def __init__(self, instance: MatchingInstance):
        self.m = instance.m
        self.patience = instance.patience
        cols = np.asarray(instance.probs).T.tolist()
        self.prob_cols = cols
        wmat = instance.weights_matrix()
        self.weight_cols = wmat.T.tolist()
        self.rate_cols = [
            pat.hazard_rates(instance.m).tolist() if pat.is_hazard else None
            for pat in instance.patience]
        self.neighbors = [[u for u in range(instance.m) if cols[v][u] > 0.0]
                          for v in range(instance.n_types)]


def _walk_policy(tables: _Tables, state, step, v, order, tape, skip_half_of=None):
    """Execute a deterministic probing order for one arrival of type ``v``.

    Entries below the skip threshold are passed over without spending
    patience.  Probing a matched vertex is simulated; simulated success
    abandons the arrival.  Hazard patience flips a balk coin after each
    failed probe; the other models realize the patience once up front.
    """
    pat = tables.patience[v]
    hazard_coins = pat.is_hazard
    budget = None if hazard_coins else realized_patience(pat, tape)
    rates = tables.rate_cols[v]
    probs = tables.prob_cols[v]
    weights = tables.weight_cols[v]
    matched = state.matched
    probes = 0
    for u in order:
        if skip_half_of is not None and weights[u] < 0.5 * skip_half_of[u]:
            state.record(step, v, probes, u, "skip", "skip")
            continue
        if budget is not None:
            if probes >= budget:
                break
        p = probs[u]
        if u not in matched:
            if tape.u() < p:
                state.record(step, v, probes + 1, u, "real", "success")
                state.match(u, step, v, weights[u])
                return
            state.record(step, v, probes + 1, u, "real", "fail")
        else:
            if tape.u() < p:
                state.record(step, v, probes + 1, u, "simulated", "success")
                return
            state.record(step, v, probes + 1, u, "simulated", "fail")
        probes += 1
        if hazard_coins and tape.u() < rates[u]:
            break


def _walk_randomized(tables: _Tables, state, step, v, rsp: RandomizedStarPolicy,
                     items, tape):
    """Execute a randomized attempt policy over the star items ``items``
    (global offline indices), all unmatched when the plan was built.
    Idle attempt mass makes no probe but the attempt still elapses."""
    pat = tables.patience[v]
    budget = realized_patience(pat, tape)
    rows = rsp.attempt_probs
    probs = tables.prob_cols[v]
    weights = tables.weight_cols[v]
    probed = set()
    for t in range(min(rows.shape[0], budget)):
        row = rows[t]
        if not row.any():
            if not rows[t:].any():
                break
            continue
        u_draw = tape.u()
        cum = 0.0
        j = -1
        for jj in range(len(items)):
            cum += row[jj]
            if u_draw < cum:
                j = jj
                break
        if j < 0:
            continue  # idle attempt
        u = items[j]
        p = probs[u]
        if j in probed:
            if tape.u() < p:
                state.record(step, v, t + 1, u, "simulated", "success")
                return
            state.record(step, v, t + 1, u, "simulated", "fail")
        else:
            probed.add(j)
            if tape.u() < p:
                state.record(step, v, t + 1, u, "real", "success")
                state.match(u, step, v, weights[u])
                return
            state.record(step, v, t + 1, u, "real", "fail")


# ---------------------------------------------------------------------------
# Greedy matchers for adversarial arrivals
# ---------------------------------------------------------------------------

class _TableCache:
    _table_pair: tuple | None = None

    def _tables(self, instance) -> _Tables:
        pair = self._table_pair
        if pair is None or pair[0] is not instance:
            pair = (instance, _Tables(instance))
            self._table_pair = pair
        return pair[1]


class AdvGreedyMatcher(_TableCache):
    """Greedy star-black-box matcher for a fixed adversarial arrival order.

    Per arrival, builds the star over the currently unmatched neighbors,
    asks the black box for a plan, and probes accordingly (committing on
    the first success).  Plans are cached by (type, available set); the
    cache is an optimization only and never changes results.
    """

    def __init__(self, solver: StarSolver | None = None):
        self.solver = solver
        self._plans: dict = {}

    def _plan(self, instance, v, avail_key):
        key = (v, avail_key)
        plan = self._plans.get(key)
        if plan is None:
            star, items = instance.star_for(v, avail_key)
            solver = self.solver or auto_solver(star)
            result = solver.solve(star)
            if isinstance(result.policy, Policy):
                plan = ("policy", tuple(items[i] for i in result.policy.order))
            else:
                plan = ("randomized", result.policy, items)
            self._plans[key] = plan
        return plan

    def __call__(self, instance: MatchingInstance, rng, trace: bool = False) -> MatcherState:
        if instance.arrivals.kind != ADVERSARIAL:
            raise CapabilityError("greedy matcher needs adversarial arrivals")
        tables = self._tables(instance)
        tape = rng if isinstance(rng, RandomTape) else RandomTape(rng)
        state = MatcherState(trace=[] if trace else None)
        for step, v in enumerate(instance.arrivals.order):
            matched = state.matched
            avail = tuple(u for u in tables.neighbors[v] if u not in matched)
            if not avail:
                continue
            plan = self._plan(instance, v, avail)
            if plan[0] == "policy":
                _walk_policy(tables, state, step, v, plan[1], tape)
            else:
                _walk_randomized(tables, state, step, v, plan[1], plan[2], tape)
        return state

    def exact_value(self, instance: MatchingInstance) -> float:
        """Exact expected matched weight by expanding every probe outcome."""
        if instance.arrivals.kind != ADVERSARIAL:
            raise CapabilityError("greedy matcher needs adversarial arrivals")
        if instance.m > 20:
            raise CapacityError("exact expansion capped at 20 offline vertices")
        order = instance.arrivals.order
        memo: dict[tuple[int, int], float] = {}

        def go(step: int, avail_mask: int) -> float:
            if step == len(order):
                return 0.0
            key = (step, avail_mask)
            got = memo.get(key)
            if got is not None:
                return got
            v = order[step]
            avail = tuple(u for u in range(instance.m)
                          if avail_mask >> u & 1 and instance.probs[u, v] > 0.0)
            if not avail:
                out = go(step + 1, avail_mask)
                memo[key] = out
                return out
            plan = self._plan(instance, v, avail)
            star, items = instance.star_for(v, avail)
            if plan[0] == "policy":
                local = Policy(tuple(items.index(u) for u in plan[1]))
                match_p = policy_match_probabilities(star, local)
            else:
                match_p = randomized_match_probabilities(star, plan[1])
            total = 0.0
            none = 1.0
            for j, u in enumerate(items):
                pj = float(match_p[j])
                if pj <= 0.0:
                    continue
                none -= pj
                total += pj * (instance.weight(u, v) + go(step + 1, avail_mask & ~(1 << u)))
            total += max(none, 0.0) * go(step + 1, avail_mask)
            memo[key] = total
            return total

        return go(0, (1 << instance.m) - 1)


class SimpleGreedyMatcher(_TableCache):
    """Opportunistic baseline: probe an arbitrary available neighbor.

    ``rule`` picks which neighbor: ``first`` (lowest index) or ``last``.
    With patience above one it keeps probing available, not-yet-probed
    neighbors in rule order.
    """

    def __init__(self, rule: str = "first"):
        if rule not in ("first", "last"):
            raise StochmatchError(f"unknown neighbor rule {rule!r}")
        self.rule = rule

    def __call__(self, instance: MatchingInstance, rng, trace: bool = False) -> MatcherState:
        if instance.arrivals.kind != ADVERSARIAL:
            raise CapabilityError("greedy matcher needs adversarial arrivals")
        tables = self._tables(instance)
        tape = rng if isinstance(rng, RandomTape) else RandomTape(rng)
        state = MatcherState(trace=[] if trace else None)
        reverse = self.rule == "last"
        patience = tables.patience
        fast = state.trace is None
        for step, v in enumerate(instance.arrivals.order):
            neigh = tables.neighbors[v]
            if reverse:
                neigh = neigh[::-1]
            pat = patience[v]
            matched = state.matched
            if fast and pat.is_deterministic and pat.theta == 1:
                # hot path: a single probe at the first available neighbor
                probs = tables.prob_cols[v]
                for u in neigh:
                    if u not in matched:
                        if tape.u() < probs[u]:
                            state.match(u, step, v, tables.weight_cols[v][u])
                        break
                continue
            order = [u for u in neigh if u not in matched]
            if order:
                _walk_policy(tables, state, step, v, order, tape)
        return state

    def exact_value(self, instance: MatchingInstance) -> float:
        if instance.arrivals.kind != ADVERSARIAL:
            raise CapabilityError("greedy matcher needs adversarial arrivals")
        if instance.m > 20:
            raise CapacityError("exact expansion capped at 20 offline vertices")
        order_v = instance.arrivals.order
        memo: dict[tuple[int, int], float] = {}

        def go(step: int, avail_mask: int) -> float:
            if step == len(order_v):
                return 0.0
            key = (step, avail_mask)
            got = memo.get(key)
            if got is not None:
                return got
            v = order_v[step]
            items = [u for u in range(instance.m)
                     if avail_mask >> u & 1 and instance.probs[u, v] > 0.0]
            if self.rule == "last":
                items = items[::-1]
            if not items:
                out = go(step + 1, avail_mask)
                memo[key] = out
                return out
            star = StarInstance(tuple(instance.weight(u, v) for u in items),
                                tuple(float(instance.probs[u, v]) for u in items),
                                instance.patience[v].subset(items))
            match_p = policy_match_probabilities(star, Policy(tuple(range(len(items)))))
            total = 0.0
            none = 1.0
            for j, u in enumerate(items):
                pj = float(match_p[j])
                none -= pj
                total += pj * (instance.weight(u, v) + go(step + 1, avail_mask & ~(1 << u)))
            total += max(none, 0.0) * go(step + 1, avail_mask)
            memo[key] = total
            return total

        return go(0, (1 << instance.m) - 1)


# ---------------------------------------------------------------------------
# Offline benchmark LP over edge-probe variables
# ---------------------------------------------------------------------------

STAR_CONSTRAINT_MAX_OFFLINE = 12


def _exact_solver_for(patience: PatienceModel) -> StarSolver:
    if patience.is_deterministic:
        return solver_by_name("dp")
    if patience.is_hazard:
        return solver_by_name("hazard")
    return solver_by_name("brute")


def build_benchmark_lp(instance: MatchingInstance,
                       include_star_constraints: bool = False,
                       selector: StarSolver | None = None) -> lp.LpProblem:
    """Edge-probe LP upper bound on the offline adaptive optimum.

    Variables ``x_{u,v}`` in [0,1] (probability of probing the edge);
    rows: each offline vertex matched at most once in expectation, each
    online vertex matched at most once, and probes per online vertex at
    most its expected patience.  With ``include_star_constraints`` one row
    per (offline subset, online vertex) caps the subset's LP reward by the
    exact star optimum, giving a strictly tighter bound; this needs an
    exact star solver for the patience variant and at most
    ``STAR_CONSTRAINT_MAX_OFFLINE`` offline vertices.
    """
    m, n = instance.m, instance.n_types
    W = instance.weights_matrix()
    P = np.asarray(instance.probs)
    nv = m * n  # x_{u,v} at u * n + v
    c = (P * W).reshape(nv)
    rows, senses, rhs = [], [], []
    for u in range(m):
        row = np.zeros(nv)
        row[u * n: (u + 1) * n] = P[u]
        rows.append(row)
        senses.append(lp.LE)
        rhs.append(1.0)
    for v in range(n):
        row = np.zeros(nv)
        row[v::n] = P[:, v]
        rows.append(row)
        senses.append(lp.LE)
        rhs.append(1.0)
    for v in range(n):
        row = np.zeros(nv)
        row[v::n] = 1.0
        rows.append(row)
        senses.append(lp.LE)
        rhs.append(instance.patience[v].mean_patience(m))
    if include_star_constraints:
        if m > STAR_CONSTRAINT_MAX_OFFLINE:
            raise CapacityError(
                f"star-cap rows need at most {STAR_CONSTRAINT_MAX_OFFLINE} offline vertices")
        for v in range(n):
            solver = selector or _exact_solver_for(instance.patience[v])
            for r in range(1, m + 1):
                for subset in itertools.combinations(range(m), r):
                    star, items = instance.star_for(v, subset)
                    opt = solver.solve(star).expected_value if items else 0.0
                    row = np.zeros(nv)
                    for u in subset:
                        row[u * n + v] = P[u, v] * W[u, v]
                    rows.append(row)
                    senses.append(lp.LE)
                    rhs.append(opt)
    return lp.LpProblem.make(c, np.vstack(rows), senses, rhs,
                             lb=np.zeros(nv), ub=np.ones(nv))


def benchmark_lp_value(instance, include_star_constraints=False, selector=None) -> float:
    sol = lp.solve(build_benchmark_lp(instance, include_star_constraints, selector))
    if sol.status != lp.OPTIMAL:
        raise StochmatchError(f"benchmark LP came back {sol.status}")
    return sol.objective


# ---------------------------------------------------------------------------
# Policy LP: column generation and full enumeration
# ---------------------------------------------------------------------------

@dataclass
class ProphetLpResult:
    """Optimal (or certified-stalled) solution of the policy LP.

    ``mixture`` carries, per type, the generated policies and their masses
    ``x_v(pi)``; ``w_star[u]`` is the LP-expected reward collected at
    offline vertex ``u``; ``kappa`` is the worst approximation factor among
    the pricing black boxes used (1 when all pricing was exact).
    """

    mixture: PolicyMixture
    objective: float
    w_star: np.ndarray
    status: str = "optimal"
    n_columns: int = 0
    kappa: float = 1.0


def _type_stars(instance: MatchingInstance):
    return [StarInstance(tuple(instance.weight(u, v) for u in range(instance.m)),
                         tuple(float(p) for p in instance.probs[:, v]),
                         instance.patience[v])
            for v in range(instance.n_types)]


def _assemble_result(instance, columns, x, objective, status, kappa) -> ProphetLpResult:
    n = instance.n_types
    q_v = instance.arrivals.expected_arrivals(n)
    per_type: list[list[tuple[Policy, float]]] = [[] for _ in range(n)]
    w_star = np.zeros(instance.m)
    for k, (v, policy, pvec) in enumerate(columns):
        mass = float(x[k])
        per_type[v].append((policy, mass))
        for u in range(instance.m):
            if pvec[u] > 0.0:
                w_star[u] += instance.weight(u, v) * pvec[u] * mass
    mixture = PolicyMixture(tuple(tuple(e) for e in per_type),
                            tuple(float(q) for q in q_v))
    return ProphetLpResult(mixture=mixture, objective=objective, w_star=w_star,
                           status=status, n_columns=len(columns), kappa=kappa)


def _master_problem(instance, columns, q_v) -> lp.LpProblem:
    m, n = instance.m, instance.n_types
    wmat = instance.weights_matrix()
    nv = len(columns)
    A = np.zeros((m + n, nv))
    c = np.zeros(nv)
    for k, (v, policy, pvec) in enumerate(columns):
        A[:m, k] = pvec
        A[m + v, k] = 1.0
        c[k] = float(pvec @ wmat[:, v])
    senses = [lp.LE] * m + [lp.EQ] * n
    b = np.concatenate([np.ones(m), q_v])
    return lp.LpProblem.make(c, A, senses, b)


def _solve_master(problem: lp.LpProblem) -> lp.LpSolution:
    sol = lp.solve(problem)
    if sol.status != lp.OPTIMAL:
        raise StochmatchError(f"policy-LP master came back {sol.status}")
    return sol


def solve_prophet_lp(instance: MatchingInstance,
                     solvers: dict[int, StarSolver] | StarSolver | None = None,
                     pricing_tol: float = PRICING_TOL,
                     column_cap: int = COLUMN_CAP) -> ProphetLpResult:
    """Solve the policy LP by column generation.

    The restricted master starts from the empty policy for every type.
    Each round reads the offline-row duals ``alpha_u`` and the per-type
    duals ``beta_v``, prices a best policy for adjusted weights
    ``w_uv - alpha_u`` through the type's star black box, and adds the
    column when its value exceeds ``beta_v`` by more than ``pricing_tol``.
    With exact pricing (deterministic or hazard patience) the final
    objective is the true LP optimum; with the 1/2-approximate LP-policy
    box the returned solution is feasible and the objective is the value
    at which approximate pricing certified no improvement.  Hitting the
    column cap returns the best feasible solution with status
    ``"column_cap"``.
    """
    if instance.arrivals.kind not in (PROPHET, IID):
        raise CapabilityError("the policy LP needs prophet or IID arrivals")
    m, n = instance.m, instance.n_types
    q_v = instance.arrivals.expected_arrivals(n)
    stars = _type_stars(instance)
    if isinstance(solvers, StarSolver):
        solvers = {v: solvers for v in range(n)}
    boxes = [(solvers or {}).get(v) or auto_solver(stars[v]) for v in range(n)]
    kappa = min((b.kappa for b in boxes), default=1.0)
    wmat = instance.weights_matrix()
    columns = [(v, EMPTY_POLICY, np.zeros(m)) for v in range(n)]
    seen = {(v, ()) for v in range(n)}
    master = _master_problem(instance, columns, q_v)
    status = "optimal"
    while True:
        sol = _solve_master(master)
        alpha = np.clip(sol.duals[:m], 0.0, None)
        beta = sol.duals[m: m + n]
        added = False
        for v in range(n):
            if q_v[v] <= 0.0:
                continue
            policy, value = price_policy(stars[v], wmat[:, v] - alpha, boxes[v])
            if value > beta[v] + pricing_tol and (v, policy.order) not in seen:
                pvec = policy_match_probabilities(stars[v], policy)
                col = np.concatenate([pvec, np.zeros(n)])
                col[m + v] = 1.0
                master = lp.add_column(master, float(pvec @ wmat[:, v]), col)
                columns.append((v, policy, pvec))
                seen.add((v, policy.order))
                added = True
        if not added:
            break
        if len(columns) > column_cap:
            status = "column_cap"
            break
    sol = _solve_master(master)
    return _assemble_result(instance, columns, sol.x, sol.objective, status, kappa)


def solve_prophet_lp_enumerated(instance: MatchingInstance,
                                max_policies: int = 100_000) -> ProphetLpResult:
    """Oracle route: materialize every policy per type and solve the full
    LP directly.  Only for instances whose policy set is small."""
    if instance.arrivals.kind not in (PROPHET, IID):
        raise CapabilityError("the policy LP needs prophet or IID arrivals")
    m, n = instance.m, instance.n_types
    q_v = instance.arrivals.expected_arrivals(n)
    stars = _type_stars(instance)
    columns = []
    for v in range(n):
        items = [u for u in range(m) if instance.probs[u, v] > 0.0]
        cap = _policy_length_cap(stars[v])
        for sub_policy in enumerate_policies(len(items), cap):
            policy = Policy(tuple(items[i] for i in sub_policy.order))
            columns.append((v, policy, policy_match_probabilities(stars[v], policy)))
            if len(columns) > max_policies:
                raise CapacityError(f"policy enumeration exceeded {max_policies}")
    sol = _solve_master(_master_problem(instance, columns, q_v))
    return _assemble_result(instance, columns, sol.x, sol.objective, "optimal", 1.0)


# ---------------------------------------------------------------------------
# Policy-LP driven online matchers (prophet / IID arrivals)
# ---------------------------------------------------------------------------

class PolicyLpMatcher(_TableCache):
    """Sample a policy per arrival from the LP mixture and walk it.

    ``skip=True`` is the edge-weighted prophet variant (entries with
    ``w_uv < w*_u / 2`` are skipped, spending no patience); ``skip=False``
    is the IID / vertex-weighted variant that never skips.  Matched
    vertices are probed in simulation; a simulated success abandons the
    arrival.  Residual mixture mass (LP tolerance) maps to the empty
    policy.
    """

    def __init__(self, lp_result: ProphetLpResult, skip: bool):
        self.lp_result = lp_result
        self.skip = skip
        self._step_cum_pair = None
        self._samplers: list[tuple[list[tuple[int, ...]], AliasSampler] | None] = []
        for v, entries in enumerate(lp_result.mixture.per_type):
            q = lp_result.mixture.q_v[v]
            policies = [pol.order for pol, _ in entries]
            masses = [max(mass, 0.0) for _, mass in entries]
            resid = q - sum(masses)
            if resid > 0.0:
                policies.append(())
                masses.append(resid)
            if q <= 0.0 or sum(masses) <= 0.0:
                self._samplers.append(None)
            else:
                self._samplers.append((policies, AliasSampler(masses)))

    def _step_cum(self, instance):
        pair = self._step_cum_pair
        if pair is not None and pair[0] is instance:
            return pair[1]
        arr = instance.arrivals
        if arr.kind == IID:
            cums = [np.cumsum(arr.step_probs(0)).tolist()] * arr.n_steps
        else:
            cums = [np.cumsum(arr.q_tv[t]).tolist() for t in range(arr.n_steps)]
        self._step_cum_pair = (instance, cums)
        return cums

    def __call__(self, instance: MatchingInstance, rng, trace: bool = False) -> MatcherState:
        arr = instance.arrivals
        if arr.kind not in (PROPHET, IID):
            raise CapabilityError("the policy matcher needs prophet or IID arrivals")
        tables = self._tables(instance)
        tape = rng if isinstance(rng, RandomTape) else RandomTape(rng)
        state = MatcherState(trace=[] if trace else None)
        step_cum = self._step_cum(instance)
        skip_of = self.lp_result.w_star if self.skip else None
        samplers = self._samplers
        for t in range(arr.n_steps):
            cum = step_cum[t]
            u_draw = tape.u()
            if u_draw >= cum[-1]:
                continue  # no arrival this step
            v = 0
            while cum[v] <= u_draw:
                v += 1
            sampler = samplers[v]
            if sampler is None:
                continue
            policies, alias = sampler
            order = policies[alias.sample(tape)]
            if order:
                _walk_policy(tables, state, t, v, order, tape, skip_half_of=skip_of)
        return state

    # -- exact expansion ---------------------------------------------------

    def _walk_outcomes(self, instance, v, policy: Policy, matched_mask: int):
        """Distribution of one arrival's outcome: {u: match prob}, rest is
        no-match (exhaust, balk, abandon, or empty policy)."""
        pat = instance.patience[v]
        skip_of = self.lp_result.w_star if self.skip else None
        match_p: dict[int, float] = {}
        if pat.is_hazard:
            rates = pat.hazard_rates(instance.m)
            reach = 1.0
            for u in policy.order:
                if skip_of is not None and instance.weight(u, v) < 0.5 * skip_of[u]:
                    continue
                p = float(instance.probs[u, v])
                if not (matched_mask >> u & 1):
                    match_p[u] = match_p.get(u, 0.0) + reach * p
                reach *= (1.0 - p) * (1.0 - rates[u])
        else:
            curve = pat.survival_curve(max(len(policy), 1))
            fail = 1.0
            k = 0
            for u in policy.order:
                if skip_of is not None and instance.weight(u, v) < 0.5 * skip_of[u]:
                    continue
                p = float(instance.probs[u, v])
                if not (matched_mask >> u & 1):
                    match_p[u] = match_p.get(u, 0.0) + curve[k] * fail * p
                fail *= 1.0 - p
                k += 1
        return match_p

    def exact_value(self, instance: MatchingInstance) -> float:
        arr = instance.arrivals
        if arr.kind not in (PROPHET, IID):
            raise CapabilityError("the policy matcher needs prophet or IID arrivals")
        m = instance.m
        if m > 16:
            raise CapacityError("exact expansion capped at 16 offline vertices")
        T = arr.n_steps
        memo: dict[tuple[int, int], float] = {}

        def go(t: int, matched_mask: int) -> float:
            if t == T:
                return 0.0
            key = (t, matched_mask)
            got = memo.get(key)
            if got is not None:
                return got
            probs_v = arr.step_probs(t)
            total = 0.0
            stay = 1.0
            for v in range(instance.n_types):
                qv_t = float(probs_v[v])
                if qv_t <= 0.0:
                    continue
                sampler = self._samplers[v]
                if sampler is None:
                    continue
                stay -= qv_t
                policies, alias = sampler
                q = self.lp_result.mixture.q_v[v]
                entries = list(self.lp_result.mixture.per_type[v])
                resid = q - sum(mass for _, mass in entries)
                if resid > 0.0:
                    entries.append((EMPTY_POLICY, resid))
                for policy, mass in entries:
                    pr_pol = mass / q
                    if pr_pol <= 0.0:
                        continue
                    match_p = self._walk_outcomes(instance, v, policy, matched_mask)
                    none = 1.0
                    sub = 0.0
                    for u, pu in match_p.items():
                        none -= pu
                        sub += pu * (instance.weight(u, v) + go(t + 1, matched_mask | (1 << u)))
                    sub += max(none, 0.0) * go(t + 1, matched_mask)
                    total += qv_t * pr_pol * sub
            total += max(stay, 0.0) * go(t + 1, matched_mask)
            memo[key] = total
            return total

        return go(0, 0)


def prophet_matcher(lp_result: ProphetLpResult) -> PolicyLpMatcher:
    """Edge-weighted prophet matcher (weight-skip rule active)."""
    return PolicyLpMatcher(lp_result, skip=True)


def iid_matcher(lp_result: ProphetLpResult) -> PolicyLpMatcher:
    """IID / vertex-weighted matcher (no skipping)."""
    return PolicyLpMatcher(lp_result, skip=False)
