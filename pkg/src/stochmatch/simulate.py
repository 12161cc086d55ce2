"""Seeded Monte Carlo engine, exact evaluators, and the offline oracle.

Trial ``i`` of a run draws its randomness from a counter-based Philox
stream keyed by ``(master seed, i)``, so every trial is a pure function of
the config and trials may run in any order or in parallel without changing
results.  Means use numpy's pairwise summation, which is order-independent
for a fixed trial array.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .instances import (
    ADVERSARIAL,
    CapabilityError,
    CapacityError,
    MatchingInstance,
    Policy,
    StarInstance,
    StochmatchError,
)
from .matching import RandomTape
from .stars import RandomizedStarPolicy, eval_policy_exact, eval_randomized_exact

LOW_TRIAL_WARNING = 1000
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    seed: int
    trials: int
    confidence: float = 0.999

    def __post_init__(self):
        if self.trials < 1:
            raise StochmatchError("trials must be >= 1")


@dataclass
class SimReport:
    mean: float
    stddev: float
    half_width: float
    match_freq: np.ndarray
    trials: int
    confidence: float
    low_trial_count: bool

    def csv_fields(self):
        return {"trials": self.trials, "mean": repr(self.mean),
                "stddev": repr(self.stddev), "ci": repr(self.half_width)}


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """The deterministic stream for one trial: Philox keyed by (seed, trial)."""
    key = np.array([seed & _MASK64, trial & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _run_range(instance, matcher, seed, start, stop, m):
    weights = np.empty(stop - start)
    counts = np.zeros(m)
    for i in range(start, stop):
        tape = RandomTape(trial_generator(seed, i))
        try:
            state = matcher(instance, tape)
        except Exception as e:
            raise StochmatchError(f"matcher failed at trial {i}: {e}") from e
        weights[i - start] = state.total_weight
        for u in state.matched:
            counts[u] += 1.0
    return weights, counts


def simulate(instance, matcher, config: SimConfig, threads: int | None = None) -> SimReport:
    """Seeded Monte Carlo estimate of the matcher's expected matched weight.

    ``threads`` > 1 splits the trial range over worker processes; the
    report is bit-identical to a serial run because each trial's stream
    depends only on (seed, trial index).  A value of ``None`` reads the
    ``STOCHMATCH_THREADS`` variable, defaulting to 1.
    """
    if threads is None:
        threads = int(os.environ.get("STOCHMATCH_THREADS", "1"))
    m = instance.m if isinstance(instance, MatchingInstance) else getattr(instance, "n", 0)
    trials = config.trials
    if threads > 1 and trials >= 4 * threads:
        bounds = np.linspace(0, trials, threads + 1, dtype=int)
        chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_range,
                                  *zip(*[(instance, matcher, config.seed, a, b, m)
                                         for a, b in chunks])))
        weights = np.concatenate([p[0] for p in parts])
        counts = np.sum([p[1] for p in parts], axis=0)
    else:
        weights, counts = _run_range(instance, matcher, config.seed, 0, trials, m)
    mean = float(np.mean(weights))
    stddev = float(np.std(weights, ddof=1)) if trials > 1 else 0.0
    z = float(ndtri(1.0 - (1.0 - config.confidence) / 2.0))
    half_width = z * stddev / np.sqrt(trials)
    return SimReport(mean=mean, stddev=stddev, half_width=half_width,
                     match_freq=counts / trials, trials=trials,
                     confidence=config.confidence,
                     low_trial_count=trials < LOW_TRIAL_WARNING)


# ---------------------------------------------------------------------------
# Exact evaluation
# ---------------------------------------------------------------------------

def exact_expected_value(instance, matcher) -> float:
    """Exact expected matched weight of a matcher whose behavior admits a
    full outcome expansion (all matchers in this package do, on small
    instances).  For a star instance the "matcher" may also be a fixed
    ``Policy`` or a ``RandomizedStarPolicy``."""
    if isinstance(instance, StarInstance):
        if isinstance(matcher, RandomizedStarPolicy):
            return eval_randomized_exact(instance, matcher)
        if isinstance(matcher, Policy):
            return eval_policy_exact(instance, matcher)
        raise StochmatchError("star instances take a Policy or RandomizedStarPolicy")
    exact = getattr(matcher, "exact_value", None)
    if exact is None:
        raise StochmatchError(f"{type(matcher).__name__} has no exact expansion")
    return exact(instance)


# ---------------------------------------------------------------------------
# Offline adaptive optimum (tiny instances)
# ---------------------------------------------------------------------------

OFFLINE_OPT_STATE_CAP = 2_000_000


def brute_force_offline_opt(instance: MatchingInstance) -> float:
    """Exact optimal expected weight of an offline adaptive prober.

    The offline algorithm sees the whole graph and may interleave probes
    across online vertices in any order (so the arrival order is
    irrelevant); it still obeys probe-commit, per-vertex patience, and
    never re-probes an edge.  State: available offline set, and per online
    vertex its remaining patience and the set of edges already probed.
    Deterministic patience and tiny instances only.
    """
    if instance.arrivals.kind != ADVERSARIAL:
        raise CapabilityError("the offline oracle is defined for adversarial instances")
    if not all(p.is_deterministic for p in instance.patience):
        raise CapabilityError("the offline oracle needs deterministic patience")
    m, n = instance.m, instance.n_types
    probs = instance.probs
    thetas = [min(p.theta, m) for p in instance.patience]
    memo: dict = {}

    def go(avail: int, states: tuple) -> float:
        key = (avail, states)
        got = memo.get(key)
        if got is not None:
            return got
        if len(memo) > OFFLINE_OPT_STATE_CAP:
            raise CapacityError("offline oracle state space exceeded its cap")
        best = 0.0
        for v, (rem, probed) in enumerate(states):
            if rem <= 0:
                continue
            for u in range(m):
                if not (avail >> u & 1) or (probed >> u & 1):
                    continue
                p = float(probs[u, v])
                if p <= 0.0:
                    continue
                new_avail = avail & ~(1 << u)
                succ = tuple(
                    (0 if vv == v else r2, p2 & new_avail)
                    for vv, (r2, p2) in enumerate(states))
                fail = tuple(
                    (rem - 1 if vv == v else r2,
                     (probed | (1 << u)) if vv == v else p2)
                    for vv, (r2, p2) in enumerate(states))
                val = (p * (instance.weight(u, v) + go(new_avail, succ))
                       + (1.0 - p) * go(avail, fail))
                if val > best:
                    best = val
        memo[key] = best
        return best

    start = tuple((thetas[v], 0) for v in range(n))
    return go((1 << m) - 1, start)


# ---------------------------------------------------------------------------
# Ratios against benchmarks
# ---------------------------------------------------------------------------

@dataclass
class RatioReport:
    ratio: float
    half_width: float
    benchmark_name: str
    benchmark_value: float
    sim: SimReport


def empirical_ratio(instance, matcher, benchmark, config: SimConfig,
                    threads: int | None = None) -> RatioReport:
    """Simulated mean over a benchmark value, with the confidence
    half-width propagated through the division.

    ``benchmark`` is one of ``"lp2"`` (edge-probe LP with star-cap rows),
    ``"lp6"`` (plain edge-probe LP), ``"lpp"`` (policy LP), and
    ``"offline-opt"`` (tiny-instance oracle), or an already-computed
    ``(name, value)`` pair.
    """
    from . import matching

    if isinstance(benchmark, tuple):
        name, value = benchmark
    else:
        name = benchmark
        if benchmark == "lp2":
            value = matching.benchmark_lp_value(instance, include_star_constraints=True)
        elif benchmark == "lp6":
            value = matching.benchmark_lp_value(instance, include_star_constraints=False)
        elif benchmark == "lpp":
            value = matching.solve_prophet_lp(instance).objective
        elif benchmark == "offline-opt":
            value = brute_force_offline_opt(instance)
        else:
            raise StochmatchError(f"unknown benchmark {benchmark!r}")
    if value <= 0.0:
        raise StochmatchError("benchmark value must be positive for a ratio")
    report = simulate(instance, matcher, config, threads=threads)
    return RatioReport(ratio=report.mean / value,
                       half_width=report.half_width / value,
                       benchmark_name=name, benchmark_value=value, sim=report)
