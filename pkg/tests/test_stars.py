import numpy as np
import pytest

from stochmatch import hard_instances as hard
from stochmatch import lp
from stochmatch.instances import (
    CapacityError,
    PatienceModel,
    PatienceVariantError,
    Policy,
    StarInstance,
)
from stochmatch.stars import (
    RandomizedStarPolicy,
    brute_force_optimal,
    build_arbitrary_patience_lp,
    enumerate_policies,
    eval_policy_exact,
    eval_randomized_exact,
    policy_match_probabilities,
    price_policy,
    randomized_match_probabilities,
    solve_arbitrary_patience,
    solve_constant_hazard,
    solve_deterministic_patience,
    solver_by_name,
)

HAZARD_PAIR = StarInstance.make([10.0, 6.0], [0.5, 0.9],
                                PatienceModel.constant_hazard(rates=[0.2, 0.1]))


# ---------------------------------------------------------------------------
# eval_policy_exact
# ---------------------------------------------------------------------------

def test_eval_certain_single_item():
    star = StarInstance.make([1.0], [1.0], PatienceModel.deterministic(1))
    assert eval_policy_exact(star, Policy.of(0)) == 1.0


def test_eval_hazard_pair_hand_expansion():
    assert eval_policy_exact(HAZARD_PAIR, Policy.of(0, 1)) == pytest.approx(7.16, abs=1e-12)
    assert eval_policy_exact(HAZARD_PAIR, Policy.of(1, 0)) == pytest.approx(5.85, abs=1e-12)


def test_eval_hazard_matches_monte_carlo():
    rng = np.random.default_rng(0)
    n_trials = 200_000
    total = 0.0
    w, p, r = (10.0, 6.0), (0.5, 0.9), (0.2, 0.1)
    for _ in range(n_trials):
        for i in (0, 1):
            if rng.random() < p[i]:
                total += w[i]
                break
            if rng.random() < r[i]:
                break
    mc = total / n_trials
    assert abs(mc - 7.16) < 4 * 8.0 / np.sqrt(n_trials)


def test_eval_head_probe_of_clairvoyance_gap_star():
    star = hard.gen_unknown_patience(2, 3)
    assert eval_policy_exact(star, Policy.of(0)) == 1.0


def test_eval_permutation_covariance():
    rng = np.random.default_rng(3)
    for _ in range(30):
        n = int(rng.integers(1, 6))
        star = hard.gen_random_star(int(rng.integers(10**6)), n, "survival")
        perm = rng.permutation(n)
        relabeled = StarInstance.make([star.weights[perm[i]] for i in range(n)],
                                      [star.probs[perm[i]] for i in range(n)],
                                      star.patience)
        k = int(rng.integers(0, n + 1))
        policy = Policy(tuple(int(i) for i in rng.permutation(n)[:k]))
        inv = np.argsort(perm)
        mapped = Policy(tuple(int(inv[i]) for i in policy.order))
        assert eval_policy_exact(star, policy) == pytest.approx(
            eval_policy_exact(relabeled, mapped), abs=1e-12)


def test_global_hazard_equals_geometric_survival_eval():
    # the balk-coin form and the survival-curve form price a policy identically
    rng = np.random.default_rng(9)
    for _ in range(25):
        n = int(rng.integers(1, 7))
        r = float(rng.random())
        w, p = rng.random(n) * 2, rng.random(n)
        haz = StarInstance.make(w, p, PatienceModel.constant_hazard(rate=r))
        q = (1 - r) ** np.arange(n)
        surv = StarInstance.make(w, p, PatienceModel.survival(q / max(q[0], 1.0)))
        policy = Policy(tuple(int(i) for i in rng.permutation(n)))
        assert eval_policy_exact(haz, policy) == pytest.approx(
            eval_policy_exact(surv, policy), abs=1e-10)


# ---------------------------------------------------------------------------
# deterministic-patience DP
# ---------------------------------------------------------------------------

def test_dp_examples():
    star = StarInstance.make([3.0, 2.0], [0.5, 1.0], PatienceModel.deterministic(1))
    res = solve_deterministic_patience(star)
    assert res.policy.order == (1,)
    assert res.expected_value == pytest.approx(2.0)
    star2 = StarInstance.make([3.0, 2.0], [0.5, 1.0], PatienceModel.deterministic(2))
    res2 = solve_deterministic_patience(star2)
    assert res2.policy.order == (0, 1)
    assert res2.expected_value == pytest.approx(2.5)


def test_dp_zero_patience():
    star = StarInstance.make([3.0], [0.5], PatienceModel.deterministic(0))
    res = solve_deterministic_patience(star)
    assert res.policy.order == ()
    assert res.expected_value == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_dp_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    for _ in range(60):
        n = int(rng.integers(1, 7))
        star = StarInstance.make(rng.random(n) * 3, rng.random(n),
                                 PatienceModel.deterministic(int(rng.integers(0, n + 1))))
        assert solve_deterministic_patience(star).expected_value == pytest.approx(
            brute_force_optimal(star).expected_value, abs=1e-10)


# ---------------------------------------------------------------------------
# constant-hazard index rule
# ---------------------------------------------------------------------------

def test_hazard_solver_examples():
    res = solve_constant_hazard(HAZARD_PAIR)
    assert res.policy.order == (0, 1)
    assert res.expected_value == pytest.approx(7.16, abs=1e-12)
    single = StarInstance.make([5.0], [0.4], PatienceModel.constant_hazard(rate=0.7))
    res = solve_constant_hazard(single)
    assert res.policy.order == (0,)
    assert res.expected_value == pytest.approx(2.0)


def test_hazard_all_rates_one_reduces_to_best_single_probe():
    star = StarInstance.make([4.0, 3.0, 10.0], [0.5, 0.9, 0.3],
                             PatienceModel.constant_hazard(rates=[1.0, 1.0, 1.0]))
    res = solve_constant_hazard(star)
    assert res.policy.order[0] == 2  # argmax w*p = 3.0
    assert res.expected_value == pytest.approx(
        brute_force_optimal(star).expected_value, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_hazard_matches_brute_force(seed):
    rng = np.random.default_rng(50 + seed)
    for _ in range(60):
        n = int(rng.integers(1, 7))
        if rng.random() < 0.5:
            pat = PatienceModel.constant_hazard(rates=rng.random(n))
        else:
            pat = PatienceModel.constant_hazard(rate=float(rng.random()))
        star = StarInstance.make(rng.random(n) * 3, rng.random(n), pat)
        assert solve_constant_hazard(star).expected_value == pytest.approx(
            brute_force_optimal(star).expected_value, abs=1e-10)


def test_adjacent_swap_toward_index_order_never_helps():
    rng = np.random.default_rng(77)
    for _ in range(50):
        n = int(rng.integers(2, 7))
        star = hard.gen_random_star(int(rng.integers(10**6)), n, "hazard")
        q = np.asarray(star.probs) + (1 - np.asarray(star.probs)) * star.patience.hazard_rates(n)
        score = np.asarray(star.weights) * np.asarray(star.probs) / np.maximum(q, 1e-300)
        order = list(rng.permutation(n))
        for k in range(n - 1):
            a, b = order[k], order[k + 1]
            if score[a] < score[b]:  # violates the index rule
                swapped = order[:k] + [b, a] + order[k + 2:]
                assert eval_policy_exact(star, Policy(tuple(swapped))) >= \
                    eval_policy_exact(star, Policy(tuple(order))) - 1e-12


# ---------------------------------------------------------------------------
# attempt-indexed LP and the randomized policy
# ---------------------------------------------------------------------------

def test_lp_single_attempt():
    star = StarInstance.make([2.0], [0.7], PatienceModel.survival([1.0]))
    sol = lp.solve(build_arbitrary_patience_lp(star))
    assert sol.objective == pytest.approx(1.4, abs=1e-9)


def test_lp_zero_survival_tail_reduces_to_one_attempt():
    star = StarInstance.make([2.0, 1.0, 3.0], [0.7, 0.3, 0.2],
                             PatienceModel.survival([1.0, 0.0, 0.0]))
    sol = lp.solve(build_arbitrary_patience_lp(star))
    # one fractional probe: best single-attempt value max over j of ... is a
    # budget of one attempt split arbitrarily; LP optimum is max_j w_j p_j
    assert sol.objective == pytest.approx(1.4, abs=1e-9)


def test_tight_example_stated_solution_and_solver_guarantee():
    for eps in (0.1, 0.01, 0.001):
        star = hard.gen_tight_example(eps)
        res = solve_arbitrary_patience(star)
        assert res.benchmark == pytest.approx(eps, abs=1e-8)
        stated = hard.tight_example_solution(eps)
        value = eval_randomized_exact(star, stated)
        assert value == pytest.approx(eps / (2 * (1 - eps)), abs=1e-10)
        # solver's own vertex also honors the guarantee
        assert res.expected_value >= 0.5 * res.benchmark - 1e-9
    assert eval_randomized_exact(hard.gen_tight_example(0.1),
                                 hard.tight_example_solution(0.1)) == pytest.approx(1 / 18, abs=1e-10)


def test_randomized_policy_row_invariants():
    rng = np.random.default_rng(1)
    for _ in range(40):
        n = int(rng.integers(1, 7))
        star = hard.gen_random_star(int(rng.integers(10**6)), n, "survival")
        res = solve_arbitrary_patience(star)
        rsp = res.policy
        sums = rsp.attempt_probs.sum(axis=1)
        assert np.all(sums <= 1 + 1e-9)
        # suffix mass per item never exceeds the survival value
        x = rsp.attempt_probs * rsp.survival[:, None]
        for t in range(n):
            if rsp.survival[t] <= 1e-9:
                assert np.all(rsp.attempt_probs[t] == 0.0)
                continue
            suffix = x[t:, :].sum(axis=0)
            assert np.all(suffix <= rsp.survival[t] + 1e-7)


def test_one_shot_randomized_policy():
    star = StarInstance.make([2.0, 5.0], [0.5, 0.1], PatienceModel.survival([1.0, 0.8]))
    rows = np.zeros((2, 2))
    rows[0, 0] = 1.0
    rsp = RandomizedStarPolicy(rows, np.array([1.0, 0.0]), 1.0)
    assert eval_randomized_exact(star, rsp) == pytest.approx(1.0)
    probs = randomized_match_probabilities(star, rsp)
    assert probs[0] == pytest.approx(0.5)
    assert probs[1] == 0.0


def test_eval_randomized_matches_per_item_decomposition():
    rng = np.random.default_rng(8)
    for _ in range(25):
        n = int(rng.integers(1, 6))
        star = hard.gen_random_star(int(rng.integers(10**6)), n, "survival")
        res = solve_arbitrary_patience(star)
        per_item = randomized_match_probabilities(star, res.policy)
        assert float(per_item @ np.asarray(star.weights)) == pytest.approx(
            res.expected_value, abs=1e-10)
        assert per_item.sum() <= 1 + 1e-9


def test_deterministic_patience_through_lp_path():
    rng = np.random.default_rng(21)
    for _ in range(25):
        n = int(rng.integers(1, 7))
        theta = int(rng.integers(0, n + 1))
        star = StarInstance.make(rng.random(n) * 2, rng.random(n),
                                 PatienceModel.deterministic(theta))
        res = solve_arbitrary_patience(star)
        exact = solve_deterministic_patience(star).expected_value
        assert res.benchmark >= exact - 1e-8
        assert res.expected_value >= 0.5 * res.benchmark - 1e-9


def test_lp_path_rejects_per_item_hazard():
    star = StarInstance.make([1.0, 1.0], [0.5, 0.5],
                             PatienceModel.constant_hazard(rates=[0.1, 0.2]))
    with pytest.raises(PatienceVariantError):
        solve_arbitrary_patience(star)


def test_eval_randomized_capacity_cap():
    n = 16
    star = StarInstance.make([1.0] * n, [0.5] * n,
                             PatienceModel.survival([1.0] + [0.5] * (n - 1)))
    rsp = RandomizedStarPolicy(np.zeros((n, n)), np.zeros(n), 0.0)
    with pytest.raises(CapacityError):
        eval_randomized_exact(star, rsp)


# ---------------------------------------------------------------------------
# brute force and enumeration
# ---------------------------------------------------------------------------

def test_brute_force_single_item_and_cap():
    star = StarInstance.make([2.0], [0.5], PatienceModel.deterministic(1))
    assert brute_force_optimal(star).expected_value == pytest.approx(1.0)
    big = StarInstance.make([1.0] * 8, [0.5] * 8, PatienceModel.deterministic(2))
    with pytest.raises(CapacityError):
        brute_force_optimal(big)


def test_enumerate_policies_count():
    # lengths 0..2 over 3 items: 1 + 3 + 6
    assert sum(1 for _ in enumerate_policies(3, 2)) == 10


def test_lp_upper_bounds_brute_force():
    rng = np.random.default_rng(31)
    for _ in range(40):
        n = int(rng.integers(1, 7))
        star = hard.gen_random_star(int(rng.integers(10**6)), n, "survival")
        sol = lp.solve(build_arbitrary_patience_lp(star))
        assert sol.objective >= brute_force_optimal(star).expected_value - 1e-8


# ---------------------------------------------------------------------------
# pricing and match probabilities
# ---------------------------------------------------------------------------

def test_match_probabilities_examples():
    star = StarInstance.make([1.0], [0.3], PatienceModel.deterministic(1))
    assert policy_match_probabilities(star, Policy.of(0))[0] == pytest.approx(0.3)
    star2 = StarInstance.make([1.0, 1.0], [0.5, 0.5], PatienceModel.deterministic(2))
    probs = policy_match_probabilities(star2, Policy.of(0, 1))
    assert np.allclose(probs, [0.5, 0.25])


def test_match_probabilities_total_mass_at_most_one():
    rng = np.random.default_rng(4)
    for _ in range(40):
        n = int(rng.integers(1, 7))
        kind = ("survival", "deterministic", "hazard")[int(rng.integers(0, 3))]
        star = hard.gen_random_star(int(rng.integers(10**6)), n, kind)
        k = int(rng.integers(0, n + 1))
        policy = Policy(tuple(int(i) for i in rng.permutation(n)[:k]))
        assert policy_match_probabilities(star, policy).sum() <= 1 + 1e-9


def test_price_policy_drops_nonpositive_and_matches_brute():
    star = StarInstance.make([3.0, 2.0, 1.0], [0.5, 0.6, 0.7],
                             PatienceModel.deterministic(2))
    pol, val = price_policy(star, [-1.0, -2.0, 0.0], solver_by_name("dp"))
    assert pol.order == () and val == 0.0
    # identity adjustment reproduces the plain solver's value
    pol, val = price_policy(star, list(star.weights), solver_by_name("dp"))
    assert val == pytest.approx(solve_deterministic_patience(star).expected_value)
    # one negative weight: equals brute force over the two positive items
    adjusted = [1.5, -0.5, 0.9]
    pol, val = price_policy(star, adjusted, solver_by_name("brute"))
    sub = StarInstance.make([1.5, 0.9], [0.5, 0.7], PatienceModel.deterministic(2))
    assert val == pytest.approx(brute_force_optimal(sub).expected_value, abs=1e-12)
    assert all(u in (0, 2) for u in pol.order)


def test_wrong_variant_errors():
    star = StarInstance.make([1.0], [0.5], PatienceModel.survival([1.0]))
    with pytest.raises(PatienceVariantError):
        solve_deterministic_patience(star)
    with pytest.raises(PatienceVariantError):
        solve_constant_hazard(star)
