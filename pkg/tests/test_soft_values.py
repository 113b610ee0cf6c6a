import math

import numpy as np
import pytest

from helpers import random_mdp
from softpg.envs import TabularMdp, chain3
from softpg.errors import IterationLimitError
from softpg.soft_values import (TabularPolicy, discounted_occupancy, entropy,
                                exhaustive_soft_optimum, fd_soft_gradient, log_softmax,
                                scheme_equivalence_check, soft_objective, soft_objective_batch,
                                soft_policy_evaluation, softmax, spgt_gradient,
                                standard_policy_evaluation)


def one_state(n_actions: int, reward: float, gamma: float) -> TabularMdp:
    P = np.ones((1, n_actions, 1))
    return TabularMdp(P, np.full_like(P, reward), gamma, np.ones(1))


def test_geometric_series():
    sv = soft_policy_evaluation(one_state(1, 1.0, 0.5), np.ones((1, 1)), 0.3)
    assert sv.v[0] == pytest.approx(2.0, abs=1e-11)


def test_entropy_bonus_geometric_series():
    sv = soft_policy_evaluation(one_state(2, 0.0, 0.5), TabularPolicy.uniform(1, 2), 1.0)
    assert sv.v[0] == pytest.approx(2 * math.log(2), abs=1e-11)
    assert sv.v[0] == pytest.approx(1.386294, abs=1e-6)


def test_alpha_zero_matches_linear_solve():
    rng = np.random.default_rng(0)
    for _ in range(10):
        mdp = random_mdp(rng)
        pi = TabularPolicy.from_logits(rng.normal(size=(mdp.n_states, mdp.n_actions)))
        sv = soft_policy_evaluation(mdp, pi, 0.0)
        v, q = standard_policy_evaluation(mdp, pi)
        np.testing.assert_allclose(sv.v, v, rtol=0, atol=1e-10)
        np.testing.assert_allclose(sv.q, q, rtol=0, atol=1e-10)


def test_soft_values_match_linear_solve_with_entropy():
    # the entropy bonus is just a per-state reward, so an augmented linear solve agrees
    rng = np.random.default_rng(1)
    mdp = random_mdp(rng, 4, 3, 0.9)
    pi = TabularPolicy.from_logits(rng.normal(size=(4, 3)))
    alpha = 0.7
    aug = TabularMdp(mdp.P, mdp.R + alpha * entropy(pi.probs)[:, None, None], mdp.gamma, mdp.p0)
    v, _ = standard_policy_evaluation(aug, pi)
    np.testing.assert_allclose(soft_policy_evaluation(mdp, pi, alpha).v, v, atol=1e-10)


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        soft_policy_evaluation(chain3(), TabularPolicy.uniform(3, 2), -0.1)


def test_sweep_limit():
    with pytest.raises(IterationLimitError):
        soft_policy_evaluation(chain3(), TabularPolicy.uniform(3, 2), 0.1, max_sweeps=3)


def test_objective_point_mass_and_reward_free():
    mdp = chain3()
    pi = TabularPolicy.uniform(3, 2)
    assert soft_objective(mdp, pi, 0.2) == soft_policy_evaluation(mdp, pi, 0.2).v[0]
    free = TabularMdp(mdp.P, np.zeros_like(mdp.R), mdp.gamma, mdp.p0)
    assert soft_objective(free, pi, 0.0) == 0.0


def test_objective_matches_monte_carlo():
    mdp, alpha, n, horizon = chain3(), 0.5, 1_000_000, 250
    rng = np.random.default_rng(2)
    cdf = np.cumsum(mdp.P, axis=2)
    bonus = alpha * math.log(2)
    s = np.zeros(n, dtype=np.int64)
    ret = np.zeros(n)
    disc = 1.0
    for _ in range(horizon):
        a = rng.integers(0, 2, n)
        s2 = np.minimum((rng.random(n)[:, None] >= cdf[s, a]).sum(axis=1), 2)
        ret += disc * (mdp.R[s, a, s2] + bonus)
        s = s2
        disc *= mdp.gamma
    se = ret.std(ddof=1) / math.sqrt(n)
    exact = soft_objective(mdp, TabularPolicy.uniform(3, 2), alpha)
    assert abs(ret.mean() - exact) < 3 * se


def test_occupancy_sums_to_effective_horizon():
    mdp = random_mdp(np.random.default_rng(3), 5, 2, 0.8)
    d = discounted_occupancy(mdp, TabularPolicy.uniform(5, 2))
    assert d.sum() == pytest.approx(5.0, rel=1e-12)
    assert np.all(d >= 0)


def test_alpha_zero_gradient_is_classic_policy_gradient():
    mdp = chain3()
    logits = np.array([[0.3, -0.2], [0.1, 0.5], [-0.4, 0.0]])
    g = spgt_gradient(mdp, logits, 0.0)
    np.testing.assert_allclose(g, fd_soft_gradient(mdp, logits, 0.0), rtol=0, atol=1e-8)
    # classic form: d(s) pi(a|s) A(s, a) for softmax logits
    pi = TabularPolicy.from_logits(logits)
    v, q = standard_policy_evaluation(mdp, pi)
    classic = discounted_occupancy(mdp, pi)[:, None] * pi.probs * (q - v[:, None])
    np.testing.assert_allclose(g, classic, atol=1e-12)


def test_gradient_forms_on_random_problem():
    rng = np.random.default_rng(4)
    mdp = random_mdp(rng, 4, 3, 0.9)
    logits = rng.normal(size=(4, 3))
    a = spgt_gradient(mdp, logits, 0.7, "logpi")
    b = spgt_gradient(mdp, logits, 0.7, "entropy")
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    fd = fd_soft_gradient(mdp, logits, 0.7)
    assert np.max(np.abs(a - fd)) / np.max(np.abs(fd)) < 1e-6


def test_unknown_form():
    with pytest.raises(ValueError):
        spgt_gradient(chain3(), np.zeros((3, 2)), 0.1, "nope")


def test_monte_carlo_forms_match_exact():
    rng = np.random.default_rng(5)
    rep = scheme_equivalence_check(chain3(), np.array([[0.2, -0.3], [0.0, 0.4], [0.5, 0.1]]),
                                   0.5, 100_000, rng)
    assert rep.forms_agree() and rep.matches_exact()


def test_softmax_helpers():
    z = np.array([[1000.0, 0.0], [0.0, 0.0]])
    np.testing.assert_allclose(softmax(z), [[1.0, 0.0], [0.5, 0.5]])
    np.testing.assert_allclose(log_softmax(z)[1], [-math.log(2)] * 2)
    np.testing.assert_allclose(entropy(np.array([[1.0, 0.0]])), [0.0])


def test_batched_objective_matches_single():
    rng = np.random.default_rng(6)
    mdp = random_mdp(rng, 3, 2, 0.8)
    probs = softmax(rng.normal(size=(5, 3, 2)))
    batch = soft_objective_batch(mdp, probs, 0.3)
    single = [soft_objective(mdp, TabularPolicy(p), 0.3) for p in probs]
    np.testing.assert_allclose(batch, single, atol=1e-11)


def test_exhaustive_optimum_matches_soft_value_iteration():
    mdp, alpha = chain3(), 0.1
    j_grid, _ = exhaustive_soft_optimum(mdp, alpha)
    v = np.zeros(3)
    for _ in range(3000):
        q = mdp.expected_reward + mdp.gamma * (mdp.P @ v)
        m = q.max(axis=1)
        v = m + alpha * np.log(np.exp((q - m[:, None]) / alpha).sum(axis=1))
    assert j_grid <= v[0] + 1e-9
    assert j_grid == pytest.approx(v[0], rel=1e-5)


def test_exhaustive_search_requires_two_actions():
    with pytest.raises(ValueError):
        exhaustive_soft_optimum(random_mdp(np.random.default_rng(0), 2, 3), 0.1)
