import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from softpg.diffnet import grad_check
from softpg.policies import (CategoricalHead, GaussianHead, SigmaScheme, gaussian_kl)


def affine_gaussian(mu: float, sigma: float, **kw) -> GaussianHead:
    """1-D head with a constant mean ``mu`` and global sigma ``sigma``."""
    head = GaussianHead(1, 1, hidden=(), rng=None, **kw)
    head.net.weights[0][...] = 0.0
    head.net.biases[0][:1] = mu
    head.log_std_global[...] = math.log(sigma)
    return head


def test_zero_noise_sample_is_the_mean():
    head = affine_gaussian(0.7, 1.3)
    assert head.rsample(np.zeros(1), np.zeros(1))[0] == 0.7


def test_affine_reparametrisation():
    head = affine_gaussian(2.0, 0.5)
    assert head.rsample(np.zeros(1), np.ones(1))[0] == 2.5


def test_standard_normal_log_density_at_zero():
    head = affine_gaussian(0.0, 1.0)
    assert head.log_prob(np.zeros(1), np.zeros(1)) == pytest.approx(-0.918939, abs=1e-6)


def test_gaussian_log_density_closed_form():
    head = affine_gaussian(0.0, 2.0)
    lp = head.log_prob(np.zeros(1), np.array([2.0]))
    assert lp == pytest.approx(-0.5 * math.log(2 * math.pi * 4) - 0.5, abs=1e-12)
    assert lp == pytest.approx(-2.112086, abs=1e-6)


def test_unit_gaussian_entropy():
    head = affine_gaussian(0.3, 1.0)
    assert head.entropy(np.zeros(1)) == pytest.approx(1.418939, abs=1e-6)


def test_log_prob_matches_scipy():
    rng = np.random.default_rng(0)
    head = GaussianHead(3, 2, (8,), rng=rng)
    head.params[...] += 0.2 * rng.standard_normal(head.num_params)
    obs = rng.standard_normal((5, 3))
    act = rng.standard_normal((5, 2))
    mean, log_std = head.mean_log_std(obs)
    ref = stats.norm.logpdf(act, mean, np.exp(log_std)).sum(axis=1)
    np.testing.assert_allclose(head.log_prob(obs, act), ref, rtol=1e-12)


def test_squashed_density_integrates_to_one():
    head = affine_gaussian(0.4, 0.8, squash=True, low=-2.0, high=2.0)
    dens = lambda a: math.exp(head.log_prob(np.zeros(1), np.array([a])))  # noqa: E731
    total, _ = integrate.quad(dens, -2.0, 2.0, limit=200)
    assert total == pytest.approx(1.0, abs=1e-7)


def test_squashed_log_prob_matches_rsample_log_prob():
    rng = np.random.default_rng(1)
    head = GaussianHead(3, 2, (5,), rng=rng, squash=True, low=-2.0, high=2.0)
    obs = rng.standard_normal((6, 3))
    eps = 0.5 * rng.standard_normal((6, 2))
    act, lp, _ = head.rsample_full(obs, eps)
    np.testing.assert_allclose(head.log_prob(obs, act), lp, atol=1e-8)


def test_monte_carlo_entropy():
    rng = np.random.default_rng(2)
    head = affine_gaussian(-1.0, 0.3)
    _, lp = head.sample(np.zeros((1_000_000, 1)), rng)
    est, se = -lp.mean(), lp.std() / math.sqrt(lp.size)
    assert abs(est - head.entropy(np.zeros(1))) < 3 * se


def test_categorical_uniform_log_prob():
    head = CategoricalHead(2, 4, hidden=())
    for a in range(4):
        assert head.log_prob(np.ones(2), a) == pytest.approx(-math.log(4), abs=1e-12)
    assert head.entropy(np.ones(2)) == pytest.approx(math.log(4), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**20))
def test_categorical_probs_normalised(seed):
    rng = np.random.default_rng(seed)
    head = CategoricalHead(3, 5, (4,), rng=rng)
    head.params[...] = 5.0 * rng.standard_normal(head.num_params)
    p = head.probs(rng.standard_normal((7, 3)))
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_degenerate_categorical_entropy():
    head = CategoricalHead(1, 3, hidden=())
    head.net.biases[0][...] = [50.0, 0.0, 0.0]
    assert head.entropy(np.zeros(1)) < 1e-12


def test_categorical_monte_carlo_entropy():
    rng = np.random.default_rng(8)
    head = CategoricalHead(1, 4, hidden=())
    head.net.biases[0][...] = [0.5, -1.0, 2.0, 0.0]
    _, lp = head.sample(np.zeros((1_000_000, 1)), rng)
    se = lp.std() / math.sqrt(lp.size)
    assert abs(-lp.mean() - head.entropy(np.zeros(1))) < 3 * se


@settings(max_examples=50, deadline=None)
@given(logits=st.lists(st.floats(-30, 30), min_size=2, max_size=8))
def test_softmax_normalisation_for_wide_logits(logits):
    head = CategoricalHead(1, len(logits), hidden=())
    head.net.biases[0][...] = logits
    assert abs(head.probs(np.zeros(1)).sum() - 1.0) <= 1e-12


def test_categorical_sampling_frequencies():
    rng = np.random.default_rng(3)
    head = CategoricalHead(1, 3, hidden=())
    head.net.biases[0][...] = [0.0, 1.0, -1.0]
    p = head.probs(np.zeros(1))
    acts, _ = head.sample(np.zeros((60_000, 1)), rng)
    freq = np.bincount(acts, minlength=3) / acts.size
    assert np.all(np.abs(freq - p) < 4 * np.sqrt(p * (1 - p) / acts.size))


@pytest.mark.parametrize("scheme", list(SigmaScheme))
def test_gaussian_score_and_entropy_gradients(scheme):
    rng = np.random.default_rng(int(scheme))
    head = GaussianHead(3, 2, (6,), rng=rng, scheme=scheme)
    head.params[...] += 0.3 * rng.standard_normal(head.num_params)
    obs, act = rng.standard_normal((8, 3)), rng.standard_normal((8, 2))
    w, c = rng.standard_normal(8), rng.standard_normal(8)

    def f():
        val = np.sum(w * head.log_prob(obs, act)) + np.sum(c * head.entropy(obs))
        return float(val), head.grad_logp_entropy(obs, act, w, c)

    assert grad_check(head, f) < 1e-5


def test_categorical_gradients():
    rng = np.random.default_rng(9)
    head = CategoricalHead(3, 4, (5,), rng=rng)
    head.params[...] += 0.5 * rng.standard_normal(head.num_params)
    obs, act = rng.standard_normal((8, 3)), rng.integers(0, 4, 8)
    w, c = rng.standard_normal(8), rng.standard_normal(8)

    def f():
        val = np.sum(w * head.log_prob(obs, act)) + np.sum(c * head.entropy(obs))
        return float(val), head.grad_logp_entropy(obs, act, w, c)

    assert grad_check(head, f) < 1e-5


@pytest.mark.parametrize("scheme", [SigmaScheme.GLOBAL_TIMES_LOCAL,
                                    SigmaScheme.GLOBAL_TIMES_CLIPPED_LOCAL])
def test_fresh_local_schemes_equal_global_scheme(scheme):
    base = GaussianHead(3, 2, (16, 16), rng=np.random.default_rng(4))
    other = GaussianHead(3, 2, (16, 16), rng=np.random.default_rng(4), scheme=scheme)
    obs = np.random.default_rng(5).standard_normal((50, 3))
    m0, s0 = base.mean_log_std(obs)
    m1, s1 = other.mean_log_std(obs)
    # the wider output layer may round differently inside BLAS
    np.testing.assert_allclose(m0, m1, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(s0, s1)


def test_clipped_local_scheme_never_exceeds_global():
    rng = np.random.default_rng(6)
    head = GaussianHead(3, 2, (8,), rng=rng, scheme=SigmaScheme.GLOBAL_TIMES_CLIPPED_LOCAL)
    head.params[...] += rng.standard_normal(head.num_params)
    sig = head.sigma(rng.standard_normal((500, 3)))
    assert np.all(sig <= np.exp(head.log_std_global) * (1 + 1e-15))


def test_copy_does_not_share_parameters():
    head = GaussianHead(2, 1, (4,), rng=np.random.default_rng(0))
    twin = head.copy()
    twin.params += 1.0
    assert not np.allclose(head.log_std_global, twin.log_std_global)
    assert not np.allclose(head.net.params, twin.net.params)


def test_gaussian_kl_properties():
    m, s = np.array([[0.3, -1.0]]), np.array([[0.1, -0.4]])
    assert gaussian_kl(m, s, m, s)[0] == 0.0
    # 1-D reference value
    kl = gaussian_kl(np.array([0.0]), np.array([0.0]), np.array([1.0]), np.array([math.log(2.0)]))
    assert kl == pytest.approx(math.log(2.0) + (1 + 1) / 8 - 0.5, abs=1e-14)
