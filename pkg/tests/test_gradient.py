import math

import numpy as np
import pytest

from activepercept import (
    FiniteStatePolicy,
    exact_conditional_entropy,
    exact_gradient,
    finite_difference_gradient,
    sampled_gradient,
)
from activepercept.gradient import gradient_from_batch

from conftest import random_hmm, random_policy, revealing_hmm, uninformative_hmm
from oracles import conditional_entropy_by_enumeration


def test_uninformative_gradient_is_zero(rng):
    hmm = uninformative_hmm(3, 2, 2)
    p = random_policy(rng, hmm, 1)
    np.testing.assert_allclose(exact_gradient(hmm, p, 3).vector, 0.0, atol=1e-12)


def test_revealing_gradient_is_zero(rng):
    hmm = revealing_hmm()
    p = random_policy(rng, hmm, 1)
    assert np.all(exact_gradient(hmm, p, 3).vector == 0.0)
    est = sampled_gradient(hmm, p, 3, 500, seed=1)
    assert np.all(est.vector == 0.0)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_exact_matches_finite_differences(rng, k):
    hmm = random_hmm(rng, 3, 2, 2)
    p = random_policy(rng, hmm, k)
    exact = exact_gradient(hmm, p, 3).vector
    fd = finite_difference_gradient(hmm, p, 3, epsilon=1e-5)
    np.testing.assert_allclose(exact, fd, atol=1e-7)


def test_finite_differences_of_oracle_entropy(tiny):
    hmm, p = tiny
    exact = exact_gradient(hmm, p, 2).vector
    eps = 1e-5
    fd = np.zeros_like(exact)
    for idx in np.ndindex(exact.shape):
        up, down = np.array(p.theta), np.array(p.theta)
        up[idx] += eps
        down[idx] -= eps
        fd[idx] = (conditional_entropy_by_enumeration(hmm, p.with_theta(up), 2)
                   - conditional_entropy_by_enumeration(hmm, p.with_theta(down), 2)) / (2 * eps)
    np.testing.assert_allclose(exact, fd, atol=1e-7)


def test_entropy_reported_with_gradient(tiny):
    hmm, p = tiny
    est = exact_gradient(hmm, p, 3)
    assert est.entropy_estimate == pytest.approx(exact_conditional_entropy(hmm, p, 3), abs=1e-12)
    assert est.sample_count == 0


def test_rows_sum_to_zero(tiny):
    hmm, p = tiny
    np.testing.assert_allclose(exact_gradient(hmm, p, 3).vector.sum(axis=1), 0.0, atol=1e-12)
    np.testing.assert_allclose(sampled_gradient(hmm, p, 3, 300, seed=0).vector.sum(axis=1),
                               0.0, atol=1e-12)


def test_sampled_components_are_bounded(rng):
    hmm = random_hmm(rng, 4, 2, 3)
    p = random_policy(rng, hmm, 1)
    horizon = 5
    bound = math.log2(4) * (horizon + 1)
    for seed in range(5):
        est = sampled_gradient(hmm, p, horizon, 50, seed)
        assert np.max(np.abs(est.vector)) <= bound


@pytest.mark.parametrize("baseline", [False, True])
def test_sampled_is_unbiased(tiny, baseline):
    hmm, p = tiny
    exact = exact_gradient(hmm, p, 3).vector
    draws = np.stack([sampled_gradient(hmm, p, 3, 200, seed, baseline=baseline).vector
                      for seed in range(200)])
    se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - exact) <= 4 * se + 1e-12)


def test_baseline_reduces_variance(tiny):
    hmm, p = tiny
    plain = sampled_gradient(hmm, p, 3, 4000, 3, with_stderr=True).stderr
    based = sampled_gradient(hmm, p, 3, 4000, 3, baseline=True, with_stderr=True).stderr
    assert based.sum() < plain.sum()


def test_sampled_is_deterministic(tiny):
    hmm, p = tiny
    a = sampled_gradient(hmm, p, 4, 3000, seed=8)
    b = sampled_gradient(hmm, p, 4, 3000, seed=8, threads=3)
    np.testing.assert_array_equal(a.vector, b.vector)
    assert a.entropy_estimate == b.entropy_estimate


def test_single_zero_entropy_sample_gives_zero():
    p = FiniteStatePolicy(["0", "1"], ["x", "y"], 1)
    q = np.array([[0, 1, 2]])
    a = np.array([[0, 1, 1]])
    est = gradient_from_batch(p, q, a, np.array([0.0]))
    assert np.all(est.vector == 0.0)
    assert est.sample_count == 1


def test_to_dict_layout(tiny):
    hmm, p = tiny
    doc = sampled_gradient(hmm, p, 2, 10, 0).to_dict(p)
    assert doc["M"] == 10
    assert set(doc["theta_grad"]) == {p.memory_label(q) for q in range(p.num_memory_states)}
