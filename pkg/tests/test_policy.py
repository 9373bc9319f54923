import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from activepercept import (
    DomainError,
    FiniteStatePolicy,
    act,
    action_distribution,
    load_policy,
    log_policy_gradient,
    memory_update,
    save_policy,
)
from activepercept.rng import CounterStream

from oracles import naive_softmax


def abc_policy(k=2, actions=("x", "y", "z")):
    return FiniteStatePolicy(["a", "b", "c"], actions, memory_length=k)


class TestMemory:
    def test_memory_state_count(self):
        for k, n in [(0, 1), (1, 4), (2, 13), (3, 40)]:
            p = abc_policy(k)
            assert p.num_memory_states == n
            assert p.memory_states[0] == ()

    def test_suffix_window(self):
        p = abc_policy(2)
        q = memory_update(p, p.memory_index(("a", "b")), "c")
        assert p.memory_label(q) == "b|c"

    def test_short_history_kept_whole(self):
        p = abc_policy(2)
        assert p.memory_label(memory_update(p, p.memory_index(""), "a")) == "a"

    def test_stationary(self):
        p = abc_policy(0)
        for o in "abc":
            assert memory_update(p, 0, o) == 0

    def test_unknown_observation(self):
        p = abc_policy(1)
        with pytest.raises(DomainError, match="'q'"):
            memory_update(p, 0, "q")

    def test_memory_too_long(self):
        with pytest.raises(DomainError):
            abc_policy(1).memory_index("a|b")


class TestActionDistribution:
    def test_uniform(self):
        p = abc_policy(1)
        np.testing.assert_allclose(action_distribution(p, 2), [1 / 3] * 3, atol=1e-15)

    @pytest.mark.parametrize("c", [-700.0, 0.0, 3.5, 800.0])
    def test_log2_offset(self, c):
        p = FiniteStatePolicy(["a"], ["x", "y"], 0, [[c, c + np.log(2)]])
        np.testing.assert_allclose(action_distribution(p, 0), [1 / 3, 2 / 3], atol=1e-12)

    def test_matches_naive_softmax(self, rng):
        p = abc_policy(2)
        p = p.with_theta(rng.normal(size=p.shape) * 3)
        for q in range(p.num_memory_states):
            np.testing.assert_allclose(action_distribution(p, q), naive_softmax(p.theta[q]),
                                       atol=1e-12)

    def test_shift_invariance(self, rng):
        p = abc_policy(1).with_theta(rng.normal(size=(4, 3)))
        theta = np.array(p.theta)
        theta[2] += 17.0
        np.testing.assert_allclose(action_distribution(p.with_theta(theta), 2),
                                   action_distribution(p, 2), atol=1e-12)

    def test_strictly_positive(self, rng):
        p = abc_policy(2).with_theta(rng.normal(size=(13, 3)) * 10)
        assert np.all(p.probs > 0)
        np.testing.assert_allclose(p.probs.sum(axis=1), 1.0, atol=1e-12)


class TestLogPolicyGradient:
    def test_uniform_three_actions(self):
        p = abc_policy(1)
        g = log_policy_gradient(p, 1, "y")
        np.testing.assert_allclose(g[1], [-1 / 3, 2 / 3, -1 / 3], atol=1e-15)
        assert np.count_nonzero(g[[0, 2, 3]]) == 0

    def test_row_sums_to_zero(self, rng):
        p = abc_policy(1).with_theta(rng.normal(size=(4, 3)))
        for q in range(4):
            for a in range(3):
                assert abs(log_policy_gradient(p, q, a).sum()) < 1e-14

    def test_matches_finite_differences(self, rng):
        p = abc_policy(1).with_theta(rng.normal(size=(4, 3)))
        eps = 1e-6
        for q in range(4):
            for a in range(3):
                fd = np.zeros(p.shape)
                for idx in np.ndindex(p.shape):
                    up, dn = np.array(p.theta), np.array(p.theta)
                    up[idx] += eps
                    dn[idx] -= eps
                    fd[idx] = (np.log(action_distribution(p.with_theta(up), q)[a])
                               - np.log(action_distribution(p.with_theta(dn), q)[a])) / (2 * eps)
                np.testing.assert_allclose(log_policy_gradient(p, q, a), fd, atol=1e-7)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), scale=st.floats(0.1, 20.0))
def test_score_and_hessian_bounded_by_one(seed, scale):
    rng = np.random.default_rng(seed)
    p = abc_policy(1).with_theta(rng.normal(size=(4, 3)) * scale)
    q = int(rng.integers(0, 4))
    for a in range(3):
        assert np.max(np.abs(log_policy_gradient(p, q, a))) <= 1.0
    # Hessian of log psi(a|q) in row q, by finite differences of the score
    eps = 1e-6
    for j in range(3):
        up, dn = np.array(p.theta), np.array(p.theta)
        up[q, j] += eps
        dn[q, j] -= eps
        col = (log_policy_gradient(p.with_theta(up), q, 0)[q]
               - log_policy_gradient(p.with_theta(dn), q, 0)[q]) / (2 * eps)
        assert np.max(np.abs(col)) <= 1.0 + 1e-6
        psi = p.probs[q]
        expected = -(np.eye(3)[j] * psi[j] - psi[j] * psi)
        np.testing.assert_allclose(col, expected, atol=1e-6)


class TestAct:
    def test_near_deterministic(self):
        p = FiniteStatePolicy(["a"], ["x", "y", "z"], 0, [[0.0, 50.0, 0.0]])
        stream = CounterStream.from_seed(1)
        draws = [act(p, 0, stream) for _ in range(10_000)]
        assert np.mean(np.array(draws) == 1) >= 0.999

    def test_uniform_frequency(self):
        p = FiniteStatePolicy(["a"], ["x", "y"], 0)
        rng = np.random.default_rng(4)
        draws = np.array([act(p, 0, rng) for _ in range(100_000)])
        assert abs(draws.mean() - 0.5) < 0.01

    def test_chi_square(self, rng):
        p = FiniteStatePolicy(["a"], list("vwxyz"), 0, [rng.normal(size=5)])
        stream = CounterStream.from_seed(9)
        draws = np.array([act(p, 0, stream) for _ in range(20_000)])
        counts = np.bincount(draws, minlength=5)
        assert stats.chisquare(counts, p.probs[0] * len(draws)).pvalue > 0.001

    def test_reproducible(self):
        p = abc_policy(1).with_theta(np.arange(12.0).reshape(4, 3) / 5)
        a = [act(p, 2, CounterStream.from_seed(3)) for _ in range(3)]
        s = CounterStream.from_seed(3)
        b = [act(p, 2, s) for _ in range(3)]
        assert a == [b[0]] * 3


def test_json_roundtrip(tmp_path, rng):
    p = abc_policy(2).with_theta(rng.normal(size=(13, 3)))
    path = tmp_path / "p.json"
    save_policy(p, path)
    doc = json.loads(path.read_text())
    assert doc["format"] == "fsp-v1"
    assert "a|b" in doc["theta"] and "" in doc["theta"]
    back = load_policy(path)
    np.testing.assert_array_equal(back.theta, p.theta)
    assert back.memory_length == 2
