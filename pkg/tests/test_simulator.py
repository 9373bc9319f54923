import numpy as np
import pytest
from scipy import stats

from activepercept import FiniteStatePolicy, Hmm, UsageError, exact_conditional_entropy
from activepercept.gradient import batch_entropies
from activepercept.rng import CounterStream
from activepercept.simulator import CHUNK, sample_arrays, sample_batch, sample_trajectory

from conftest import random_hmm, random_policy
from oracles import joint_table


def test_batch_rows_match_sequential_streams(tiny):
    hmm, p = tiny
    batch = sample_batch(hmm, p, 4, 30, seed=5, start=7)
    for i, traj in enumerate(batch):
        single = sample_trajectory(hmm, p, 4, CounterStream.from_seed(5, 7 + i))
        assert single.states == traj.states
        assert single.record == traj.record


def test_deterministic_given_seed(tiny):
    hmm, p = tiny
    a = sample_arrays(hmm, p, 6, 500, seed=3)
    b = sample_arrays(hmm, p, 6, 500, seed=3)
    c = sample_arrays(hmm, p, 6, 500, seed=4)
    np.testing.assert_array_equal(a.o, b.o)
    np.testing.assert_array_equal(a.states, b.states)
    assert not np.array_equal(a.o, c.o)


def test_thread_count_does_not_change_batch(tiny):
    hmm, p = tiny
    n = 3 * CHUNK + 17
    one = sample_arrays(hmm, p, 5, n, seed=11, threads=1)
    four = sample_arrays(hmm, p, 5, n, seed=11, threads=4)
    for x, y in zip((one.states, one.o, one.a, one.q), (four.states, four.o, four.a, four.q)):
        np.testing.assert_array_equal(x, y)


def test_prefix_stable_across_batch_sizes(tiny):
    hmm, p = tiny
    small = sample_arrays(hmm, p, 3, 100, seed=2)
    large = sample_arrays(hmm, p, 3, 2500, seed=2)
    np.testing.assert_array_equal(small.o, large.o[:100])


def test_memory_column_tracks_observations(rng):
    hmm = random_hmm(rng, 3, 3, 2)
    p = random_policy(rng, hmm, 2)
    batch = sample_arrays(hmm, p, 5, 50, seed=1)
    for i in range(50):
        np.testing.assert_array_equal(batch.q[i], p.memory_path(batch.o[i]))


def test_initial_state_marginal(rng):
    hmm = random_hmm(rng, 4, 2, 2)
    p = random_policy(rng, hmm, 0)
    n = 40_000
    s0 = sample_arrays(hmm, p, 0, n, seed=9).states[:, 0]
    counts = np.bincount(s0, minlength=4)
    _, pval = stats.chisquare(counts, hmm.mu0 * n)
    assert pval > 1e-3


def test_record_frequencies_chi_square(tiny):
    hmm, p = tiny
    table = joint_table(hmm, p, 2)
    keys = list(table)
    probs = np.array([table[k] for k in keys])
    n = 60_000
    batch = sample_arrays(hmm, p, 2, n, seed=21)
    index = {k: i for i, k in enumerate(keys)}
    counts = np.zeros(len(keys))
    for o, a in zip(map(tuple, batch.o), map(tuple, batch.a)):
        counts[index[(o, a)]] += 1
    _, pval = stats.chisquare(counts, probs * n)
    assert pval > 1e-3


def test_deterministic_model_is_reproduced():
    # cycle 0 -> 1 -> 2 -> 0 with each state emitting its own index
    t = np.roll(np.eye(3), 1, axis=0)
    e = np.eye(3)[None]
    hmm = Hmm(t, e, [1.0, 0.0, 0.0])
    p = FiniteStatePolicy.for_hmm(hmm, 0)
    batch = sample_arrays(hmm, p, 5, 20, seed=0)
    assert (batch.states == [0, 1, 2, 0, 1, 2]).all()
    assert (batch.o == batch.states).all()


def test_fixed_initial_state(tiny):
    hmm, p = tiny
    batch = sample_arrays(hmm, p, 2, 100, seed=0, initial_state=1)
    assert (batch.states[:, 0] == 1).all()


def test_batch_entropy_mean_matches_exact(tiny):
    hmm, p = tiny
    batch = sample_arrays(hmm, p, 3, 80_000, seed=17)
    h = batch_entropies(hmm, batch.o, batch.a)
    se = h.std(ddof=1) / np.sqrt(len(h))
    assert abs(h.mean() - exact_conditional_entropy(hmm, p, 3)) < 3 * se


@pytest.mark.parametrize("kw", [{"horizon": -1, "count": 5}, {"horizon": 2, "count": 0}])
def test_rejects_bad_arguments(tiny, kw):
    hmm, p = tiny
    with pytest.raises(UsageError):
        sample_arrays(hmm, p, seed=0, **kw)
