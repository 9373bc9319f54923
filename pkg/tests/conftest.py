import numpy as np
import pytest

from activepercept import FiniteStatePolicy, Hmm


def random_hmm(rng, n=3, n_obs=2, n_act=2, sparse_mu0=False):
    t = rng.dirichlet(np.ones(n), size=n).T
    e = np.stack([rng.dirichlet(np.ones(n_obs), size=n).T for _ in range(n_act)])
    mu0 = rng.dirichlet(np.ones(n))
    if sparse_mu0 and n > 2:
        mu0[-1] = 0.0
        mu0 /= mu0.sum()
    return Hmm(t, e, mu0)


def random_policy(rng, hmm, memory_length=1):
    p = FiniteStatePolicy.for_hmm(hmm, memory_length)
    return p.with_theta(rng.standard_normal(p.shape))


def uninformative_hmm(n=2, n_obs=2, n_act=2, mu0=None):
    t = np.full((n, n), 1.0 / n)
    e = np.full((n_act, n_obs, n), 1.0 / n_obs)
    return Hmm(t, e, mu0 if mu0 is not None else np.full(n, 1.0 / n))


def revealing_hmm():
    """Each initial state emits its own symbol deterministically, forever."""
    t = np.eye(2)
    e = np.stack([np.eye(2), np.eye(2)])
    return Hmm(t, e, [0.5, 0.5], observations=["0", "1"], actions=["x", "y"])


def counterexample_hmm():
    """Two equally likely initial states; the first emission reveals which.

    States 0 and 1 are the initial states and emit "0" and "1". They move to
    states 2 and 3, which emit both symbols with equal probability, so later
    observations carry no information.
    """
    t = np.zeros((4, 4))
    t[2, 0] = t[3, 1] = t[2, 2] = t[3, 3] = 1.0
    e = np.array([[[1.0, 0.0, 0.5, 0.5],
                   [0.0, 1.0, 0.5, 0.5]]])
    return Hmm(t, e, [0.5, 0.5, 0.0, 0.0], observations=["0", "1"], actions=["look"])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny(rng):
    hmm = random_hmm(rng, 3, 2, 2)
    return hmm, random_policy(rng, hmm, 1)
