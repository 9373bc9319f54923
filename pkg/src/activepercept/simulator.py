"""Sampling of state/action/observation trajectories.

Trajectory ``i`` of a batch seeded with ``seed`` draws from the counter
stream ``derive_key(seed, i)``. Draw 0 picks s_0 and step t uses draws
``1 + 3t`` (action), ``2 + 3t`` (observation) and ``3 + 3t`` (next state).
Batches are produced in fixed-size chunks and concatenated by index, so the
result does not depend on how many worker threads are used.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import UsageError
from .inference import ObservationRecord
from .rng import CounterStream, categorical, derive_key, uniforms

CHUNK = 1024


@dataclass(frozen=True)
class Trajectory:
    states: tuple
    record: ObservationRecord
    seed_tag: str

    def to_dict(self, hmm):
        doc = {"states": [hmm.state_label(s) for s in self.states]}
        doc.update(self.record.to_dict(hmm))
        doc["seed_tag"] = self.seed_tag
        return doc


@dataclass(frozen=True, eq=False)
class Batch:
    """Trajectories stored column-wise; row ``i`` is trajectory ``start + i``."""

    states: np.ndarray
    o: np.ndarray
    a: np.ndarray
    q: np.ndarray
    seed: int
    start: int = 0

    def __len__(self):
        return len(self.states)

    def trajectories(self):
        return [
            Trajectory(tuple(int(s) for s in self.states[i]),
                       ObservationRecord(tuple(self.o[i]), tuple(self.a[i])),
                       f"{self.seed}:{self.start + i}")
            for i in range(len(self))
        ]


def _tables(hmm):
    tables = getattr(hmm, "_sampling_tables", None)
    if tables is None:
        mu_cdf = np.cumsum(hmm.mu0)
        # emission CDF indexed [action, state, observation]
        e_cdf = np.cumsum(np.transpose(hmm.emissions, (0, 2, 1)), axis=2)
        # transition CDF indexed [source, destination]
        t_cdf = np.cumsum(hmm.transition.T, axis=1)
        tables = (mu_cdf, e_cdf, t_cdf)
        hmm._sampling_tables = tables
    return tables


def sample_trajectory(hmm, policy, horizon, rng, initial_state=None):
    """Draw one trajectory of length ``horizon + 1``.

    ``rng`` is any object with a ``random()`` method returning uniforms in
    [0, 1); a :class:`~activepercept.rng.CounterStream` reproduces the
    corresponding row of :func:`sample_batch`.
    """
    if horizon < 0:
        raise UsageError("horizon must be >= 0")
    mu_cdf, e_cdf, t_cdf = _tables(hmm)
    u0 = rng.random()
    s = int(categorical(mu_cdf, u0)) if initial_state is None else int(initial_state)
    q = 0
    states, obs, acts = [], [], []
    for t in range(horizon + 1):
        a = int(categorical(policy.cdf[q], rng.random()))
        o = int(categorical(e_cdf[a, s], rng.random()))
        u_next = rng.random()
        states.append(s)
        obs.append(o)
        acts.append(a)
        if t < horizon:
            s = int(categorical(t_cdf[s], u_next))
        q = int(policy.next_memory[q, o])
    tag = f"{int(rng.key):#x}" if isinstance(rng, CounterStream) else "external"
    return Trajectory(tuple(states), ObservationRecord(tuple(obs), tuple(acts)), tag)


def _sample_chunk(hmm, policy, horizon, seed, start, count, initial_state):
    mu_cdf, e_cdf, t_cdf = _tables(hmm)
    keys = derive_key(seed, np.arange(start, start + count, dtype=np.uint64))
    steps = horizon + 1
    states = np.empty((count, steps), dtype=np.intp)
    obs = np.empty((count, steps), dtype=np.intp)
    acts = np.empty((count, steps), dtype=np.intp)
    mem = np.empty((count, steps), dtype=np.intp)
    if initial_state is None:
        s = categorical(np.broadcast_to(mu_cdf, (count, len(mu_cdf))), uniforms(keys, 0))
    else:
        s = np.full(count, int(initial_state), dtype=np.intp)
    q = np.zeros(count, dtype=np.intp)
    cdf = policy.cdf
    for t in range(steps):
        a = categorical(cdf[q], uniforms(keys, 1 + 3 * t))
        o = categorical(e_cdf[a, s], uniforms(keys, 2 + 3 * t))
        states[:, t], obs[:, t], acts[:, t], mem[:, t] = s, o, a, q
        if t < horizon:
            s = categorical(t_cdf[s], uniforms(keys, 3 + 3 * t))
        q = policy.next_memory[q, o]
    return states, obs, acts, mem


def sample_arrays(hmm, policy, horizon, count, seed, start=0, threads=1,
                  initial_state=None):
    """Batch of ``count`` trajectories as arrays (see :class:`Batch`)."""
    if horizon < 0:
        raise UsageError("horizon must be >= 0")
    if count < 1:
        raise UsageError("count must be >= 1")
    if initial_state is not None:
        initial_state = hmm.state_index(initial_state)
    bounds = [(lo, min(lo + CHUNK, count)) for lo in range(0, count, CHUNK)]

    def run(bound):
        lo, hi = bound
        return _sample_chunk(hmm, policy, horizon, seed, start + lo, hi - lo,
                             initial_state)

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    states, obs, acts, mem = (np.concatenate(x) for x in zip(*parts))
    return Batch(states, obs, acts, mem, int(seed), int(start))


def sample_batch(hmm, policy, horizon, count, seed, start=0, threads=1,
                 initial_state=None):
    """``count`` independent trajectories with indices ``start .. start + count - 1``."""
    return sample_arrays(hmm, policy, horizon, count, seed, start, threads,
                         initial_state).trajectories()
