"""Finite-state perception policies with suffix memory and softmax outputs."""

import itertools
import json

import numpy as np

from .exceptions import DomainError, UsageError
from .rng import categorical

FORMAT = "fsp-v1"
SEPARATOR = "|"


def softmax(logits, axis=-1):
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


class FiniteStatePolicy:
    """Observation-based policy whose memory is the last ``memory_length`` observations.

    Memory states are all observation strings of length at most K, ordered by
    length and then lexicographically by observation index, so index 0 is the
    empty string. ``theta`` has shape ``(num_memory_states, num_actions)`` and
    row ``q`` holds the logits of the action distribution in memory state q.
    """

    def __init__(self, observations, actions, memory_length=0, theta=None):
        if memory_length < 0:
            raise UsageError("memory_length must be >= 0")
        self.observations = tuple(str(o) for o in observations)
        self.actions = tuple(str(a) for a in actions)
        self.memory_length = int(memory_length)

        n_obs = len(self.observations)
        states = [()]
        for k in range(1, self.memory_length + 1):
            states.extend(itertools.product(range(n_obs), repeat=k))
        self.memory_states = tuple(states)
        self._index = {q: i for i, q in enumerate(states)}

        nxt = np.empty((len(states), n_obs), dtype=np.intp)
        for i, q in enumerate(states):
            for o in range(n_obs):
                w = q + (o,)
                nxt[i, o] = self._index[w[len(w) - self.memory_length:]
                                        if self.memory_length else ()]
        nxt.setflags(write=False)
        self.next_memory = nxt

        shape = (len(states), len(self.actions))
        if theta is None:
            theta = np.zeros(shape)
        theta = np.array(theta, dtype=np.float64).reshape(shape)
        theta.setflags(write=False)
        self.theta = theta
        self._probs = None
        self._cdf = None

    @classmethod
    def for_hmm(cls, hmm, memory_length=0, theta=None):
        return cls(hmm.observations, hmm.actions, memory_length, theta)

    def with_theta(self, theta):
        """Same automaton, new parameters."""
        new = object.__new__(FiniteStatePolicy)
        new.__dict__.update(self.__dict__)
        theta = np.array(theta, dtype=np.float64).reshape(self.theta.shape)
        theta.setflags(write=False)
        new.theta = theta
        new._probs = None
        new._cdf = None
        return new

    @property
    def num_memory_states(self):
        return len(self.memory_states)

    @property
    def num_actions(self):
        return len(self.actions)

    @property
    def shape(self):
        return self.theta.shape

    @property
    def probs(self):
        """Table of action distributions, one row per memory state."""
        if self._probs is None:
            p = softmax(self.theta, axis=1)
            p.setflags(write=False)
            self._probs = p
        return self._probs

    @property
    def cdf(self):
        if self._cdf is None:
            c = np.cumsum(self.probs, axis=1)
            c.setflags(write=False)
            self._cdf = c
        return self._cdf

    def obs_index(self, o):
        if isinstance(o, str):
            try:
                return self.observations.index(o)
            except ValueError:
                raise DomainError(f"unknown observation {o!r}") from None
        if isinstance(o, (int, np.integer)) and 0 <= o < len(self.observations):
            return int(o)
        raise DomainError(f"unknown observation {o!r}")

    def action_index(self, a):
        if isinstance(a, str):
            try:
                return self.actions.index(a)
            except ValueError:
                raise DomainError(f"unknown action {a!r}") from None
        if isinstance(a, (int, np.integer)) and 0 <= a < len(self.actions):
            return int(a)
        raise DomainError(f"unknown action {a!r}")

    def memory_index(self, q):
        """Index of memory state ``q``.

        ``q`` may be an index, a tuple of observation labels or indices, or a
        ``"|"``-joined label string (``""`` is the empty memory).
        """
        if isinstance(q, (int, np.integer)):
            if 0 <= q < self.num_memory_states:
                return int(q)
            raise DomainError(f"memory state {q!r} out of range")
        if isinstance(q, str):
            q = tuple(q.split(SEPARATOR)) if q else ()
        key = tuple(self.obs_index(o) for o in q)
        try:
            return self._index[key]
        except KeyError:
            raise DomainError(
                f"memory state {q!r} is longer than K={self.memory_length}") from None

    def memory_label(self, q):
        return SEPARATOR.join(self.observations[o] for o in self.memory_states[q])

    def memory_path(self, o_seq):
        """Memory states q_0..q_T visited while reading ``o_seq`` (q_t precedes o_t)."""
        q = np.empty(len(o_seq), dtype=np.intp)
        cur = 0
        for t, o in enumerate(o_seq):
            q[t] = cur
            cur = self.next_memory[cur, o]
        return q

    def to_dict(self):
        return {
            "format": FORMAT,
            "memory_length": self.memory_length,
            "observations": list(self.observations),
            "actions": list(self.actions),
            "theta": {
                self.memory_label(q): {a: float(self.theta[q, i])
                                       for i, a in enumerate(self.actions)}
                for q in range(self.num_memory_states)
            },
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != FORMAT:
            raise UsageError(f"expected format {FORMAT!r}, got {doc.get('format')!r}")
        policy = cls(doc["observations"], doc["actions"], doc["memory_length"])
        theta = np.zeros(policy.shape)
        for label, row in doc["theta"].items():
            q = policy.memory_index(label)
            for a, value in row.items():
                theta[q, policy.action_index(a)] = value
        return policy.with_theta(theta)

    def __repr__(self):
        return (f"FiniteStatePolicy(K={self.memory_length}, "
                f"memory_states={self.num_memory_states}, actions={self.num_actions})")


def save_policy(policy, path):
    with open(path, "w") as fh:
        json.dump(policy.to_dict(), fh, indent=1)
        fh.write("\n")


def load_policy(path):
    with open(path) as fh:
        return FiniteStatePolicy.from_dict(json.load(fh))


def memory_update(policy, q, o):
    """Memory index after appending observation ``o`` to memory ``q``."""
    return int(policy.next_memory[policy.memory_index(q), policy.obs_index(o)])


def action_distribution(policy, q):
    return policy.probs[policy.memory_index(q)].copy()


def log_policy_gradient(policy, q, a):
    """Gradient of log psi(a | q) with respect to theta.

    Only row ``q`` is non-zero, where it equals ``onehot(a) - psi(. | q)``.
    """
    q = policy.memory_index(q)
    a = policy.action_index(a)
    grad = np.zeros(policy.shape)
    grad[q] = -policy.probs[q]
    grad[q, a] += 1.0
    return grad


def act(policy, q, rng):
    """Sample an action index in memory state ``q``; ``rng`` needs ``random()``."""
    q = policy.memory_index(q)
    return int(categorical(policy.cdf[q], rng.random()))
