"""HMMs whose emission distribution is chosen by a perception action.

Matrices follow the "flipped" orientation throughout: ``transition[i, j]`` is
P(X_{t+1} = i | X_t = j), so probability vectors are columns and a forward
step is ``T @ v``. ``emissions[a][o, j]`` is E(o | j, a).
"""

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, UsageError

FORMAT = "cehmm-v1"
_TOL = 1e-12


def _frozen(array):
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


class Hmm:
    """Finite HMM with controllable emissions.

    Parameters
    ----------
    transition : (N, N) array
        Column-stochastic transition matrix.
    emissions : (A, M, N) array or mapping action -> (M, N) array
        Emission matrices, one per perception action.
    mu0 : (N,) array
        Distribution of the initial state.
    observations, actions : sequences of str, optional
        Alphabet labels. Default to ``"0", "1", ...``.
    state_labels : sequence of str, optional
        Human-readable names of the hidden states.
    """

    def __init__(self, transition, emissions, mu0, observations=None,
                 actions=None, state_labels=None):
        if isinstance(emissions, dict):
            if actions is None:
                actions = list(emissions)
            emissions = [emissions[a] for a in actions]
        self.transition = _frozen(transition)
        self.emissions = _frozen(emissions)
        self.mu0 = _frozen(mu0)

        n = self.transition.shape[0]
        if self.transition.shape != (n, n):
            raise UsageError(f"transition must be square, got {self.transition.shape}")
        if self.emissions.ndim != 3 or self.emissions.shape[2] != n:
            raise UsageError(
                f"emissions must have shape (actions, observations, {n}), "
                f"got {self.emissions.shape}")
        if self.mu0.shape != (n,):
            raise UsageError(f"mu0 must have length {n}, got {self.mu0.shape}")

        n_act, n_obs, _ = self.emissions.shape
        self.observations = tuple(str(o) for o in (observations or range(n_obs)))
        self.actions = tuple(str(a) for a in (actions or range(n_act)))
        if len(self.observations) != n_obs or len(set(self.observations)) != n_obs:
            raise UsageError("observation labels must be unique and match emissions")
        if len(self.actions) != n_act or len(set(self.actions)) != n_act:
            raise UsageError("action labels must be unique and match emissions")
        self.state_labels = (tuple(str(s) for s in state_labels)
                             if state_labels is not None else None)
        if self.state_labels is not None and len(self.state_labels) != n:
            raise UsageError("state_labels must have one entry per state")
        self._validate()

        self._obs_lookup = {o: i for i, o in enumerate(self.observations)}
        self._act_lookup = {a: i for i, a in enumerate(self.actions)}
        support = np.flatnonzero(self.mu0 > 0)
        support.setflags(write=False)
        self.initial_support = support

    def _validate(self):
        if np.any(self.transition < 0) or np.any(self.emissions < 0) or np.any(self.mu0 < 0):
            raise UsageError("probabilities must be non-negative")
        cols = self.transition.sum(axis=0)
        if np.max(np.abs(cols - 1.0)) > _TOL:
            bad = int(np.argmax(np.abs(cols - 1.0)))
            raise UsageError(f"transition column {bad} sums to {cols[bad]!r}, not 1")
        emitted = self.emissions.sum(axis=1)
        if np.max(np.abs(emitted - 1.0)) > _TOL:
            a, j = np.unravel_index(np.argmax(np.abs(emitted - 1.0)), emitted.shape)
            raise UsageError(
                f"emission column for state {j} under action {a} sums to "
                f"{emitted[a, j]!r}, not 1")
        if abs(self.mu0.sum() - 1.0) > _TOL:
            raise UsageError(f"mu0 sums to {self.mu0.sum()!r}, not 1")

    @property
    def num_states(self):
        return self.transition.shape[0]

    @property
    def num_observations(self):
        return len(self.observations)

    @property
    def num_actions(self):
        return len(self.actions)

    def obs_index(self, o):
        """Index of observation ``o`` given as a label or an integer index."""
        return _lookup(o, self._obs_lookup, self.num_observations, "observation")

    def action_index(self, a):
        return _lookup(a, self._act_lookup, self.num_actions, "action")

    def state_index(self, s):
        if isinstance(s, str) and self.state_labels is not None:
            try:
                return self.state_labels.index(s)
            except ValueError:
                raise DomainError(f"unknown state {s!r}") from None
        if isinstance(s, (int, np.integer)) and 0 <= s < self.num_states:
            return int(s)
        raise DomainError(f"state {s!r} is out of range 0..{self.num_states - 1}")

    def state_label(self, s):
        return self.state_labels[s] if self.state_labels is not None else str(s)

    def encode(self, o_seq, a_seq):
        """Convert label or index sequences into two int arrays, checking lengths."""
        if len(o_seq) != len(a_seq):
            raise UsageError(
                f"observation and action sequences differ in length "
                f"({len(o_seq)} vs {len(a_seq)})")
        if len(o_seq) == 0:
            raise UsageError("sequences must contain at least one step")
        o = np.array([self.obs_index(x) for x in o_seq], dtype=np.intp)
        a = np.array([self.action_index(x) for x in a_seq], dtype=np.intp)
        return o, a

    def to_dict(self):
        doc = {
            "format": FORMAT,
            "num_states": self.num_states,
            "observations": list(self.observations),
            "actions": list(self.actions),
            "transition": self.transition.tolist(),
            "emissions": {a: self.emissions[i].tolist()
                          for i, a in enumerate(self.actions)},
            "mu0": self.mu0.tolist(),
        }
        if self.state_labels is not None:
            doc["state_labels"] = list(self.state_labels)
        return doc

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != FORMAT:
            raise UsageError(f"expected format {FORMAT!r}, got {doc.get('format')!r}")
        hmm = cls(doc["transition"], doc["emissions"], doc["mu0"],
                  observations=doc["observations"], actions=doc["actions"],
                  state_labels=doc.get("state_labels"))
        if hmm.num_states != doc["num_states"]:
            raise UsageError("num_states does not match the transition matrix")
        return hmm

    def __repr__(self):
        return (f"Hmm(num_states={self.num_states}, "
                f"observations={self.num_observations}, actions={self.num_actions})")


def _lookup(symbol, table, size, kind):
    if isinstance(symbol, str):
        try:
            return table[symbol]
        except KeyError:
            raise DomainError(f"unknown {kind} {symbol!r}") from None
    if isinstance(symbol, (int, np.integer)) and 0 <= symbol < size:
        return int(symbol)
    raise DomainError(f"unknown {kind} {symbol!r}")


def save_hmm(hmm, path):
    with open(path, "w") as fh:
        json.dump(hmm.to_dict(), fh, indent=1)
        fh.write("\n")


def load_hmm(path):
    with open(path) as fh:
        return Hmm.from_dict(json.load(fh))


@dataclass(frozen=True, eq=False)
class ObservableOperator:
    """``matrix = T @ diag(O^a[o, :])``; chained products give likelihoods."""

    matrix: np.ndarray
    observation: str
    action: str


def observable_operator(hmm, o, a):
    """Observable operator A_{o|a} with entries ``T[i, j] * E(o | j, a)``."""
    oi, ai = hmm.obs_index(o), hmm.action_index(a)
    matrix = hmm.transition * hmm.emissions[ai, oi][None, :]
    matrix.setflags(write=False)
    return ObservableOperator(matrix, hmm.observations[oi], hmm.actions[ai])


def _scaled_forward(hmm, v, o, a):
    # Rescale after every step; T preserves column mass, so the scale can be
    # taken before the transition.
    log_p = 0.0
    for oi, ai in zip(o, a):
        w = hmm.emissions[ai, oi] * v
        c = w.sum()
        if c <= 0.0:
            return -np.inf
        log_p += np.log(c)
        v = hmm.transition @ (w / c)
    return float(log_p)


def sequence_log_likelihood(hmm, o_seq, a_seq):
    """Natural-log probability of ``o_seq`` given the perception actions ``a_seq``.

    Returns ``-inf`` when the sequence is impossible.
    """
    o, a = hmm.encode(o_seq, a_seq)
    return _scaled_forward(hmm, hmm.mu0, o, a)


def sequence_log_likelihood_from(hmm, s0, o_seq, a_seq):
    """As :func:`sequence_log_likelihood` with the initial state fixed to ``s0``."""
    s0 = hmm.state_index(s0)
    o, a = hmm.encode(o_seq, a_seq)
    v = np.zeros(hmm.num_states)
    v[s0] = 1.0
    return _scaled_forward(hmm, v, o, a)
