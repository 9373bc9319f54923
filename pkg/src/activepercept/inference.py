"""Joint probabilities, initial-state posteriors and conditional entropy.

The probability of a record ``y = (o_{0:T}, a_{0:T})`` under a policy is

    P_theta(y) = P(o_{0:T} | a_{0:T}) * prod_t pi_theta(a_t | o_{0:t-1}),

which sums to one over all records. The policy factor is the same for every
initial state, so it cancels from the posterior over S_0 and is never
evaluated there.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from .exceptions import BudgetExceeded, DomainError, ImpossibleObservation, UsageError
from .hmm import sequence_log_likelihood, sequence_log_likelihood_from

DEFAULT_BUDGET = 10 ** 7


@dataclass(frozen=True)
class ObservationRecord:
    """Observed part ``y`` of a trajectory as observation and action indices."""

    o: tuple
    a: tuple

    def __post_init__(self):
        if len(self.o) != len(self.a):
            raise UsageError(
                f"record lengths differ ({len(self.o)} observations, {len(self.a)} actions)")
        if len(self.o) == 0:
            raise UsageError("record must contain at least one step")
        object.__setattr__(self, "o", tuple(int(x) for x in self.o))
        object.__setattr__(self, "a", tuple(int(x) for x in self.a))

    @classmethod
    def from_symbols(cls, hmm, o_seq, a_seq):
        o, a = hmm.encode(o_seq, a_seq)
        return cls(tuple(o), tuple(a))

    def __len__(self):
        return len(self.o)

    def to_dict(self, hmm):
        return {"o": [hmm.observations[i] for i in self.o],
                "a": [hmm.actions[i] for i in self.a]}

    @classmethod
    def from_dict(cls, hmm, doc):
        return cls.from_symbols(hmm, doc["o"], doc["a"])


@dataclass(frozen=True, eq=False)
class Posterior:
    """Posterior over the initial support; ``support[i]`` is the state of ``probs[i]``."""

    probs: np.ndarray
    support: np.ndarray

    def as_dict(self, hmm):
        return {hmm.state_label(s): float(p) for s, p in zip(self.support, self.probs)}


def entropy_bits(p, axis=-1):
    """Shannon entropy in bits along ``axis`` with 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    logs = np.log2(np.where(p > 0, p, 1.0))
    return 0.0 - np.sum(p * logs, axis=axis)


def _check_record(hmm, record):
    if max(record.o) >= hmm.num_observations or max(record.a) >= hmm.num_actions:
        raise DomainError("record uses symbols outside the model alphabets")


def log_policy_prob(policy, record):
    """Sum over t of log pi(a_t | o_{0:t-1}) along the replayed memory path."""
    q = policy.memory_path(record.o)
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(policy.probs[q, list(record.a)])))


def joint_log_prob(hmm, policy, record):
    _check_record(hmm, record)
    ll = sequence_log_likelihood(hmm, record.o, record.a)
    if ll == -np.inf:
        return ll
    return ll + log_policy_prob(policy, record)


def joint_log_prob_given_s0(hmm, policy, record, s0):
    s0 = hmm.state_index(s0)
    if hmm.mu0[s0] <= 0:
        raise DomainError(f"state {hmm.state_label(s0)!r} is not an initial state")
    _check_record(hmm, record)
    ll = sequence_log_likelihood_from(hmm, s0, record.o, record.a)
    if ll == -np.inf:
        return ll
    return ll + log_policy_prob(policy, record)


def posterior(hmm, policy, record):
    """Posterior P(S_0 | y) over the initial support.

    ``policy`` is accepted for symmetry with the other queries; its factor
    cancels and may be ``None``.
    """
    _check_record(hmm, record)
    support = hmm.initial_support
    logs = np.array([sequence_log_likelihood_from(hmm, s, record.o, record.a)
                     for s in support])
    logs = logs + np.log(hmm.mu0[support])
    total = logsumexp(logs)
    if total == -np.inf:
        raise ImpossibleObservation("impossible observation: record has probability zero")
    probs = np.exp(logs - total)
    return Posterior(probs, support.copy())


def entropy_given_observation(post):
    """H(S_0 | Y = y) in bits."""
    probs = post.probs if isinstance(post, Posterior) else post
    return float(entropy_bits(probs))


def score(policy, record):
    """Gradient of log P_theta(y), identical to that of log P_theta(y | s_0)."""
    q = policy.memory_path(record.o)
    grad = np.zeros(policy.shape)
    np.add.at(grad, (q, list(record.a)), 1.0)
    np.subtract.at(grad, q, policy.probs[q])
    return grad


# --- batched machinery ------------------------------------------------------

def transition_csr(hmm):
    """Sparse transition matrix, cached on the model.

    Sparse products fix the summation order per output entry, so batched
    forward passes give bitwise-identical rows however the batch is chunked.
    """
    csr = getattr(hmm, "_transition_csr", None)
    if csr is None:
        csr = sparse.csr_matrix(hmm.transition)
        hmm._transition_csr = csr
    return csr


def _propagate(hmm, w):
    # w: (R, S0, N) -> T applied to every (record, initial state) vector
    r, k, n = w.shape
    out = transition_csr(hmm) @ w.reshape(r * k, n).T
    return np.ascontiguousarray(out.T).reshape(r, k, n)


def support_forward(hmm, o, a, keep_path=False):
    """Scaled forward pass for a batch of records, one vector per initial state.

    Parameters
    ----------
    o, a : (R, T+1) int arrays

    Returns
    -------
    log_lik : (R,) natural-log P(o | a); ``-inf`` for impossible records.
    post : (R, S0) posterior over the initial support (zeros if impossible),
        or (R, T+1, S0) posteriors after each prefix when ``keep_path``.
    """
    o = np.atleast_2d(np.asarray(o, dtype=np.intp))
    a = np.atleast_2d(np.asarray(a, dtype=np.intp))
    support = hmm.initial_support
    r, steps = o.shape
    k = len(support)
    v = np.zeros((r, k, hmm.num_states))
    v[:, np.arange(k), support] = hmm.mu0[support]
    log_lik = np.zeros(r)
    path = np.empty((r, steps, k)) if keep_path else None
    for t in range(steps):
        w = v * hmm.emissions[a[:, t], o[:, t]][:, None, :]
        c = w.sum(axis=(1, 2))
        ok = c > 0
        with np.errstate(divide="ignore"):
            log_lik += np.log(c)
        w[ok] /= c[ok, None, None]
        w[~ok] = 0.0
        if keep_path:
            path[:, t] = w.sum(axis=2)
        if t + 1 < steps:
            v = _propagate(hmm, w)
        else:
            v = w
    if keep_path:
        return log_lik, path
    return log_lik, v.sum(axis=2)


def weighted_score_sum(policy, q, a, weights):
    """Sum over records k of ``weights[k] * score(y_k)`` from memory/action histories."""
    q = np.asarray(q)
    a = np.asarray(a)
    w = np.broadcast_to(np.asarray(weights, dtype=np.float64)[:, None], q.shape)
    grad = np.zeros(policy.shape)
    np.add.at(grad, (q.ravel(), a.ravel()), w.ravel())
    per_q = np.bincount(q.ravel(), weights=w.ravel(), minlength=policy.num_memory_states)
    grad -= per_q[:, None] * policy.probs
    return grad


def per_record_scores(policy, q, a):
    """Dense (R, |Q|, |A|) array of record scores."""
    q = np.asarray(q)
    a = np.asarray(a)
    r, steps = q.shape
    out = np.zeros((r,) + policy.shape)
    rows = np.repeat(np.arange(r), steps)
    np.add.at(out, (rows, q.ravel(), a.ravel()), 1.0)
    np.subtract.at(out, (rows, q.ravel()), policy.probs[q.ravel()])
    return out


@dataclass(frozen=True, eq=False)
class RecordTable:
    """Every possible record of a horizon with its probability and posterior."""

    o: np.ndarray
    a: np.ndarray
    q: np.ndarray
    log_prob: np.ndarray
    posterior: np.ndarray
    support: np.ndarray

    @property
    def prob(self):
        return np.exp(self.log_prob)

    @property
    def entropy(self):
        return entropy_bits(self.posterior)

    def __len__(self):
        return len(self.log_prob)


def enumeration_size(hmm, horizon):
    return (hmm.num_observations * hmm.num_actions) ** (horizon + 1)


def enumerate_records(hmm, policy, horizon, budget=DEFAULT_BUDGET):
    """All records of length ``horizon + 1`` with positive probability.

    Expands level by level over every (action, observation) pair and drops
    prefixes whose probability is exactly zero.
    """
    if horizon < 0:
        raise UsageError("horizon must be >= 0")
    required = enumeration_size(hmm, horizon)
    if required > budget:
        raise BudgetExceeded(required, budget)

    support = hmm.initial_support
    k = len(support)
    n_a, n_o = hmm.num_actions, hmm.num_observations
    log_psi = np.log(policy.probs)

    v = np.zeros((1, k, hmm.num_states))
    v[0, np.arange(k), support] = hmm.mu0[support]
    log_c = np.zeros(1)
    log_pol = np.zeros(1)
    mem = np.zeros(1, dtype=np.intp)
    o_hist = np.zeros((1, 0), dtype=np.intp)
    a_hist = np.zeros((1, 0), dtype=np.intp)
    q_hist = np.zeros((1, 0), dtype=np.intp)

    aa, oo = np.meshgrid(np.arange(n_a), np.arange(n_o), indexing="ij")
    aa, oo = aa.ravel(), oo.ravel()
    for t in range(horizon + 1):
        # children ordered (parent, action, observation)
        w = v[:, None] * hmm.emissions[aa, oo][None, :, None, :]
        c = w.sum(axis=(2, 3))
        keep = c > 0
        parent, child = np.nonzero(keep)
        w = w[parent, child] / c[parent, child][:, None, None]
        log_c = log_c[parent] + np.log(c[parent, child])
        a_new, o_new = aa[child], oo[child]
        log_pol = log_pol[parent] + log_psi[mem[parent], a_new]
        q_hist = np.column_stack([q_hist[parent], mem[parent]])
        o_hist = np.column_stack([o_hist[parent], o_new])
        a_hist = np.column_stack([a_hist[parent], a_new])
        mem = policy.next_memory[mem[parent], o_new]
        v = _propagate(hmm, w) if t < horizon else w
    return RecordTable(o_hist, a_hist, q_hist, log_c + log_pol, v.sum(axis=2),
                       support.copy())


def exact_conditional_entropy(hmm, policy, horizon, budget=DEFAULT_BUDGET):
    """H(S_0 | Y_{0:T}) in bits by exhaustive summation over records."""
    table = enumerate_records(hmm, policy, horizon, budget)
    return float(np.sum(table.prob * table.entropy))
