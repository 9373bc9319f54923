"""Gradient of the initial-state conditional entropy with respect to theta.

Because the posterior over S_0 does not depend on theta, the gradient reduces
to ``E_y[ H(S_0 | Y = y) * score(y) ]``: an exact version sums over every
record, the sampled version averages over a batch of simulated records.
Entropies are in bits everywhere.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import UsageError
from .inference import (
    DEFAULT_BUDGET,
    entropy_bits,
    enumerate_records,
    exact_conditional_entropy,
    per_record_scores,
    support_forward,
    weighted_score_sum,
)
from .simulator import CHUNK, sample_arrays


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    """Gradient (shape of theta) with the entropy it was computed alongside.

    ``sample_count`` is 0 for exact estimates. ``stderr`` holds componentwise
    standard errors when requested from :func:`sampled_gradient`.
    """

    vector: np.ndarray
    sample_count: int
    entropy_estimate: float
    entropy_stderr: float = 0.0
    stderr: Optional[np.ndarray] = None

    def to_dict(self, policy):
        return {
            "theta_grad": {
                policy.memory_label(q): {a: float(self.vector[q, i])
                                         for i, a in enumerate(policy.actions)}
                for q in range(policy.num_memory_states)
            },
            "entropy_bits": float(self.entropy_estimate),
            "M": int(self.sample_count),
        }


def exact_gradient(hmm, policy, horizon, budget=DEFAULT_BUDGET):
    table = enumerate_records(hmm, policy, horizon, budget)
    weights = table.prob * table.entropy
    grad = weighted_score_sum(policy, table.q, table.a, weights)
    return GradientEstimate(grad, 0, float(weights.sum()))


def batch_entropies(hmm, o, a, threads=1):
    """Posterior entropy (bits) of every record in a batch, computed chunkwise."""
    n = len(o)
    bounds = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]

    def run(bound):
        lo, hi = bound
        _, post = support_forward(hmm, o[lo:hi], a[lo:hi])
        return entropy_bits(post)

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    return np.concatenate(parts)


def gradient_from_batch(policy, batch_q, batch_a, entropies, baseline=False,
                        with_stderr=False):
    m = len(entropies)
    weights = entropies
    if baseline and m > 1:
        # leave-one-out mean keeps each weight independent of its own record
        weights = entropies - (entropies.sum() - entropies) / (m - 1)
    grad = weighted_score_sum(policy, batch_q, batch_a, weights) / m
    stderr = None
    if with_stderr:
        terms = per_record_scores(policy, batch_q, batch_a) * weights[:, None, None]
        stderr = terms.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.zeros(policy.shape)
    h_se = float(entropies.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return GradientEstimate(grad, m, float(entropies.mean()), h_se, stderr)


def sampled_gradient(hmm, policy, horizon, count, seed, baseline=False,
                     threads=1, with_stderr=False):
    """Monte-Carlo gradient from ``count`` simulated records.

    With ``baseline=True`` each record's entropy is reduced by the mean
    entropy of the other records in the batch; the estimator stays unbiased.
    """
    if count < 1:
        raise UsageError("count must be >= 1")
    batch = sample_arrays(hmm, policy, horizon, count, seed, threads=threads)
    h = batch_entropies(hmm, batch.o, batch.a, threads)
    return gradient_from_batch(policy, batch.q, batch.a, h, baseline, with_stderr)


def finite_difference_gradient(hmm, policy, horizon, epsilon=1e-5,
                               budget=DEFAULT_BUDGET):
    """Central differences of the exact conditional entropy, one coordinate at a time."""
    if epsilon <= 0:
        raise UsageError("epsilon must be positive")
    theta = np.array(policy.theta)
    grad = np.zeros_like(theta)
    for idx in np.ndindex(theta.shape):
        up, down = theta.copy(), theta.copy()
        up[idx] += epsilon
        down[idx] -= epsilon
        h_up = exact_conditional_entropy(hmm, policy.with_theta(up), horizon, budget)
        h_down = exact_conditional_entropy(hmm, policy.with_theta(down), horizon, budget)
        grad[idx] = (h_up - h_down) / (2 * epsilon)
    return grad
