"""Numerical identity checks behind ``activepercept gradcheck``.

Each function returns a residual (max absolute deviation); callers compare it
against a tolerance.
"""

from dataclasses import dataclass

import numpy as np

from .gradient import exact_gradient, finite_difference_gradient
from .inference import (
    DEFAULT_BUDGET,
    ObservationRecord,
    joint_log_prob,
    joint_log_prob_given_s0,
    posterior,
    score,
)
from .simulator import sample_arrays


def central_difference(f, theta, epsilon):
    """Gradient of scalar ``f(theta)`` by central differences."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    for idx in np.ndindex(theta.shape):
        up, down = theta.copy(), theta.copy()
        up[idx] += epsilon
        down[idx] -= epsilon
        grad[idx] = (f(up) - f(down)) / (2 * epsilon)
    return grad


def gradient_residual(hmm, policy, horizon, epsilon=1e-5, budget=DEFAULT_BUDGET):
    """Max |exact gradient - finite differences of the exact entropy|."""
    exact = exact_gradient(hmm, policy, horizon, budget).vector
    fd = finite_difference_gradient(hmm, policy, horizon, epsilon, budget)
    return float(np.max(np.abs(exact - fd)))


def bayes_posterior(hmm, policy, record):
    """Posterior from joint probabilities that include the policy factor.

    Independent of :func:`~activepercept.inference.posterior`, which never
    evaluates the policy.
    """
    total = joint_log_prob(hmm, policy, record)
    support = hmm.initial_support
    logs = np.array([joint_log_prob_given_s0(hmm, policy, record, s) for s in support])
    return np.exp(logs + np.log(hmm.mu0[support]) - total)


def score_invariance_residual(hmm, policy, record, epsilon=1e-6):
    """Max deviation among finite-difference gradients of log P(y) and log P(y | s0).

    Initial states that cannot produce ``record`` are skipped. The analytic
    score is compared as well.
    """
    grads = [central_difference(
        lambda th: joint_log_prob(hmm, policy.with_theta(th), record),
        policy.theta, epsilon)]
    for s in hmm.initial_support:
        if joint_log_prob_given_s0(hmm, policy, record, s) == -np.inf:
            continue
        grads.append(central_difference(
            lambda th, s=s: joint_log_prob_given_s0(hmm, policy.with_theta(th), record, s),
            policy.theta, epsilon))
    grads.append(score(policy, record))
    stacked = np.stack(grads)
    return float(np.max(stacked.max(axis=0) - stacked.min(axis=0)))


def posterior_invariance_residual(hmm, policies, record):
    """Max spread of the posterior of ``record`` across ``policies``."""
    direct = posterior(hmm, None, record).probs
    rows = [direct] + [bayes_posterior(hmm, p, record) for p in policies]
    stacked = np.stack(rows)
    return float(np.max(stacked.max(axis=0) - stacked.min(axis=0)))


def sampled_records(hmm, policy, horizon, count, seed):
    batch = sample_arrays(hmm, policy, horizon, count, seed)
    return [ObservationRecord(tuple(o), tuple(a)) for o, a in zip(batch.o, batch.a)]


@dataclass(frozen=True)
class GradcheckReport:
    gradient_residual: float
    score_residual: float
    posterior_residual: float
    tolerance: float

    @property
    def passed(self):
        return max(self.gradient_residual, self.score_residual,
                   self.posterior_residual) < self.tolerance

    def lines(self):
        return [
            f"gradient_residual {self.gradient_residual:.3e}",
            f"score_s0_invariance_residual {self.score_residual:.3e}",
            f"posterior_theta_invariance_residual {self.posterior_residual:.3e}",
            f"tolerance {self.tolerance:.1e}",
            "PASS" if self.passed else "FAIL",
        ]


def gradcheck(hmm, policy, horizon, epsilon=1e-5, records=20, seed=0,
              other_thetas=5, tolerance=1e-6, budget=DEFAULT_BUDGET):
    """Run the three identity checks on one model/policy pair."""
    g = gradient_residual(hmm, policy, horizon, epsilon, budget)
    recs = sampled_records(hmm, policy, horizon, records, seed)
    s = max(score_invariance_residual(hmm, policy, r) for r in recs)
    rng = np.random.default_rng([int(seed) & (2 ** 63 - 1), 7])
    others = [policy.with_theta(rng.standard_normal(policy.shape))
              for _ in range(other_thetas)]
    p = max(posterior_invariance_residual(hmm, [policy] + others, r) for r in recs)
    return GradcheckReport(g, s, p, tolerance)
