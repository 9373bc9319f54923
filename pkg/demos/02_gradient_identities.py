"""Checking the entropy gradient three ways on a small random model.

The exact gradient sums H(S0 | y) times the score over every record; finite
differences of the exact entropy should agree to rounding. A Monte-Carlo
estimate from simulated records should land within a few standard errors.
"""

import numpy as np

from activepercept import (
    FiniteStatePolicy,
    Hmm,
    exact_conditional_entropy,
    exact_gradient,
    finite_difference_gradient,
    sampled_gradient,
)
from activepercept.checks import gradcheck

rng = np.random.default_rng(7)
n, n_obs, n_act, horizon = 3, 2, 2, 3
hmm = Hmm(rng.dirichlet(np.ones(n), size=n).T,
          np.stack([rng.dirichlet(np.ones(n_obs), size=n).T for _ in range(n_act)]),
          rng.dirichlet(np.ones(n)))
policy = FiniteStatePolicy.for_hmm(hmm, memory_length=1)
policy = policy.with_theta(rng.standard_normal(policy.shape))

print(f"H(S0 | Y) = {exact_conditional_entropy(hmm, policy, horizon):.6f} bits")
exact = exact_gradient(hmm, policy, horizon).vector
fd = finite_difference_gradient(hmm, policy, horizon)
print("exact gradient:\n", np.round(exact, 6))
print(f"max |exact - finite differences| = {np.max(np.abs(exact - fd)):.2e}")

est = sampled_gradient(hmm, policy, horizon, 20_000, seed=1, with_stderr=True)
z = np.abs(est.vector - exact) / est.stderr
print(f"sampled (M=20000): max deviation {z.max():.2f} standard errors")

print("\n".join(gradcheck(hmm, policy, horizon).lines()))
