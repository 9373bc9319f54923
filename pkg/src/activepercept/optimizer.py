"""Fixed-step gradient descent on the conditional entropy, and a random baseline."""

import csv
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .exceptions import TrainingAborted, UsageError
from .gradient import (
    batch_entropies,
    exact_gradient,
    gradient_from_batch,
)
from .inference import DEFAULT_BUDGET, exact_conditional_entropy
from .policy import FiniteStatePolicy
from .rng import derive_key
from .simulator import sample_arrays

# stream-path tags so training, evaluation and search batches never collide
TRAIN_STREAM = 1
EVAL_STREAM = 2
SEARCH_STREAM = 3


@dataclass(frozen=True)
class TrainConfig:
    horizon: int = 10
    samples_per_iter: int = 2000
    iterations: int = 2000
    step_size: float = 0.5
    seed: int = 0
    gradient_mode: str = "sampled"
    log_every: int = 1
    early_stop_tol: Optional[float] = None
    eval_samples: Optional[int] = None
    baseline: bool = False
    threads: int = 1
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.step_size <= 0:
            raise UsageError("step_size must be positive")
        if self.horizon < 0:
            raise UsageError("horizon must be >= 0")
        if self.gradient_mode not in ("sampled", "exact"):
            raise UsageError(f"unknown gradient_mode {self.gradient_mode!r}")
        if self.gradient_mode == "sampled" and self.samples_per_iter < 1:
            raise UsageError("samples_per_iter must be >= 1 in sampled mode")
        if self.iterations < 0 or self.log_every < 1:
            raise UsageError("iterations must be >= 0 and log_every >= 1")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LogEntry:
    iteration: int
    entropy_bits: float
    grad_inf_norm: float
    seconds: float = field(default=0.0, compare=False)


@dataclass
class TrainLog:
    entries: list = field(default_factory=list)
    converged: bool = False

    def append(self, entry):
        if self.entries and entry.iteration <= self.entries[-1].iteration:
            raise ValueError("iteration indices must increase")
        self.entries.append(entry)

    @property
    def entropies(self):
        return np.array([e.entropy_bits for e in self.entries])

    def write_csv(self, path, include_time=False):
        """CSV with header ``iteration,entropy_bits,grad_inf_norm,seconds``.

        Wall time is left blank unless ``include_time`` is set, so that logs of
        identical runs are byte-identical.
        """
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iteration", "entropy_bits", "grad_inf_norm", "seconds"])
            for e in self.entries:
                writer.writerow([e.iteration, repr(float(e.entropy_bits)),
                                 repr(float(e.grad_inf_norm)),
                                 f"{e.seconds:.6f}" if include_time else ""])


def batch_seed(seed, iteration):
    """Seed of the training batch of ``iteration``; depends on nothing else."""
    return int(derive_key(seed, TRAIN_STREAM, iteration))


def _estimate(hmm, policy, config, iteration):
    if config.gradient_mode == "exact":
        return exact_gradient(hmm, policy, config.horizon, config.budget), None
    seed = batch_seed(config.seed, iteration)
    batch = sample_arrays(hmm, policy, config.horizon, config.samples_per_iter, seed,
                          threads=config.threads)
    h = batch_entropies(hmm, batch.o, batch.a, config.threads)
    return gradient_from_batch(policy, batch.q, batch.a, h, config.baseline), seed


def estimate_entropy(hmm, policy, horizon, samples, seed, threads=1):
    """Mean posterior entropy over a sampled batch, with its standard error."""
    batch = sample_arrays(hmm, policy, horizon, samples, seed, threads=threads)
    h = batch_entropies(hmm, batch.o, batch.a, threads)
    se = float(h.std(ddof=1) / np.sqrt(len(h))) if len(h) > 1 else 0.0
    return float(h.mean()), se


def train(hmm, policy, config, callback=None):
    """Run ``config.iterations`` steps of ``theta <- theta - step_size * grad``.

    Returns ``(policy, log)``. Iteration ``tau`` samples its batch from
    :func:`batch_seed` ``(config.seed, tau)``. The logged entropy belongs to
    the parameters before the update: exact in exact mode, otherwise the
    batch mean (or an independent batch of ``eval_samples`` records).
    """
    log = TrainLog()
    start = time.perf_counter()
    for it in range(config.iterations):
        est, seed = _estimate(hmm, policy, config, it)
        grad = est.vector
        if not np.all(np.isfinite(grad)):
            exc = TrainingAborted(
                f"non-finite gradient at iteration {it}", theta=np.array(policy.theta),
                batch_seed=seed, iteration=it)
            exc.log = log
            raise exc
        norm = float(np.max(np.abs(grad)))
        if it % config.log_every == 0 or it == config.iterations - 1:
            entropy = est.entropy_estimate
            if config.eval_samples and config.gradient_mode == "sampled":
                entropy, _ = estimate_entropy(
                    hmm, policy, config.horizon, config.eval_samples,
                    int(derive_key(config.seed, EVAL_STREAM, it)), config.threads)
            log.append(LogEntry(it, entropy, norm, time.perf_counter() - start))
        if callback is not None:
            callback(it, policy, est)
        if config.early_stop_tol is not None and norm < config.early_stop_tol:
            log.converged = True
            break
        policy = policy.with_theta(policy.theta - config.step_size * grad)
    return policy, log


@dataclass(frozen=True, eq=False)
class SearchResult:
    policy: FiniteStatePolicy
    entropy: float
    entropies: np.ndarray
    best_index: int


def random_policy_search(hmm, horizon, trials, seed, memory_length=0,
                         samples=10_000, mode="sampled", threads=1,
                         budget=DEFAULT_BUDGET):
    """Best of ``trials`` policies with theta drawn i.i.d. from N(0, 1).

    Trial ``i`` depends only on ``(seed, i)`` and every trial is scored on the
    same evaluation stream, so results for a prefix of trials are unchanged
    when more trials are added. ``mode`` is ``"sampled"`` (mean entropy over
    ``samples`` records) or ``"exact"``.
    """
    if trials < 1:
        raise UsageError("trials must be >= 1")
    template = FiniteStatePolicy.for_hmm(hmm, memory_length)
    eval_seed = int(derive_key(seed, SEARCH_STREAM, 0))
    policies, entropies = [], []
    for i in range(trials):
        rng = np.random.default_rng([int(seed) & (2 ** 63 - 1), SEARCH_STREAM, i])
        candidate = template.with_theta(rng.standard_normal(template.shape))
        if mode == "exact":
            h = exact_conditional_entropy(hmm, candidate, horizon, budget)
        elif mode == "sampled":
            h, _ = estimate_entropy(hmm, candidate, horizon, samples, eval_seed, threads)
        else:
            raise UsageError(f"unknown mode {mode!r}")
        policies.append(candidate)
        entropies.append(h)
    entropies = np.array(entropies)
    best = int(np.argmin(entropies))
    return SearchResult(policies[best], float(entropies[best]), entropies, best)
