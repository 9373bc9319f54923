"""Active-perception policy gradients for inferring the initial state of an HMM.

An observer chooses which sensor to query at every step of a hidden Markov
model whose emissions depend on that choice. The package computes the
conditional entropy of the initial state given the observations, its exact
and sampled gradients with respect to a finite-state softmax policy, and
trains the policy by gradient descent.
"""

__version__ = "0.1.0"

from .exceptions import (
    BudgetExceeded,
    CompileError,
    DomainError,
    ImpossibleObservation,
    TrainingAborted,
    UsageError,
)
from .gradient import (
    GradientEstimate,
    exact_gradient,
    finite_difference_gradient,
    sampled_gradient,
)
from .gridworld import (
    CompiledEnvironment,
    GridWorldSpec,
    compile_gridworld,
    load_spec,
    paper_environment,
    robot_policy,
)
from .hmm import (
    Hmm,
    ObservableOperator,
    load_hmm,
    observable_operator,
    save_hmm,
    sequence_log_likelihood,
    sequence_log_likelihood_from,
)
from .inference import (
    ObservationRecord,
    Posterior,
    entropy_given_observation,
    exact_conditional_entropy,
    joint_log_prob,
    joint_log_prob_given_s0,
    log_policy_prob,
    posterior,
    score,
)
from .optimizer import TrainConfig, TrainLog, random_policy_search, train
from .policy import (
    FiniteStatePolicy,
    act,
    action_distribution,
    load_policy,
    log_policy_gradient,
    memory_update,
    save_policy,
)
from .simulator import Trajectory, sample_batch, sample_trajectory
