"""Exception types shared across the package."""


class ActivePerceptError(Exception):
    """Base class for all package errors."""


class DomainError(ActivePerceptError, ValueError):
    """A symbol, state or memory state outside its alphabet."""


class UsageError(ActivePerceptError, ValueError):
    """Malformed arguments (length mismatch, empty sequences, bad config)."""


class ImpossibleObservation(ActivePerceptError, ValueError):
    """The observation record has probability zero under the model."""


class BudgetExceeded(ActivePerceptError, RuntimeError):
    """Exhaustive enumeration would exceed the configured record budget."""

    def __init__(self, required, budget):
        self.required = required
        self.budget = budget
        super().__init__(
            f"enumeration needs {required} records but the budget is {budget}"
        )


class CompileError(ActivePerceptError, ValueError):
    """A grid-world spec failed validation or compilation."""


class TrainingAborted(ActivePerceptError, RuntimeError):
    """Gradient descent hit a non-finite gradient.

    ``theta`` holds the parameters at the failing iteration and
    ``batch_seed`` the seed of the batch that produced the gradient.
    """

    def __init__(self, message, theta=None, batch_seed=None, iteration=None):
        super().__init__(message)
        self.theta = theta
        self.batch_seed = batch_seed
        self.iteration = iteration
