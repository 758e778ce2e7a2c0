"""Exception types shared across the package."""


class SpecError(ValueError):
    """An invalid distribution, rule, profile or config parameter."""


class SamplingError(RuntimeError):
    """Rejection sampling consumed more base draws than the declared epsilon allows."""


class InfeasibleRegimeError(ValueError):
    """Requested parameters fall outside the regime where a guarantee exists."""


class EnumerationBudgetError(ValueError):
    """Exact enumeration would exceed the tuple budget."""


class OptimizationError(RuntimeError):
    """The center solve did not converge.

    ``best`` holds the best iterate found and ``objective`` its value.
    """

    def __init__(self, message, best=None, objective=None):
        super().__init__(message)
        self.best = best
        self.objective = objective


class ConfigError(SpecError):
    """An experiment config that fails schema or precondition checks."""
