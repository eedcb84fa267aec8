"""Exception types raised by the estimators."""


class DegenerateInputError(ValueError):
    """Input lies on a degenerate configuration (singular matrix, aligned axes, ...)."""


class OutOfDiskError(ValueError):
    """Frequency point outside the open data disk of radius k0."""


class AmbiguityError(RuntimeError):
    """Data admit more than one solution (symmetric object or non-unique minimum)."""


class EmptySupportError(RuntimeError):
    """No valid samples were available to evaluate a functional."""


class RankDeficiencyError(RuntimeError):
    """A least-squares system does not have full column rank."""


class InsufficientAmplitudeError(RuntimeError):
    """Measured amplitudes are too small to extract a phase."""


class OptimizationFailure(RuntimeError):
    """Iterative optimizer hit a non-finite objective.

    The best vertex seen so far is kept in ``best``.
    """

    def __init__(self, message, best=None, best_value=None):
        super().__init__(message)
        self.best = best
        self.best_value = best_value
