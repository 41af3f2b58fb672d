"""Exception hierarchy shared by all modules.

Everything derives from :class:`WHDError`, so callers (the CLI in
particular) can separate domain failures from plain input errors.
"""


class WHDError(Exception):
    """Base class for domain and numerical failures."""


class EmptySetError(WHDError, ValueError):
    """A point set that must be non-empty was empty."""


class EmptyInputError(WHDError, ValueError):
    pass


class NonPositiveValueError(WHDError, ValueError):
    pass


class InvalidMapError(WHDError, ValueError):
    """Probability map has values outside [0, 1] or non-finite entries."""


class NonSmoothModeError(WHDError, ValueError):
    """Gradient requested in exact-min mode."""


class InfeasibleSpecError(WHDError, ValueError):
    pass


class NonFiniteLossError(WHDError, FloatingPointError):
    """Optimization produced NaN/Inf.

    The partial trace recorded up to the failing iteration is attached as
    ``trace`` so the caller can inspect what happened.
    """

    def __init__(self, message, iteration=None, trace=None):
        super().__init__(message)
        self.iteration = iteration
        self.trace = trace


class DegenerateMapError(WHDError, ValueError):
    pass


class InsufficientDataError(WHDError, ValueError):
    pass


class DegenerateFitError(WHDError, RuntimeError):
    pass


class TooFewPointsError(WHDError, ValueError):
    pass


class MaskCountMismatchError(WHDError, ValueError):
    pass
