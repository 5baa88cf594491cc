"""Exception hierarchy shared by every steering module."""


class SteeringError(Exception):
    """Base class for all errors raised by the steering toolkit."""


class InvalidInputError(SteeringError, ValueError):
    """Malformed input: non-finite entries, wrong shapes, mismatched dimensions, bad JSON."""


class DomainError(SteeringError, ValueError):
    """Input is well formed but lies outside the domain of the requested operation."""


class BracketError(DomainError):
    """Both ends of a bisection bracket fall on the same side of the threshold."""


class PoleError(DomainError):
    """Evaluation at a zero of the coherence amplitude."""


class UnsupportedError(SteeringError, NotImplementedError):
    """A valid request that this toolkit deliberately does not handle."""


class SolverError(SteeringError, RuntimeError):
    """The conic solver failed or returned an unusable status."""
