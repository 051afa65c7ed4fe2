"""Exception hierarchy shared by every module of the package."""


class AsymptError(Exception):
    """Base class for all package errors."""


class DomainError(AsymptError, ValueError):
    """A function was queried outside its domain of definition."""


class DivergentTail(AsymptError):
    """An improper integral over [T, inf) cannot be shown to converge."""


class QuadratureFailure(AsymptError):
    """Adaptive quadrature could not reach the requested tolerance."""


class BadGrid(AsymptError, ValueError):
    """Invalid mesh parameters."""


class GridMismatch(AsymptError, ValueError):
    """Two grid functions do not share the same nodes."""


class BadParam(AsymptError, ValueError):
    """A parameter lies outside its admissible range."""


class NotApplicable(AsymptError):
    """The hypotheses needed by a construction are not satisfied."""


class CandidateOutOfSet(AsymptError):
    """An operator input violates the candidate-set bounds."""


class NoConvergence(AsymptError):
    """Picard iteration failed to contract."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class CriteriaFail(AsymptError):
    """The hypothesis check required by a construction failed."""

    def __init__(self, message, check=None):
        super().__init__(message)
        self.check = check


class StepFailure(AsymptError):
    """The step-size controller of the Runge-Kutta integrator underflowed."""


class OrderingViolated(AsymptError):
    """Subsolution exceeds supersolution at some node."""

    def __init__(self, message, index=None, s=None):
        super().__init__(message)
        self.index = index
        self.s = s


class ExpressionError(AsymptError, ValueError):
    """An expression string is malformed or uses a forbidden construct."""


class ConfigError(AsymptError, ValueError):
    """Invalid run configuration."""
