"""Exception types shared across the package."""


class MagflowsError(Exception):
    """Base class for all package errors."""


class ChartDomainError(MagflowsError):
    """A chart point lies outside the domain of the coordinate chart."""


class ReductionError(MagflowsError):
    """Fundamental-domain reduction failed to converge within the word cap."""


class UnsupportedModelError(MagflowsError):
    """The requested operation is not defined for this surface model."""


class ClassificationError(MagflowsError):
    """A generator does not have the determinant class required here."""


class DegenerateInputError(MagflowsError):
    """Input is structurally degenerate (zero matrix, bad shape, bad nodes)."""


class StepSizeError(MagflowsError):
    """The fixed integration step is too large for the local turning rate."""


class ConjugatePointError(MagflowsError):
    """A conjugate point on the horizon invalidates the requested limit."""


class BracketError(MagflowsError):
    """Free-time minimization could not bracket a unimodal minimum."""


class ConvergenceError(MagflowsError):
    """An iterative solver stopped before reaching its tolerance."""


class ConfigError(MagflowsError):
    """Experiment configuration is malformed or incomplete."""
