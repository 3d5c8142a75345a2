"""Exception types shared across the library."""


class KrigseqError(Exception):
    """Base class for library errors."""


class DimensionMismatchError(KrigseqError, ValueError):
    """Operands have incompatible scenario dimensions."""


class DuplicateDesignPointError(KrigseqError, ValueError):
    """A scenario coincides (within tolerance) with an existing design point."""


class NumericalDegeneracyError(KrigseqError, RuntimeError):
    """Correlation matrix factorization failed even with the nugget."""


class DegenerateCandidateError(KrigseqError, ValueError):
    """Acquisition candidate sits on an observed point; gradient undefined."""


class NoCandidateError(KrigseqError, RuntimeError):
    """Every search start ended degenerate; no proposal available."""


class InvalidConfigurationError(KrigseqError, ValueError):
    """A configuration document is malformed.

    ``field_path`` points at the offending entry, e.g. ``params.tau2``.
    """

    def __init__(self, message, field_path=None):
        super().__init__(message)
        self.field_path = field_path


class SimulationDivergenceError(KrigseqError, RuntimeError):
    """Vehicle simulation produced a non-finite state."""

    def __init__(self, message, step_index):
        super().__init__(f"{message} (step {step_index})")
        self.step_index = step_index
