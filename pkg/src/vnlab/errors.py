"""Exception types shared across the package."""


class VnLabError(Exception):
    """Base class for all package errors."""


class InvariantViolation(VnLabError):
    """A constructed state failed one of its structural invariants."""


class LeakageBudgetExceeded(InvariantViolation):
    """Too much probability mass sits in the outer band of a grid."""


class GridTooNarrow(VnLabError):
    """A requested state does not fit inside the grid with safe margins."""


class ShapeMismatch(VnLabError):
    """Array shapes or grids of two objects do not line up."""


class DimensionMismatch(VnLabError):
    """Operator and state dimensions disagree."""


class KernelMismatch(VnLabError):
    """A decoherence kernel was built for a different observable."""


class NonHermitianObservable(VnLabError):
    """An observable matrix is not Hermitian within tolerance."""


class BasisMismatch(VnLabError):
    """A density operator is expressed in the wrong basis for this operation."""


class NegligibleProbability(VnLabError):
    """Conditioning was requested on an outcome of negligible probability."""


class InsufficientSamples(VnLabError):
    """Not enough samples to form the requested finite difference."""


class UnsupportedObservable(VnLabError):
    """The observable kind is not handled by the requested code path."""


class StepSizeTooLarge(VnLabError):
    """An explicit PDE step exceeds its stability bound."""


class ModeCutoffTooSmall(VnLabError):
    """The Fourier mode cutoff drops a non-negligible amount of mass."""


class TruncationTooSmall(VnLabError):
    """A truncated basis leaves too much tail weight."""


class ConfigInvalid(VnLabError):
    """A run configuration failed validation; the message names the field."""


class ToleranceExceeded(VnLabError):
    """At least one executed check failed its tolerance."""
