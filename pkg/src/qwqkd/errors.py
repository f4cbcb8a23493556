"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """An input violates a documented precondition (non-unitary matrix,
    non-bijective permutation, out-of-range parameter, malformed config)."""


class QubitRangeError(ValidationError, IndexError):
    """A qubit index falls outside the register."""


class ResourceCapError(RuntimeError):
    """A requested simulation exceeds the configured register-size cap."""


class StatisticalInsufficiencyError(RuntimeError):
    """Too few estimation samples to produce the requested statistics."""


class NumericalDegeneracyError(RuntimeError):
    """All stochastic branches collapsed below numerical resolution."""
