"""Exception types shared across the package."""


class SimforgeError(Exception):
    """Base class for all package errors."""


class DimensionCapError(SimforgeError):
    """Total Hilbert dimension exceeds the configured assembly cap."""


class NonHermitianError(SimforgeError):
    """A local operator failed the Hermiticity check."""


class ConvergenceError(SimforgeError):
    """Iterative eigensolver did not converge within its iteration budget."""


class AmbiguousCutError(SimforgeError):
    """An eigenvalue lies too close to the requested spectral cut."""


class RankMismatchError(SimforgeError):
    """Low-energy space rank does not match the isometry domain."""


class InterferenceError(SimforgeError):
    """Gadget applications within one round have overlapping heavy supports."""


class RoutingError(SimforgeError):
    """Disjoint-path routing failed after exhausting the retry budget."""


class DomainError(SimforgeError):
    """Fundamental-domain extraction failed or could not be certified."""


class FormatError(SimforgeError):
    """A structured-text document failed to parse or validate."""
