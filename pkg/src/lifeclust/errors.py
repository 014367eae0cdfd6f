"""Exception types shared across the package."""


class DataFormatError(ValueError):
    """An input file or record violates the expected schema."""


class NumericalError(RuntimeError):
    """A computation failed for numerical reasons (bad domain, divergence)."""


class DegenerateClusterError(NumericalError):
    """A cluster has (near) zero effective mass and cannot be compared."""
