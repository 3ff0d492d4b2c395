"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid physical or geometric input (non-positive coefficient, bad radius, ...)."""


class ConfigError(ValueError):
    """Invalid run configuration; message lists all violations with field paths."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class GridError(ValueError):
    """Grid sizes incompatible with the requested operation."""


class DomainError(ValueError):
    """Field extent does not cover the region required by the operation."""


class AssemblyError(RuntimeError):
    """Operator assembly failed (e.g. missing Fourier coefficients)."""


class NumericError(RuntimeError):
    """A numerical routine failed to converge or produced inconsistent output."""


class DegenerateBandError(NumericError):
    """Group-velocity evaluation hit a degenerate eigenvalue with no usable fallback."""


class SolverError(RuntimeError):
    """The sparse linear solve failed or is unreliable."""
