"""Exception types shared across the package.

The CLI maps these onto exit codes: DataError -> 2, NumericalError -> 3.
"""


class DataError(ValueError):
    """Raised when input data violates a precondition (bad file, bad dates,
    misaligned series, values out of domain)."""


class NumericalError(RuntimeError):
    """Raised when a numerical procedure cannot produce a usable result
    (degenerate variance, optimizer non-convergence, singular information)."""
