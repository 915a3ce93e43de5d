"""Exception and warning types raised by seqkernels."""


class SeqKernelError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SeqKernelError, ValueError):
    """Symbol dimensions disagree between sequences or symbols."""


class DomainError(SeqKernelError, ValueError):
    """A parameter or index lies outside the domain of a kernel."""


class NormalizationError(SeqKernelError, ValueError):
    """Normalization requested for a sequence with zero self-similarity."""


class UnsupportedError(SeqKernelError, NotImplementedError):
    """Operation not available for the given kernel configuration."""


class FormatError(SeqKernelError, ValueError):
    """Malformed input file.

    Parameters
    ----------
    message : str
        Description of the problem.
    lineno : int, optional
        1-based line number where parsing failed.
    """

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class NumericalError(SeqKernelError, ArithmeticError):
    """A factorization failed even after the jitter schedule."""


class StratificationError(SeqKernelError, ValueError):
    """A class has too few members for the requested number of folds."""


class GrowthWarning(UserWarning):
    """Path-kernel weights grow geometrically with sequence length."""


class JitterWarning(UserWarning):
    """A Gram matrix needed diagonal jitter to be usable."""


class ProvenanceWarning(UserWarning):
    """A stored Gram matrix was computed from different input data."""


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped before reaching its tolerance."""
