"""Exception and warning types shared across the package."""


class ScotchTapeError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(ScotchTapeError):
    """Graph and annotation set disagree on the number of nodes."""


class DegenerateNodeError(ScotchTapeError):
    """A physical node has zero total degree; normalized operators are undefined."""


class ParameterError(ScotchTapeError):
    """A parameter is outside its admissible range."""


class InfeasibleSpecError(ScotchTapeError):
    """A block specification cannot be realized as a graph."""


class ConvergenceError(ScotchTapeError):
    """An iterative solver did not reach the requested tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegeneracyError(ScotchTapeError):
    """An operation requires a non-degenerate eigenvalue but found a near tie."""


class IllPosedError(ScotchTapeError):
    """A singular linear system has no solution in the admissible subspace."""


class InstabilityError(ScotchTapeError):
    """Population-dynamics rejection rate exceeded the stability threshold."""

    def __init__(self, message, lam=None, rate=None):
        super().__init__(message)
        self.lam = lam
        self.rate = rate


class NoSolutionError(ScotchTapeError):
    """A root bracket does not straddle a root of the target functional."""

    def __init__(self, message, endpoint_values=None):
        super().__init__(message)
        self.endpoint_values = endpoint_values


class DisconnectedGraphWarning(UserWarning):
    """The scotch-taped graph is disconnected; the top eigenvalue may be degenerate."""


class DegenerateSpectrumWarning(UserWarning):
    """The second and third eigenvalues are within tolerance of each other."""


class IsolatedAnnotatedNodeWarning(UserWarning):
    """A node has no graph edges but carries annotations (degree comes only from labels)."""
