"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes: InfeasibleMassError -> 2,
SolverFailure -> 3, I/O problems -> 4.
"""


class RinglabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(RinglabError):
    """Non-admissible domain, empty point set or invalid geometry query."""


class GridError(RinglabError):
    """Truncation box or resolution inconsistent with the domain."""


class KernelError(RinglabError):
    """Singular kernel evaluation or out-of-range expansion request."""


class UnsupportedBackendError(RinglabError):
    """Operation asked for on a domain kind it does not support."""


class InfeasibleMassError(RinglabError):
    """Requested vorticity mass exceeds the available measure (lambda too small)."""


class SolverFailure(RinglabError):
    """Linear solve did not reach tolerance; carries the final residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual
