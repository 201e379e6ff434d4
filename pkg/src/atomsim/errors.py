"""Exception hierarchy. The CLI maps these onto exit codes."""


class AtomSimError(Exception):
    """Base class for all library errors."""


class NumericalError(AtomSimError):
    """A computation failed numerically (CLI exit code 1)."""


class IntegrationError(NumericalError):
    """Step-size underflow, step budget exhausted, or invariant drift abort."""

    def __init__(self, message, status=None, tau=None):
        super().__init__(message)
        self.status = status
        self.tau = tau


class ParameterizationError(NumericalError):
    """The noncanonical SU(2) chart is singular (|g| too small or the drive vanishes)."""


class DomainError(NumericalError):
    """Input outside the mathematical domain of a formula."""
