"""Exception hierarchy shared by the engines and the CLI."""


class RGError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DomainError(RGError, ValueError):
    """Argument outside the domain of an operation."""

    exit_code = 2


class ConfigError(RGError, ValueError):
    """Invalid experiment configuration or generator."""

    exit_code = 2


class KernelValidationError(RGError):
    """A kernel failed one of the axioms; carries the validation report."""

    exit_code = 2

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CapExceeded(RGError):
    """An enumeration cap was exceeded; the computation was refused."""

    exit_code = 3


class CoverageError(RGError, KeyError):
    """A Jacobian table lacks an entry needed by a linearization."""

    exit_code = 2

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NumericError(RGError, ArithmeticError):
    """Non-positive frozen partition function or similar numeric failure."""

    exit_code = 4

    def __init__(self, message, sigma_prime=None):
        super().__init__(message)
        self.sigma_prime = sigma_prime
