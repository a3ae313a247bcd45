"""Exception hierarchy shared by the library modules and the chainlab command."""
from typing import Optional


class SpinChainError(Exception):
    """Base class for every error raised by hamiltonian_learning"""


class DomainError(SpinChainError, ValueError):
    """Input outside the supported domain: sizes, indices, shapes, normalization"""


class ConfigurationError(DomainError):
    """A RunConfig failed validation before any computation started"""


class NumericalError(SpinChainError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable result"""


class ConvergenceError(NumericalError):
    """The eigensolver ran out of iterations before reaching its tolerance"""

    def __init__(self, message: str, iterations: int, residual: float,
                 ritz_value: Optional[float] = None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.ritz_value = ritz_value

    def diagnostics(self) -> dict:
        return {
            'iterations': self.iterations,
            'residual': self.residual,
            'ritz_value': self.ritz_value,
        }
