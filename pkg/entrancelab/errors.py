"""
Exception hierarchy for the entrance-measure lab.

Every error raised by the lab derives from LabError so the command-line
runner can map failures to exit codes and name the module that raised them.
"""

from typing import Optional


class LabError(Exception):
    """Base class for all lab errors"""

    def __init__(self, message: str, module: Optional[str] = None):
        super().__init__(message)
        self.module = module


class ConfigurationError(LabError, ValueError):
    """Malformed or inconsistent configuration"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message, module="config")
        self.field = field
        self.line = line


class ArgumentError(LabError, ValueError):
    """Invalid arguments passed to an operation"""


class PreconditionError(LabError):
    """A hypothesis of a contraction or density result does not hold"""

    def __init__(self, inequality: str, detail: str = ""):
        message = f"precondition violated: {inequality}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)
        self.inequality = inequality


class NumericError(LabError, ArithmeticError):
    """Numerical failure: quadrature, positivity or stability"""


class SimulationBlowUp(NumericError):
    """A simulated state left the blow-up threshold"""

    def __init__(self, time: float, block: int, threshold: float):
        super().__init__(
            f"state exceeded {threshold:g} at t={time:.6g} (path block {block}); "
            f"use a truncated or tamed scheme or a smaller step"
        )
        self.time = time
        self.block = block


class DivergenceError(NumericError):
    """A truncated improper integral does not converge"""


class ConvergenceError(NumericError):
    """An iterative estimate failed to become Cauchy"""

    def __init__(self, message: str, cell: Optional[tuple] = None):
        super().__init__(message)
        self.cell = cell


class DegeneracyError(NumericError):
    """Diffusion or density degenerates on the requested interval"""


class UnsupportedError(LabError, NotImplementedError):
    """Requested dimension or order is outside the implemented range"""
