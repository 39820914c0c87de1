"""
ergojump Exceptions
"""

from typing import Any, List, Optional, Sequence

from numpy.linalg import LinAlgError


class ErgoJumpError(Exception):
    """
    Base Exception for ergojump
    """


class EnvironmentVariableError(ErgoJumpError, EnvironmentError):
    """
    Malformed ERGOJUMP_* Environment Variable
    """


class DomainError(ErgoJumpError, ValueError):
    """
    Argument Outside the Domain of a Function
    """


class ParameterError(ErgoJumpError, ValueError):
    """
    Model or Experiment Parameter Out of Range
    """


class PreconditionError(ErgoJumpError, ValueError):
    """
    Inputs Violate the Preconditions of a Matrix Identity
    """


class UsageError(ErgoJumpError, ValueError):
    """
    An Estimator Was Called With Incompatible Inputs
    """


class DegenerateDirectionError(ErgoJumpError, ValueError):
    """
    Coupling Direction Undefined Because x == y
    """


class InsufficientSignalError(ErgoJumpError, ValueError):
    """
    Too Few Points Above the Noise Floor to Fit a Rate
    """


class NotPSDError(ErgoJumpError, LinAlgError):
    """
    Matrix Has an Eigenvalue Below the Clipping Tolerance
    """

    def __init__(self, message: str, eigenvalue: float) -> None:
        super().__init__(message)
        self.eigenvalue = eigenvalue


class CouplingDegeneracyError(ErgoJumpError, LinAlgError):
    """
    The Block Covariance of the Coupled Pair Has No Square Root
    """

    def __init__(self, message: str, x: Sequence[float], y: Sequence[float]) -> None:
        super().__init__(message)
        self.x = list(x)
        self.y = list(y)


class NondegeneracyError(ErgoJumpError, LinAlgError):
    """
    Diffusion Matrix Numerically Singular
    """


class EvaluationError(ErgoJumpError, ArithmeticError):
    """
    A Coefficient Returned a Non-Finite Value
    """

    def __init__(self, message: str, point: Sequence[Any]) -> None:
        super().__init__(message)
        self.point = list(point)


class BlowUpError(ErgoJumpError, FloatingPointError):
    """
    A Simulated State Became Non-Finite
    """

    def __init__(self, message: str, time: float) -> None:
        super().__init__(message)
        self.time = time


class ConfigError(ErgoJumpError, ValueError):
    """
    Experiment Configuration Could Not Be Validated

    Every problem found is collected into `errors`, not just the first.
    """

    def __init__(self, errors: List[Any], message: Optional[str] = None) -> None:
        self.errors = list(errors)
        if message is None:
            lines = [f"{len(self.errors)} configuration error(s)"]
            lines.extend(f"  {error}" for error in self.errors)
            message = "\n".join(lines)
        super().__init__(message)
