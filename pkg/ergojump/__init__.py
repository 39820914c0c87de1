"""
Jump SDE Ergodicity Lab
"""

from ._version import __application__, __author__, __email__, __version__
from .exceptions import ErgoJumpError
from .models._lab import ErgoLab
from .models.coefficients import CoefficientSet
from .models.families import build_family

__all__ = [
    "ErgoLab",
    "ErgoJumpError",
    "CoefficientSet",
    "build_family",
    "__application__",
    "__version__",
    "__author__",
    "__email__",
]
