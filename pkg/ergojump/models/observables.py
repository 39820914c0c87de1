"""
Test Functions φ

Observables are declarative pydantic objects, so they can appear in experiment
configuration files; each evaluates on an (n, d) batch and knows its sup norm.
"""

import math
from typing import Annotated, Any, List, Literal, Union

import numpy as np
from pydantic import Field, NonNegativeInt, PositiveFloat

from ergojump.exceptions import UsageError
from ergojump.models._base import ErgoModel, as_batch


class ObservableBase(ErgoModel):
    """
    Shared Behaviour of the Observables
    """

    def values(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: Any) -> np.ndarray:
        """
        Evaluate on a batch of points, returning shape (n,)
        """
        arr = np.asarray(x, dtype=float)
        batch = arr.reshape(-1, 1) if arr.ndim <= 1 else arr.reshape(-1, arr.shape[-1])
        return np.asarray(self.values(batch), dtype=float).reshape(-1)

    @property
    def sup_norm(self) -> float:
        """
        ‖φ‖_∞
        """
        raise NotImplementedError

    def _coordinate(self, x: np.ndarray, coordinate: int) -> np.ndarray:
        if coordinate >= x.shape[1]:
            raise UsageError(
                f"observable uses coordinate {coordinate} of a {x.shape[1]}-dimensional state"
            )
        return x[:, coordinate]


class ConstantObservable(ObservableBase):
    """
    φ ≡ value
    """

    kind: Literal["constant"] = "constant"
    value: float = 1.0

    def values(self, x: np.ndarray) -> np.ndarray:
        return np.full(x.shape[0], self.value)

    @property
    def sup_norm(self) -> float:
        return abs(self.value)


class TanhObservable(ObservableBase):
    """
    φ(x) = tanh(x_i / scale)
    """

    kind: Literal["tanh"] = "tanh"
    coordinate: NonNegativeInt = 0
    scale: PositiveFloat = 1.0

    def values(self, x: np.ndarray) -> np.ndarray:
        return np.tanh(self._coordinate(x, self.coordinate) / self.scale)

    @property
    def sup_norm(self) -> float:
        return 1.0


class CosineObservable(ObservableBase):
    """
    φ(x) = cos(frequency·x_i + phase)
    """

    kind: Literal["cosine"] = "cosine"
    coordinate: NonNegativeInt = 0
    frequency: float = 1.0
    phase: float = 0.0

    def values(self, x: np.ndarray) -> np.ndarray:
        return np.cos(self.frequency * self._coordinate(x, self.coordinate) + self.phase)

    @property
    def sup_norm(self) -> float:
        return 1.0


class BallIndicator(ObservableBase):
    """
    φ = 1 on the closed ball B(center, radius)
    """

    kind: Literal["ball"] = "ball"
    center: Union[float, List[float]] = 0.0
    radius: PositiveFloat = 1.0

    def values(self, x: np.ndarray) -> np.ndarray:
        center = np.broadcast_to(np.asarray(self.center, dtype=float), (x.shape[1],))
        return (np.linalg.norm(x - center, axis=1) <= self.radius).astype(float)

    @property
    def sup_norm(self) -> float:
        return 1.0


class CoordinateObservable(ObservableBase):
    """
    φ(x) = x_i, unbounded; used by the spectral probe on linear models
    """

    kind: Literal["coordinate"] = "coordinate"
    coordinate: NonNegativeInt = 0

    def values(self, x: np.ndarray) -> np.ndarray:
        return self._coordinate(x, self.coordinate).copy()

    @property
    def sup_norm(self) -> float:
        return math.inf


Observable = Annotated[
    Union[ConstantObservable, TanhObservable, CosineObservable, BallIndicator, CoordinateObservable],
    Field(discriminator="kind"),
]


def evaluate(phi: ObservableBase, x: Any, dim: int) -> np.ndarray:
    """
    Evaluate φ on points of dimension dim
    """
    return phi(as_batch(x, dim))
