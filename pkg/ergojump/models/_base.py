"""
Base Pydantic Objects for Containers
"""

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict


class ErgoModel(BaseModel):
    """
    Hashable, Immutable Pydantic Model
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    def __hash__(self) -> int:
        """
        Hash Method for Pydantic BaseModels
        """
        return hash((type(self), self.model_dump_json()))


class ArrayModel(BaseModel):
    """
    Pydantic Model Carrying numpy Arrays and Callables

    Arrays are treated as read-only once the model is built.
    """

    model_config = ConfigDict(
        extra="forbid", frozen=True, arbitrary_types_allowed=True
    )

    def __hash__(self) -> int:
        """
        Identity Hash (arrays and callables are not value-hashable)
        """
        return id(self)


def as_batch(x: Any, dim: int) -> np.ndarray:
    """
    Coerce a point or a stack of points into an (n, dim) float array

    Parameters
    ----------
    x: Any
        A scalar (dim 1), a length-dim vector or an (n, dim) array
    dim: int
        State dimension

    Returns
    -------
    np.ndarray
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.shape[0] == dim else arr.reshape(-1, 1)
    if arr.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr


def as_point(x: Any, dim: int) -> np.ndarray:
    """
    Coerce a single point into a (dim,) float array

    Parameters
    ----------
    x: Any
        A scalar (dim 1) or a length-dim vector
    dim: int
        State dimension

    Returns
    -------
    np.ndarray
    """
    arr = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    if arr.shape[0] == 1 and dim > 1:
        arr = np.full(dim, arr[0])
    if arr.shape[0] != dim:
        raise ValueError(f"expected a point of dimension {dim}, got {arr.shape[0]}")
    return arr
