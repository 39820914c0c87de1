"""
Jump-Adapted Time Grids

The Euler grid of a path is the uniform grid of step dt merged with the exact
jump times of its Poisson process and with any breakpoints (checkpoints, the
bridge start t0) the experiment needs to land on.
"""

import logging
import math
from typing import Iterable, Optional

import numpy as np
from pydantic import Field, PositiveFloat

from ergojump.exceptions import ParameterError
from ergojump.models._base import ArrayModel
from ergojump.models.coefficients import JumpKernel

logger = logging.getLogger(__name__)

SNAP_TOLERANCE = 1e-9


def uniform_nodes(horizon: float, step: float) -> np.ndarray:
    """
    Uniform grid 0 = t_0 < ... < t_m = T with m = ceil(T / dt)

    Parameters
    ----------
    horizon: float
        T > 0
    step: float
        dt > 0

    Returns
    -------
    np.ndarray
    """
    if not (horizon > 0 and step > 0):
        raise ParameterError(f"horizon and step must be positive, got T={horizon}, dt={step}")
    count = max(1, math.ceil(horizon / step - SNAP_TOLERANCE))
    return np.linspace(0.0, horizon, count + 1)


def snap_times(
    times: Iterable[float], nodes: np.ndarray, horizon: float, unique: bool = True
) -> np.ndarray:
    """
    Replace times lying within 1e-9·T of a uniform node by that node

    Parameters
    ----------
    times: Iterable[float]
        Times in [0, T]
    nodes: np.ndarray
        Uniform grid
    horizon: float
    unique: bool
        Drop repeated times

    Returns
    -------
    np.ndarray
        Sorted snapped times
    """
    values = np.asarray(list(times), dtype=float).reshape(-1)
    if values.size == 0:
        return values
    if np.any(values < -SNAP_TOLERANCE * horizon) or np.any(
        values > horizon * (1.0 + SNAP_TOLERANCE)
    ):
        raise ParameterError(f"times must lie in [0, {horizon}], got {values.tolist()}")
    position = np.clip(np.searchsorted(nodes, values), 1, nodes.size - 1)
    left, right = nodes[position - 1], nodes[position]
    nearest = np.where(values - left <= right - values, left, right)
    snapped = np.where(np.abs(nearest - values) <= SNAP_TOLERANCE * horizon, nearest, values)
    snapped = np.sort(np.clip(snapped, 0.0, horizon))
    return np.unique(snapped) if unique else snapped


class JumpEvents(ArrayModel):
    """
    Jump Times of a Poisson Process on (0, T] with their Marks
    """

    times: np.ndarray
    marks: np.ndarray

    @property
    def count(self) -> int:
        """
        Number of jumps
        """
        return int(self.times.size)


def sample_jump_times(kernel: JumpKernel, horizon: float, rng: np.random.Generator) -> JumpEvents:
    """
    Sample a Homogeneous Poisson Process of Rate ν(U_0) on (0, T] with Marks

    The count is drawn first, then the (sorted) times as T·(1 - U), then one
    row of uniforms per mark, which the kernel maps to marks.

    Parameters
    ----------
    kernel: JumpKernel
    horizon: float
    rng: np.random.Generator

    Returns
    -------
    JumpEvents
    """
    rate = kernel.total_rate
    count = int(rng.poisson(rate * horizon)) if rate > 0 else 0
    times = np.sort(horizon * (1.0 - rng.random(count)))
    if count:
        marks = kernel.sample_marks(rng.random((count, kernel.uniform_dim)))
    else:
        marks = np.empty((0, kernel.mark_dim))
    return JumpEvents(times=times, marks=marks)


class TimeGrid(ArrayModel):
    """
    Merged Euler Grid of one Path

    `nodes` is strictly increasing from 0 to T and contains every jump time
    exactly once; `jump_nodes[i]` is the node index of the i-th jump.
    """

    horizon: PositiveFloat
    step: PositiveFloat
    jump_times: np.ndarray
    nodes: np.ndarray
    jump_nodes: np.ndarray = Field(description="node index of every jump time")

    @classmethod
    def build(
        cls,
        horizon: float,
        step: float,
        jump_times: Optional[np.ndarray] = None,
        breakpoints: Optional[Iterable[float]] = None,
    ) -> "TimeGrid":
        """
        Merge the uniform grid with jump times and breakpoints

        Parameters
        ----------
        horizon: float
        step: float
        jump_times: Optional[np.ndarray]
            Sorted jump times in (0, T]
        breakpoints: Optional[Iterable[float]]
            Further times the grid must contain; times within 1e-9·T of a
            uniform node are snapped onto it

        Returns
        -------
        TimeGrid
        """
        uniform = uniform_nodes(horizon, step)
        jumps = np.zeros(0) if jump_times is None else np.asarray(jump_times, dtype=float)
        extra = snap_times(() if breakpoints is None else breakpoints, uniform, horizon)
        nodes = np.unique(np.concatenate([uniform, extra, jumps]))
        jump_nodes = np.searchsorted(nodes, jumps)
        return cls(
            horizon=horizon,
            step=step,
            jump_times=jumps,
            nodes=nodes,
            jump_nodes=jump_nodes,
        )

    @property
    def size(self) -> int:
        """
        Number of nodes
        """
        return int(self.nodes.size)

    @property
    def steps(self) -> np.ndarray:
        """
        Interval lengths between consecutive nodes
        """
        return np.diff(self.nodes)

    def index_of(self, times: Iterable[float]) -> np.ndarray:
        """
        Node index of each time, which must be a node of the grid

        Parameters
        ----------
        times: Iterable[float]

        Returns
        -------
        np.ndarray
        """
        values = np.asarray(list(times), dtype=float).reshape(-1)
        index = np.clip(np.searchsorted(self.nodes, values), 0, self.size - 1)
        below = np.clip(index - 1, 0, self.size - 1)
        closer = np.where(
            np.abs(self.nodes[below] - values) < np.abs(self.nodes[index] - values), below, index
        )
        if np.any(np.abs(self.nodes[closer] - values) > SNAP_TOLERANCE * self.horizon):
            raise ParameterError(f"times {values.tolist()} are not all nodes of the grid")
        return closer
