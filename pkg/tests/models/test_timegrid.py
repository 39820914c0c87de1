"""
Run Tests on Jump-Adapted Time Grids
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergojump.exceptions import ParameterError
from ergojump.models.families import mark_kernel
from ergojump.models.timegrid import TimeGrid, sample_jump_times, snap_times, uniform_nodes


def test_uniform_nodes_end_on_the_horizon():
    """
    m = ceil(T / dt) intervals, the last node is T
    """
    nodes = uniform_nodes(1.0, 0.3)
    assert nodes.size == 5
    assert nodes[-1] == 1.0
    assert uniform_nodes(1.0, 0.1).size == 11
    assert uniform_nodes(0.05, 0.1).tolist() == [0.0, 0.05]


def test_uniform_nodes_reject_bad_inputs():
    """
    T and dt must be positive
    """
    with pytest.raises(ParameterError):
        uniform_nodes(0.0, 0.1)
    with pytest.raises(ParameterError):
        uniform_nodes(1.0, -0.1)


def test_snap_times_onto_nodes():
    """
    Times within 1e-9·T of a node land exactly on it
    """
    nodes = uniform_nodes(1.0, 0.1)
    snapped = snap_times([0.3 + 1e-12, 0.45, 0.3], nodes, 1.0)
    assert snapped.size == 2
    assert snapped[0] == nodes[3]
    assert snapped[1] == 0.45
    assert snap_times([0.3, 0.3], nodes, 1.0, unique=False).size == 2


def test_snap_times_reject_times_outside_horizon():
    """
    Times past T are refused
    """
    with pytest.raises(ParameterError):
        snap_times([1.5], uniform_nodes(1.0, 0.1), 1.0)


def test_grid_contains_jumps_exactly_once():
    """
    Jump times become nodes, including one on a uniform node
    """
    nodes = uniform_nodes(1.0, 0.1)
    grid = TimeGrid.build(1.0, 0.1, jump_times=np.array([0.25, nodes[5], 0.55]))
    assert grid.size == 13
    assert grid.nodes[grid.jump_nodes].tolist() == [0.25, nodes[5], 0.55]
    assert np.all(grid.steps > 0)


def test_grid_breakpoints_and_lookup():
    """
    Breakpoints are nodes; other times cannot be looked up
    """
    grid = TimeGrid.build(2.0, 0.5, breakpoints=[0.7, 1.0])
    assert grid.index_of([0.7, 1.0, 2.0]).tolist() == [2, 3, 5]
    with pytest.raises(ParameterError):
        grid.index_of([0.8])


def test_grid_accepts_array_breakpoints():
    """
    Breakpoints may come as an array of several times
    """
    breakpoints = np.concatenate([np.linspace(0.0, 1.0, 11), [0.33]])
    grid = TimeGrid.build(1.0, 0.1, breakpoints=breakpoints)
    assert grid.size == 12
    assert grid.index_of([0.33, 1.0]).tolist() == [4, 11]


def test_sample_without_jumps():
    """
    Rate 0 gives no jumps and an empty mark array
    """
    events = sample_jump_times(mark_kernel("uniform", 0.0, 2), 5.0, np.random.default_rng(0))
    assert events.count == 0
    assert events.marks.shape == (0, 2)


def test_sample_jump_times_are_sorted():
    """
    Jumps fall in (0, T] in increasing order, one mark each
    """
    events = sample_jump_times(mark_kernel("uniform", 5.0, 1), 2.0, np.random.default_rng(3))
    assert events.count > 0
    assert np.all(np.diff(events.times) >= 0)
    assert np.all((events.times > 0) & (events.times <= 2.0))
    assert events.marks.shape == (events.count, 1)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    horizon=st.floats(min_value=0.1, max_value=5.0),
    step=st.floats(min_value=0.01, max_value=0.5),
)
def test_grid_is_jump_adapted(seed: int, horizon: float, step: float):
    """
    Nodes increase strictly, never step more than dt and hold every jump
    """
    events = sample_jump_times(
        mark_kernel("uniform", 3.0, 1), horizon, np.random.default_rng(seed)
    )
    grid = TimeGrid.build(horizon, step, jump_times=events.times)
    assert grid.nodes[0] == 0.0
    assert grid.nodes[-1] == horizon
    assert np.all(grid.steps > 0)
    assert np.all(grid.steps <= step * (1 + 1e-9))
    assert np.array_equal(grid.nodes[grid.jump_nodes], events.times)
