"""
Run Tests on the Simulation Engine
"""

import logging
from typing import List

import numpy as np
import pytest

from ergojump.exceptions import BlowUpError, ParameterError
from ergojump.models._core import (
    BatchStepper,
    CheckpointRecorder,
    Compensator,
    GridPlan,
    NoiseBatch,
    check_step_size,
    draw_path_noise,
    ensure_finite,
    path_generator,
    run_ensemble,
)
from ergojump.models.coefficients import CoefficientSet
from ergojump.models.simulation import simulate_ensemble


class _BrownianEndpoint(BatchStepper):
    """
    Sums the Gaussian increments, recording the endpoint of every path
    """

    def __init__(self, coeffs: CoefficientSet, batch: NoiseBatch) -> None:
        super().__init__(coeffs, batch)
        self.state = np.zeros(batch.size)
        self.jumps = np.zeros(batch.size, dtype=int)

    def diffuse(self, k: int, h: np.ndarray, normals: np.ndarray, aux: np.ndarray) -> None:
        self.state += np.sqrt(h) * normals[:, 0]

    def jump(self, node: int, rows: np.ndarray, marks: np.ndarray) -> None:
        self.jumps[rows] += 1

    def observe(self, node: int) -> None:
        pass

    def finish(self) -> List[np.ndarray]:
        return [self.state, self.jumps]


def _endpoints(coeffs: CoefficientSet, **options) -> np.ndarray:
    plan = GridPlan.create(1.0, 0.05, width=1)
    chunks = run_ensemble(
        coeffs, plan, 10, 21, lambda batch: _BrownianEndpoint(coeffs, batch), **options
    )
    return np.concatenate([chunk[0] for chunk in chunks])


def test_path_generator_is_keyed_by_index():
    """
    (seed, index) fixes the stream
    """
    first = path_generator(5, 3).random(4)
    assert np.array_equal(first, path_generator(5, 3).random(4))
    assert not np.array_equal(first, path_generator(5, 4).random(4))
    assert not np.array_equal(first, path_generator(6, 3).random(4))


def test_step_guard(jump_ou: CoefficientSet, caplog: pytest.LogCaptureFixture):
    """
    dt above 1/(4·stiffness) raises when strict, warns otherwise
    """
    check_step_size(jump_ou, 0.01)
    with pytest.raises(ParameterError, match="stability envelope"):
        check_step_size(jump_ou, 0.5)
    with caplog.at_level(logging.WARNING):
        check_step_size(jump_ou, 0.5, strict=False)
    assert "stability envelope" in caplog.text


def test_step_guard_without_stiffness(superlinear: CoefficientSet):
    """
    Models without a declared stiffness are not guarded
    """
    assert superlinear.stiffness is None
    check_step_size(superlinear, 1.0)


def test_grid_plan_defaults_to_horizon_checkpoint():
    """
    Without checkpoints the plan records at T only
    """
    plan = GridPlan.create(2.0, 0.1, width=1)
    assert plan.checkpoints.tolist() == [2.0]
    assert plan.breakpoints.size == 0


def test_path_noise_shapes(jump_ou_2d: CoefficientSet):
    """
    One Gaussian row and one auxiliary uniform per interval
    """
    plan = GridPlan.create(1.0, 0.1, width=2, checkpoints=[0.5, 1.0])
    noise = draw_path_noise(plan, jump_ou_2d.kernel, path_generator(0, 0))
    assert noise.normals.shape == (noise.grid.size - 1, 2)
    assert noise.aux.shape == (noise.grid.size - 1,)
    assert noise.grid.nodes[noise.checkpoint_nodes].tolist() == pytest.approx([0.5, 1.0])
    assert noise.marks.shape == (noise.grid.jump_times.size, 2)


def test_path_noise_random_times_come_first(jump_ou: CoefficientSet):
    """
    Per-path random times are drawn before anything else
    """
    plan = GridPlan.create(
        1.0, 0.1, width=1, random_times=lambda rng: rng.uniform(0.0, 1.0, size=2)
    )
    noise = draw_path_noise(plan, jump_ou.kernel, path_generator(9, 2))
    expected = np.sort(path_generator(9, 2).uniform(0.0, 1.0, size=2))
    assert noise.random_times == pytest.approx(expected, abs=1e-9)
    assert noise.grid.nodes[noise.random_nodes] == pytest.approx(noise.random_times)


def test_noise_batch_pads_with_zero_steps(jump_ou: CoefficientSet):
    """
    Shorter grids are padded with zero-length steps
    """
    plan = GridPlan.create(1.0, 0.25, width=1)
    noises = [draw_path_noise(plan, jump_ou.kernel, path_generator(1, i)) for i in range(4)]
    batch = NoiseBatch(list(range(4)), noises, plan)
    assert batch.length == max(noise.grid.size for noise in noises)
    for row, noise in enumerate(noises):
        assert np.all(batch.steps[row, noise.grid.size - 1 :] == 0.0)
        assert batch.is_jump[row].sum() == noise.grid.jump_times.size


def test_checkpoint_recorder_repeats():
    """
    Repeated node indices fill consecutive columns
    """
    recorder = CheckpointRecorder(np.array([[1, 1, 3], [2, 3, 3]]))
    for node in range(4):
        recorder.record(node, np.full(2, float(node)))
    assert recorder.values.tolist() == [[1.0, 1.0, 3.0], [2.0, 3.0, 3.0]]


def test_compensator_closed_form(jump_ou: CoefficientSet):
    """
    The closed form is used when the kernel has one
    """
    compensator = Compensator(jump_ou, [np.random.default_rng(0)])
    assert not compensator.monte_carlo
    value = compensator(np.array([[2.0]]), np.array([0]))
    assert value.tolist() == [[0.0]]


def test_compensator_without_jumps(brownian: CoefficientSet):
    """
    Rate 0 compensates nothing
    """
    compensator = Compensator(brownian, [np.random.default_rng(0)])
    assert compensator(np.ones((1, 1)), np.array([0])).tolist() == [[0.0]]


def test_ensure_finite_reports_earliest_time():
    """
    The earliest bad row names the time
    """
    ensure_finite(np.zeros((2, 1)), np.array([0.1, 0.2]))
    with pytest.raises(BlowUpError) as error:
        ensure_finite(np.array([[np.inf], [np.nan], [0.0]]), np.array([0.4, 0.3, 0.1]))
    assert error.value.time == pytest.approx(0.3)


def test_ensemble_does_not_depend_on_threads(jump_ou: CoefficientSet):
    """
    Threads change the schedule, never the paths
    """
    serial = _endpoints(jump_ou, threads=1, chunk_size=3)
    threaded = _endpoints(jump_ou, threads=3, chunk_size=3)
    assert serial.shape == (10,)
    assert np.array_equal(serial, threaded)


def test_ensemble_does_not_depend_on_chunk_size(jump_ou: CoefficientSet):
    """
    Paths are fixed by the master seed and their index alone
    """
    single, grouped = (
        simulate_ensemble(jump_ou, 1.0, 1.0, 0.05, 9, seed=4, chunk_size=size) for size in (1, 9)
    )
    assert np.array_equal(single.states, grouped.states)
    assert np.array_equal(single.sup_sq, grouped.sup_sq)
    assert np.array_equal(single.jump_counts, grouped.jump_counts)
    assert np.array_equal(single.compensator_stderr, grouped.compensator_stderr)


def test_ensemble_rejects_empty_runs(jump_ou: CoefficientSet):
    """
    At least one path
    """
    with pytest.raises(ParameterError):
        run_ensemble(jump_ou, GridPlan.create(1.0, 0.1, width=1), 0, 0, lambda batch: None)
