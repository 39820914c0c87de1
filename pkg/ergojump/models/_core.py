"""
ergojump Simulation Core

Every simulator in the package (single paths, coupled pairs, controlled bridge
paths) runs on the same jump-adapted engine:

1. each path owns a PCG64 generator derived from (master_seed, path_index) and
   draws, in order: its random checkpoints (if any), its Poisson count, jump
   times, mark uniforms, the Gaussian increments of its merged grid and one
   auxiliary uniform per interval; whatever it draws later (Monte Carlo
   compensator marks) comes from the same generator;
2. paths are grouped in fixed-size chunks, padded to a common grid length and
   stepped together by a `BatchStepper`;
3. chunks run on a thread pool and are reassembled in chunk order.

A path is therefore determined bit-exactly by (master_seed, index), whatever the
chunk size or the number of threads.
"""

import abc
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, List, NamedTuple, Optional, Sequence

import numpy as np
from pydantic import Field, PositiveFloat

from ergojump._config import RunConfig
from ergojump.exceptions import BlowUpError, ParameterError
from ergojump.models._base import ArrayModel
from ergojump.models.coefficients import CoefficientSet, JumpKernel
from ergojump.models.timegrid import TimeGrid, sample_jump_times, snap_times, uniform_nodes

logger = logging.getLogger(__name__)

RandomTimes = Callable[[np.random.Generator], np.ndarray]


def path_generator(master_seed: int, index: int) -> np.random.Generator:
    """
    Generator of path `index`: SeedSequence(master_seed, spawn_key=(index,)) -> PCG64

    Parameters
    ----------
    master_seed: int
    index: int

    Returns
    -------
    np.random.Generator
    """
    sequence = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(sequence))


def check_step_size(coeffs: CoefficientSet, step: float, strict: bool = True) -> None:
    """
    Reject (or warn about) an Euler step above 1 / (4·stiffness)

    Parameters
    ----------
    coeffs: CoefficientSet
    step: float
    strict: bool
        Raise instead of warning

    Raises
    ------
    ParameterError
        When strict and the step exceeds the declared stability envelope
    """
    if coeffs.stiffness is None:
        return
    limit = 1.0 / (RunConfig.STEP_GUARD_FACTOR * coeffs.stiffness)
    if step <= limit:
        return
    message = (
        f"dt = {step:g} exceeds the stability envelope 1/(4·stiffness) = {limit:g} "
        f"of model {coeffs.label!r}"
    )
    if strict:
        raise ParameterError(message)
    logger.warning(message)


class GridPlan(ArrayModel):
    """
    What Every Path Grid of an Experiment Must Contain
    """

    horizon: PositiveFloat
    step: PositiveFloat
    checkpoints: np.ndarray = Field(description="common recording times, snapped and sorted")
    breakpoints: np.ndarray = Field(description="further common grid times")
    width: int = Field(ge=1, description="Gaussian variates per step")
    random_times: Optional[RandomTimes] = Field(
        None, description="per-path recording times, drawn first from the path generator"
    )

    @classmethod
    def create(
        cls,
        horizon: float,
        step: float,
        width: int,
        checkpoints: Optional[Sequence[float]] = None,
        breakpoints: Sequence[float] = (),
        random_times: Optional[RandomTimes] = None,
    ) -> "GridPlan":
        """
        Build a plan, snapping checkpoints and breakpoints onto the uniform grid

        Parameters
        ----------
        horizon: float
        step: float
        width: int
        checkpoints: Optional[Sequence[float]]
            Defaults to [T]
        breakpoints: Sequence[float]
        random_times: Optional[RandomTimes]

        Returns
        -------
        GridPlan
        """
        nodes = uniform_nodes(horizon, step)
        if checkpoints is None:
            checkpoints = [horizon]
        return cls(
            horizon=horizon,
            step=step,
            checkpoints=snap_times(checkpoints, nodes, horizon),
            breakpoints=snap_times(breakpoints, nodes, horizon),
            width=width,
            random_times=random_times,
        )


class PathNoise(NamedTuple):
    """
    Everything one path draws before stepping
    """

    grid: TimeGrid
    marks: np.ndarray
    normals: np.ndarray
    aux: np.ndarray
    checkpoint_nodes: np.ndarray
    random_times: np.ndarray
    random_nodes: np.ndarray
    rng: np.random.Generator


def draw_path_noise(plan: GridPlan, kernel: JumpKernel, rng: np.random.Generator) -> PathNoise:
    """
    Draw the random inputs of one path in the documented order

    Parameters
    ----------
    plan: GridPlan
    kernel: JumpKernel
    rng: np.random.Generator

    Returns
    -------
    PathNoise
    """
    if plan.random_times is not None:
        nodes = uniform_nodes(plan.horizon, plan.step)
        raw = np.clip(np.asarray(plan.random_times(rng), dtype=float), 0.0, plan.horizon)
        extra = snap_times(raw, nodes, plan.horizon, unique=False)
    else:
        extra = np.zeros(0)
    events = sample_jump_times(kernel, plan.horizon, rng)
    grid = TimeGrid.build(
        plan.horizon,
        plan.step,
        jump_times=events.times,
        breakpoints=np.concatenate([plan.checkpoints, plan.breakpoints, extra]),
    )
    normals = rng.standard_normal((grid.size - 1, plan.width))
    aux = rng.random(grid.size - 1)
    return PathNoise(
        grid=grid,
        marks=events.marks,
        normals=normals,
        aux=aux,
        checkpoint_nodes=grid.index_of(plan.checkpoints),
        random_times=extra,
        random_nodes=grid.index_of(extra) if extra.size else np.zeros(0, dtype=int),
        rng=rng,
    )


class NoiseBatch:
    """
    Padded Noise of a Chunk of Paths

    Grids are padded with the horizon, so padded steps have zero length, zero
    Gaussian increment and no jump.
    """

    def __init__(self, path_ids: Sequence[int], noises: Sequence[PathNoise], plan: GridPlan) -> None:
        self.path_ids = np.asarray(path_ids, dtype=int)
        self.plan = plan
        self.grids = [noise.grid for noise in noises]
        self.rngs = [noise.rng for noise in noises]
        n = len(noises)
        self.lengths = np.asarray([noise.grid.size for noise in noises], dtype=int)
        length = int(self.lengths.max())
        mark_dim = noises[0].marks.shape[1]
        self.nodes = np.full((n, length), plan.horizon)
        self.normals = np.zeros((n, length - 1, plan.width))
        self.aux = np.ones((n, length - 1))
        self.is_jump = np.zeros((n, length), dtype=bool)
        self.marks = np.zeros((n, length, mark_dim))
        for row, noise in enumerate(noises):
            size = noise.grid.size
            self.nodes[row, :size] = noise.grid.nodes
            self.normals[row, : size - 1] = noise.normals
            self.aux[row, : size - 1] = noise.aux
            self.is_jump[row, noise.grid.jump_nodes] = True
            self.marks[row, noise.grid.jump_nodes] = noise.marks
        self.steps = np.diff(self.nodes, axis=1)
        self.checkpoint_nodes = np.vstack([noise.checkpoint_nodes for noise in noises])
        self.random_times = np.vstack(
            [noise.random_times.reshape(1, -1) for noise in noises]
        )
        self.random_nodes = np.vstack(
            [noise.random_nodes.reshape(1, -1) for noise in noises]
        )

    @property
    def size(self) -> int:
        """
        Number of paths in the chunk
        """
        return int(self.path_ids.size)

    @property
    def length(self) -> int:
        """
        Padded number of nodes
        """
        return int(self.nodes.shape[1])


class CheckpointRecorder:
    """
    Records per-path values at per-path node indices

    Node indices must be sorted along each row; repeated indices record the
    same value in consecutive columns.
    """

    def __init__(self, node_index: np.ndarray, value_shape: Sequence[int] = ()) -> None:
        self.node_index = np.asarray(node_index, dtype=int)
        n, columns = self.node_index.shape
        self.values = np.full((n, columns, *value_shape), np.nan)
        self.pointer = np.zeros(n, dtype=int)
        self._rows = np.arange(n)

    def record(self, node: int, value: np.ndarray) -> None:
        columns = self.node_index.shape[1]
        if columns == 0:
            return
        while True:
            capped = np.minimum(self.pointer, columns - 1)
            hit = (self.pointer < columns) & (self.node_index[self._rows, capped] == node)
            if not np.any(hit):
                return
            rows = self._rows[hit]
            self.values[rows, self.pointer[rows]] = value[rows]
            self.pointer[rows] += 1


class Compensator:
    """
    Compensator Drift ∫ f(x, u) ν(du) of a Batch

    Uses the kernel's closed form when there is one; otherwise draws
    COMPENSATOR_MARKS fresh marks per path and step from the path's own
    generator and keeps the largest per-step standard error of each path.
    """

    def __init__(self, coeffs: CoefficientSet, rngs: Sequence[np.random.Generator]) -> None:
        self.coeffs = coeffs
        self.rngs = rngs
        self.max_stderr = np.zeros(len(rngs))
        kernel = coeffs.kernel
        self.monte_carlo = kernel.total_rate > 0 and kernel.compensator is None
        if self.monte_carlo:
            logger.warning(
                "model %r has no closed-form compensator, estimating it with %s marks per step",
                coeffs.label,
                RunConfig.COMPENSATOR_MARKS,
            )

    def __call__(self, x: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """
        Compensator drift at x, the states of the batch rows `rows`
        """
        kernel = self.coeffs.kernel
        if kernel.total_rate == 0 or rows.size == 0:
            return np.zeros_like(x)
        if kernel.compensator is not None:
            return np.asarray(kernel.compensator(x), dtype=float).reshape(x.shape)
        n_marks = RunConfig.COMPENSATOR_MARKS
        uniforms = np.concatenate(
            [self.rngs[row].random((n_marks, kernel.uniform_dim)) for row in rows]
        )
        marks = kernel.sample_marks(uniforms)
        values = self.coeffs.f(np.repeat(x, n_marks, axis=0), marks)
        values = values.reshape(rows.size, n_marks, self.coeffs.dim)
        stderr = np.linalg.norm(values.std(axis=1, ddof=1), axis=1) / np.sqrt(n_marks)
        self.max_stderr[rows] = np.maximum(self.max_stderr[rows], kernel.total_rate * stderr)
        return kernel.total_rate * values.mean(axis=1)


def ensure_finite(state: np.ndarray, times: np.ndarray, what: str = "state") -> None:
    """
    Raise BlowUpError at the earliest time a row of `state` is not finite
    """
    flat = state.reshape(state.shape[0], -1)
    bad = ~np.all(np.isfinite(flat), axis=1)
    if np.any(bad):
        time = float(np.min(times[bad]))
        raise BlowUpError(f"{what} is not finite at t = {time:.6g}", time=time)


class BatchStepper(abc.ABC):
    """
    One Simulator Stepping a NoiseBatch

    `run_batch` calls `observe(0)`, then for every interval k: `diffuse(k, ...)`,
    `jump(k + 1, ...)` for the rows with a jump at node k + 1, and
    `observe(k + 1)`.
    """

    def __init__(self, coeffs: CoefficientSet, batch: NoiseBatch) -> None:
        self.coeffs = coeffs
        self.batch = batch
        self.compensator = Compensator(coeffs, batch.rngs)

    @abc.abstractmethod
    def diffuse(self, k: int, h: np.ndarray, normals: np.ndarray, aux: np.ndarray) -> None:
        """
        Advance every row over [t_k, t_(k+1)] without the jump at t_(k+1)
        """

    @abc.abstractmethod
    def jump(self, node: int, rows: np.ndarray, marks: np.ndarray) -> None:
        """
        Apply the jumps at `node` to the given rows
        """

    @abc.abstractmethod
    def observe(self, node: int) -> None:
        """
        Record whatever the simulator keeps at `node`
        """

    @abc.abstractmethod
    def finish(self) -> Any:
        """
        Chunk result
        """


def run_batch(stepper: BatchStepper) -> Any:
    """
    Step a batch through its padded grid

    Parameters
    ----------
    stepper: BatchStepper

    Returns
    -------
    Any
        Whatever `stepper.finish()` returns
    """
    batch = stepper.batch
    stepper.observe(0)
    for k in range(batch.length - 1):
        stepper.diffuse(k, batch.steps[:, k], batch.normals[:, k], batch.aux[:, k])
        rows = np.flatnonzero(batch.is_jump[:, k + 1])
        if rows.size:
            stepper.jump(k + 1, rows, batch.marks[rows, k + 1])
        stepper.observe(k + 1)
    return stepper.finish()


def run_ensemble(
    coeffs: CoefficientSet,
    plan: GridPlan,
    n_paths: int,
    master_seed: int,
    make_stepper: Callable[[NoiseBatch], BatchStepper],
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> List[Any]:
    """
    Simulate n_paths paths chunk by chunk

    Parameters
    ----------
    coeffs: CoefficientSet
    plan: GridPlan
    n_paths: int
    master_seed: int
    make_stepper: Callable[[NoiseBatch], BatchStepper]
    threads: Optional[int]
        Worker threads, see RunConfig.get_threads
    chunk_size: Optional[int]
        Paths per batch, see RunConfig.get_chunk_size

    Returns
    -------
    List[Any]
        Chunk results in path order
    """
    if n_paths < 1:
        raise ParameterError(f"n_paths must be positive, got {n_paths}")
    threads = RunConfig.get_threads(threads)
    chunk_size = RunConfig.get_chunk_size(chunk_size)
    chunks = [
        range(start, min(start + chunk_size, n_paths)) for start in range(0, n_paths, chunk_size)
    ]

    def work(chunk: range) -> Any:
        noises = [
            draw_path_noise(plan, coeffs.kernel, path_generator(master_seed, index))
            for index in chunk
        ]
        batch = NoiseBatch(list(chunk), noises, plan)
        logger.debug(
            "chunk of paths %s-%s: %s nodes", chunk.start, chunk.stop - 1, batch.length
        )
        return run_batch(make_stepper(batch))

    if threads == 1 or len(chunks) == 1:
        return [work(chunk) for chunk in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, chunks))


class LabCore:
    """
    Shared State of the Lab Mixins

    A lab binds a coefficient set to a master seed and to the worker settings
    every experiment method passes to the engine.
    """

    def __init__(
        self,
        coeffs: CoefficientSet,
        seed: int = 0,
        threads: Optional[int] = None,
        chunk_size: Optional[int] = None,
    ) -> None:
        """
        Initialize a Lab

        Parameters
        ----------
        coeffs: CoefficientSet
            Model under study
        seed: int
            Master seed of every experiment run from this lab
        threads: Optional[int]
            Worker threads, defaults to ERGOJUMP_THREADS or 1
        chunk_size: Optional[int]
            Paths per batch, defaults to ERGOJUMP_CHUNK_SIZE or 2048
        """
        self.coeffs = coeffs
        self.seed = seed
        self.threads = RunConfig.get_threads(threads)
        self.chunk_size = RunConfig.get_chunk_size(chunk_size)

    def __repr__(self) -> str:
        """
        String Representation

        Returns
        -------
        str
        """
        return f"<ErgoLab: {self.coeffs.label} seed={self.seed}>"

    @property
    def engine_options(self) -> dict:
        """
        Keyword arguments forwarded to the ensemble runners
        """
        return {"threads": self.threads, "chunk_size": self.chunk_size}
