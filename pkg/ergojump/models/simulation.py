"""
Jump-Adapted Euler Simulation

Between consecutive nodes s < t of the merged grid

    X_t = X_s + (b(X_s) - ∫ f(X_s, u) ν(du))·(t - s) + σ(X_s)·(W_t - W_s)

and at a jump node the mark u of the jump adds f(X_t-, u).
"""

import csv
import logging
import math
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field, PositiveFloat

from ergojump.exceptions import UsageError
from ergojump.models._base import ArrayModel, ErgoModel, as_point
from ergojump.models._core import (
    BatchStepper,
    CheckpointRecorder,
    GridPlan,
    LabCore,
    NoiseBatch,
    RandomTimes,
    check_step_size,
    draw_path_noise,
    ensure_finite,
    path_generator,
    run_batch,
    run_ensemble,
)
from ergojump.models._stats import MonteCarloEstimate, Proportion, proportion
from ergojump.models.coefficients import CoefficientSet
from ergojump.models.timegrid import SNAP_TOLERANCE, TimeGrid

logger = logging.getLogger(__name__)


def default_checkpoints(horizon: float, count: int = 10) -> List[float]:
    """
    count + 1 equally spaced checkpoints on [0, T]
    """
    return [float(t) for t in np.linspace(0.0, horizon, count + 1)]


class PathRecord(ArrayModel):
    """
    One Simulated Path on its Merged Grid

    `states[k]` is the post-jump value at node k; `pre_jump_states[i]` is the
    left limit at the i-th jump.
    """

    path_id: int
    x0: np.ndarray
    grid: TimeGrid
    states: np.ndarray
    pre_jump_states: np.ndarray
    jump_marks: np.ndarray
    compensator_stderr: float = Field(
        0.0, description="largest per-step Monte Carlo stderr of the compensator drift"
    )

    @property
    def jumps(self) -> List[Tuple[float, np.ndarray]]:
        """
        (time, mark) of every jump
        """
        return [(float(t), u) for t, u in zip(self.grid.jump_times, self.jump_marks)]

    @property
    def sup_second_moment(self) -> float:
        """
        max |X|² over the nodes, pre-jump values included
        """
        values = np.concatenate([self.states, self.pre_jump_states])
        return float(np.max(np.sum(np.square(values), axis=1)))


class PathEnsemble(ArrayModel):
    """
    Independent Paths from one Initial Point

    Path i is generated by SeedSequence(master_seed, spawn_key=(i,)).
    """

    coeffs: CoefficientSet
    x0: np.ndarray
    horizon: PositiveFloat
    step: PositiveFloat
    n_paths: int
    master_seed: int
    checkpoints: np.ndarray
    states: np.ndarray = Field(description="(n_paths, n_checkpoints, d) states")
    sup_sq: np.ndarray = Field(description="per-path sup of |X|² over the grid")
    jump_counts: np.ndarray
    compensator_stderr: np.ndarray
    random_times: np.ndarray
    random_states: np.ndarray
    records: List[PathRecord] = Field(default_factory=list)

    def checkpoint_index(self, t: float) -> int:
        """
        Column of checkpoint t

        Raises
        ------
        UsageError
            When t is not a checkpoint
        """
        distance = np.abs(self.checkpoints - t)
        index = int(np.argmin(distance))
        if distance[index] > SNAP_TOLERANCE * self.horizon:
            raise UsageError(
                f"t = {t} is not a checkpoint; checkpoints are {self.checkpoints.tolist()}"
            )
        return index

    def states_at(self, t: float) -> np.ndarray:
        """
        (n_paths, d) states at checkpoint t
        """
        return self.states[:, self.checkpoint_index(t)]


class EulerStepper(BatchStepper):
    """
    Euler Scheme on a Padded Batch
    """

    def __init__(
        self,
        coeffs: CoefficientSet,
        batch: NoiseBatch,
        x0: np.ndarray,
        store_rows: Optional[np.ndarray] = None,
    ) -> None:
        super().__init__(coeffs, batch)
        n, d = batch.size, coeffs.dim
        if x0.ndim == 2:
            self.x = x0[batch.path_ids].copy()
        else:
            self.x = np.tile(x0, (n, 1))
        self.sup_sq = np.sum(np.square(self.x), axis=1)
        self.jump_counts = np.zeros(n, dtype=int)
        self.checkpoints = CheckpointRecorder(batch.checkpoint_nodes, (d,))
        self.random = CheckpointRecorder(batch.random_nodes, (d,))
        self.store_rows = np.zeros(0, dtype=int) if store_rows is None else store_rows
        if self.store_rows.size:
            self.trajectory = np.full((self.store_rows.size, batch.length, d), np.nan)
            self.pre_jump = np.full((self.store_rows.size, batch.length, d), np.nan)

    def _track(self, rows: np.ndarray) -> None:
        self.sup_sq[rows] = np.maximum(
            self.sup_sq[rows], np.sum(np.square(self.x[rows]), axis=1)
        )

    def diffuse(self, k: int, h: np.ndarray, normals: np.ndarray, aux: np.ndarray) -> None:
        rows = np.flatnonzero(h > 0)
        if rows.size == 0:
            return
        x = self.x[rows]
        dt = h[rows][:, None]
        drift = self.coeffs.b(x) - self.compensator(x, rows)
        noise = np.einsum("nij,nj->ni", self.coeffs.sigma(x), normals[rows, : self.coeffs.dim])
        new = x + drift * dt + noise * np.sqrt(dt)
        ensure_finite(new, self.batch.nodes[rows, k + 1])
        self.x[rows] = new
        self._track(rows)

    def jump(self, node: int, rows: np.ndarray, marks: np.ndarray) -> None:
        pre = self.x[rows]
        if self.store_rows.size:
            stored = np.isin(self.store_rows, rows)
            self.pre_jump[stored, node] = self.x[self.store_rows[stored]]
        post = pre + self.coeffs.f(pre, marks)
        ensure_finite(post, self.batch.nodes[rows, node])
        self.x[rows] = post
        self.jump_counts[rows] += 1
        self._track(rows)

    def observe(self, node: int) -> None:
        self.checkpoints.record(node, self.x)
        self.random.record(node, self.x)
        if self.store_rows.size:
            self.trajectory[:, node] = self.x[self.store_rows]

    def records(self) -> List[PathRecord]:
        out = []
        for position, row in enumerate(self.store_rows):
            grid = self.batch.grids[row]
            jumps = grid.jump_nodes
            out.append(
                PathRecord(
                    path_id=int(self.batch.path_ids[row]),
                    x0=self.trajectory[position, 0].copy(),
                    grid=grid,
                    states=self.trajectory[position, : grid.size].copy(),
                    pre_jump_states=self.pre_jump[position, jumps].copy(),
                    jump_marks=self.batch.marks[row, jumps].copy(),
                    compensator_stderr=float(self.compensator.max_stderr[row]),
                )
            )
        return out

    def finish(self) -> Dict[str, Any]:
        return {
            "states": self.checkpoints.values,
            "random_states": self.random.values,
            "random_times": self.batch.random_times,
            "sup_sq": self.sup_sq,
            "jump_counts": self.jump_counts,
            "compensator_stderr": self.compensator.max_stderr,
            "records": self.records(),
        }


def simulate_path(
    coeffs: CoefficientSet,
    x0: Any,
    horizon: float,
    step: float,
    rng: np.random.Generator,
    strict: bool = True,
) -> PathRecord:
    """
    Simulate one Path of the Jump SDE

    Parameters
    ----------
    coeffs: CoefficientSet
    x0: Any
        Initial point
    horizon: float
        T > 0
    step: float
        Base Euler step dt > 0
    rng: np.random.Generator
        Source of the path's jump times, marks and Gaussian increments
    strict: bool
        Raise instead of warning when dt exceeds 1/(4·stiffness)

    Returns
    -------
    PathRecord

    Raises
    ------
    BlowUpError
        When the state stops being finite
    """
    check_step_size(coeffs, step, strict)
    start = as_point(x0, coeffs.dim)
    plan = GridPlan.create(horizon, step, width=coeffs.dim)
    batch = NoiseBatch([0], [draw_path_noise(plan, coeffs.kernel, rng)], plan)
    stepper = EulerStepper(coeffs, batch, start, store_rows=np.array([0]))
    result = run_batch(stepper)
    return result["records"][0]


def simulate_ensemble(
    coeffs: CoefficientSet,
    x0: Any,
    horizon: float,
    step: float,
    n_paths: int,
    seed: int = 0,
    checkpoints: Optional[Sequence[float]] = None,
    record_paths: int = 0,
    random_times: Optional[RandomTimes] = None,
    starts: Optional[Any] = None,
    strict: bool = True,
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> PathEnsemble:
    """
    Simulate Independent Paths from x0

    Parameters
    ----------
    coeffs: CoefficientSet
    x0: Any
    horizon: float
    step: float
    n_paths: int
    seed: int
        Master seed
    checkpoints: Optional[Sequence[float]]
        Recording times, defaults to 11 equally spaced times on [0, T]
    record_paths: int
        Keep full PathRecords of the first record_paths paths
    random_times: Optional[RandomTimes]
        Extra per-path recording times drawn from each path's generator
    starts: Optional[Any]
        (n_paths, d) per-path initial states replacing x0
    strict: bool
        Raise instead of warning when dt exceeds 1/(4·stiffness)
    threads: Optional[int]
    chunk_size: Optional[int]

    Returns
    -------
    PathEnsemble
    """
    check_step_size(coeffs, step, strict)
    start = as_point(x0, coeffs.dim)
    initial = start
    if starts is not None:
        initial = np.asarray(starts, dtype=float).reshape(n_paths, coeffs.dim)
    if checkpoints is None:
        checkpoints = default_checkpoints(horizon)
    plan = GridPlan.create(
        horizon, step, width=coeffs.dim, checkpoints=checkpoints, random_times=random_times
    )

    def make_stepper(batch: NoiseBatch) -> EulerStepper:
        store = np.flatnonzero(batch.path_ids < record_paths)
        return EulerStepper(coeffs, batch, initial, store_rows=store)

    chunks = run_ensemble(
        coeffs, plan, n_paths, seed, make_stepper, threads=threads, chunk_size=chunk_size
    )
    logger.debug("simulated %s paths of %r", n_paths, coeffs.label)
    return PathEnsemble(
        coeffs=coeffs,
        x0=start,
        horizon=horizon,
        step=step,
        n_paths=n_paths,
        master_seed=seed,
        checkpoints=plan.checkpoints,
        states=np.concatenate([chunk["states"] for chunk in chunks]),
        sup_sq=np.concatenate([chunk["sup_sq"] for chunk in chunks]),
        jump_counts=np.concatenate([chunk["jump_counts"] for chunk in chunks]),
        compensator_stderr=np.concatenate([chunk["compensator_stderr"] for chunk in chunks]),
        random_times=np.concatenate([chunk["random_times"] for chunk in chunks]),
        random_states=np.concatenate([chunk["random_states"] for chunk in chunks]),
        records=[record for chunk in chunks for record in chunk["records"]],
    )


def estimate_sup_second_moment(ensemble: PathEnsemble) -> MonteCarloEstimate:
    """
    Monte Carlo estimate of E[sup_(t<=T) |X_t|²]

    The sup runs over every grid node, pre- and post-jump values included.

    Parameters
    ----------
    ensemble: PathEnsemble

    Returns
    -------
    MonteCarloEstimate
    """
    return MonteCarloEstimate.from_samples(ensemble.sup_sq)


def gronwall_second_moment_bound(x0: Any, horizon: float, constant: float) -> float:
    """
    Explicit moment bound (4|x0|² + 1 + 2CT)·e^(2CT)

    Parameters
    ----------
    x0: Any
    horizon: float
    constant: float
        Growth constant C, e.g. λ1

    Returns
    -------
    float
    """
    norm_sq = float(np.sum(np.square(np.asarray(x0, dtype=float))))
    exponent = 2.0 * constant * horizon
    return (4.0 * norm_sq + 1.0 + exponent) * math.exp(exponent)


class MomentCurve(ErgoModel):
    """
    E|X_t|² at every Checkpoint
    """

    times: List[float]
    estimates: List[float]
    stderrs: List[float]


def moment_curve(ensemble: PathEnsemble) -> MomentCurve:
    """
    Second moment with standard errors at every checkpoint

    Parameters
    ----------
    ensemble: PathEnsemble

    Returns
    -------
    MomentCurve
    """
    squares = np.sum(np.square(ensemble.states), axis=2)
    estimates = [MonteCarloEstimate.from_samples(column) for column in squares.T]
    return MomentCurve(
        times=ensemble.checkpoints.tolist(),
        estimates=[item.estimate for item in estimates],
        stderrs=[item.stderr for item in estimates],
    )


def _bound(values: Optional[List[Optional[float]]], dim: int, fill: float) -> np.ndarray:
    if values is None:
        return np.full(dim, fill)
    arr = np.asarray([fill if value is None else value for value in values], dtype=float)
    return np.broadcast_to(arr, (dim,))


class Box(ErgoModel):
    """
    Axis-Aligned Box, Closed, Possibly Unbounded (null bounds are infinite)
    """

    kind: Literal["box"] = "box"
    lower: Optional[List[Optional[float]]] = None
    upper: Optional[List[Optional[float]]] = None

    def contains(self, points: np.ndarray) -> np.ndarray:
        dim = points.shape[1]
        lower = _bound(self.lower, dim, -np.inf)
        upper = _bound(self.upper, dim, np.inf)
        return np.all((points >= lower) & (points <= upper), axis=1)

    def is_whole_space(self) -> bool:
        bounds = (self.lower or []) + (self.upper or [])
        return all(value is None or math.isinf(value) for value in bounds)

    def is_empty(self) -> bool:
        if self.lower is None or self.upper is None:
            return False
        return any(
            lo is not None and hi is not None and lo > hi
            for lo, hi in zip(self.lower, self.upper)
        )


class Ball(ErgoModel):
    """
    Closed Euclidean Ball
    """

    kind: Literal["ball"] = "ball"
    center: List[float]
    radius: float = Field(ge=0.0)

    def contains(self, points: np.ndarray) -> np.ndarray:
        center = np.broadcast_to(np.asarray(self.center, dtype=float), (points.shape[1],))
        return np.linalg.norm(points - center, axis=1) <= self.radius

    def is_whole_space(self) -> bool:
        return math.isinf(self.radius)

    def is_empty(self) -> bool:
        return False


class EmptySet(ErgoModel):
    """
    The Empty Event
    """

    kind: Literal["empty"] = "empty"

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.zeros(points.shape[0], dtype=bool)

    def is_whole_space(self) -> bool:
        return False

    def is_empty(self) -> bool:
        return True


Event = Annotated[Union[Box, Ball, EmptySet], Field(discriminator="kind")]


def estimate_transition(
    ensemble: PathEnsemble, t: float, event: Union[Box, Ball, EmptySet]
) -> Proportion:
    """
    Estimate p_t(x0, E) with a 95% Wilson Interval

    Parameters
    ----------
    ensemble: PathEnsemble
    t: float
        A checkpoint of the ensemble
    event: Union[Box, Ball, EmptySet]

    Returns
    -------
    Proportion
        The whole space and the empty set give the exact intervals [1, 1] and
        [0, 0]

    Raises
    ------
    UsageError
        When t is not a checkpoint
    """
    states = ensemble.states_at(t)
    inside = event.contains(states)
    exact = event.is_whole_space() or event.is_empty()
    return proportion(int(np.sum(inside)), ensemble.n_paths, exact_interval=exact)


def write_ensemble(ensemble: PathEnsemble, path: Union[str, Path]) -> Path:
    """
    Export an Ensemble as Columnar Text

    Comment lines carry the model fingerprint, seed, d, T and dt; the column
    row is `path_id,time,x_0,...,x_(d-1),flag` and every float is written with
    17 significant digits. Full records export every node (a "pre" row before
    the "post" row of each jump node); the other paths export their
    checkpoints with flag "checkpoint".

    Parameters
    ----------
    ensemble: PathEnsemble
    path: Union[str, Path]

    Returns
    -------
    Path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = ensemble.coeffs.dim

    def fmt(value: float) -> str:
        return f"{value:.17g}"

    recorded = {record.path_id for record in ensemble.records}
    with path.open("w", newline="") as handle:
        handle.write(f"# model: {ensemble.coeffs.label}\n")
        handle.write(f"# fingerprint: {ensemble.coeffs.fingerprint()}\n")
        handle.write(f"# seed: {ensemble.master_seed}\n")
        handle.write(f"# d: {dim}\n# T: {fmt(ensemble.horizon)}\n# dt: {fmt(ensemble.step)}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["path_id", "time"] + [f"x_{i}" for i in range(dim)] + ["flag"])
        for record in ensemble.records:
            jump_at = {int(node): i for i, node in enumerate(record.grid.jump_nodes)}
            for node, time in enumerate(record.grid.nodes):
                if node in jump_at:
                    pre = record.pre_jump_states[jump_at[node]]
                    writer.writerow([record.path_id, fmt(time), *map(fmt, pre), "pre"])
                writer.writerow(
                    [record.path_id, fmt(time), *map(fmt, record.states[node]), "post"]
                )
        for path_id in range(ensemble.n_paths):
            if path_id in recorded:
                continue
            for column, time in enumerate(ensemble.checkpoints):
                state = ensemble.states[path_id, column]
                writer.writerow([path_id, fmt(time), *map(fmt, state), "checkpoint"])
    logger.info("wrote %s paths to %s", ensemble.n_paths, path)
    return path


class SimulationLab(LabCore):
    """
    Jump SDE Simulation Experiments
    """

    def simulate_path(self, x0: Any, horizon: float, step: float, path_id: int = 0) -> PathRecord:
        """
        Simulate path `path_id` of the lab's seed

        Parameters
        ----------
        x0: Any
        horizon: float
        step: float
        path_id: int

        Returns
        -------
        PathRecord
        """
        record = simulate_path(self.coeffs, x0, horizon, step, path_generator(self.seed, path_id))
        return record.model_copy(update={"path_id": path_id})

    def simulate_ensemble(
        self, x0: Any, horizon: float, step: float, n_paths: int, **kwargs: Any
    ) -> PathEnsemble:
        """
        Simulate independent paths with the lab's seed and worker settings

        Parameters
        ----------
        x0: Any
        horizon: float
        step: float
        n_paths: int
        **kwargs: Any
            Forwarded to `simulate_ensemble`

        Returns
        -------
        PathEnsemble
        """
        return simulate_ensemble(
            self.coeffs, x0, horizon, step, n_paths, seed=self.seed, **self.engine_options, **kwargs
        )
