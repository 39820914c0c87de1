"""
Coupled Pairs and the Strong Feller Modulus

The coupled pair (X̃, Ỹ) has the law of the jump SDE in each component. The
two components share their jump marks and their Gaussian increments are
correlated through the cross-covariance

    c(x, y) = λ2·(I - 2·β²·u·u*) + σ_λ(x)·σ_λ(y)*,    u = (x - y) / |x - y|,

with β = (|x0 - y0| / δ)^(α/2). The pair is glued once it comes within
`couple_eps`, from which time on both components follow the same path.
"""

import logging
import math
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field, PositiveFloat, field_validator, model_validator
from scipy import special, stats

from ergojump._config import RunConfig
from ergojump.exceptions import (
    CouplingDegeneracyError,
    DegenerateDirectionError,
    ParameterError,
    UsageError,
)
from ergojump.models._base import ArrayModel, ErgoModel, as_point
from ergojump.models._core import (
    BatchStepper,
    CheckpointRecorder,
    Compensator,
    GridPlan,
    LabCore,
    NoiseBatch,
    check_step_size,
    draw_path_noise,
    ensure_finite,
    run_batch,
    run_ensemble,
)
from ergojump.models._descriptions import _CouplingDescriptions
from ergojump.models._stats import MonteCarloEstimate, Proportion, proportion
from ergojump.models.coefficients import CoefficientSet
from ergojump.models.matops import sigma_lambda, sigma_lambda_stack, sqrt_psd_stack
from ergojump.models.observables import ObservableBase
from ergojump.models.simulation import default_checkpoints, simulate_ensemble
from ergojump.models.timegrid import SNAP_TOLERANCE, TimeGrid

logger = logging.getLogger(__name__)


class CouplingParams(ErgoModel):
    """
    Parameters of the Coupling Construction
    """

    delta: float = Field(description=_CouplingDescriptions.delta)
    alpha: float = Field(RunConfig.DEFAULT_ALPHA, description=_CouplingDescriptions.alpha)
    couple_eps: Optional[PositiveFloat] = Field(
        None, description=_CouplingDescriptions.couple_eps
    )
    x0: List[float]
    y0: List[float]
    bridge_crossing: bool = Field(True, description=_CouplingDescriptions.bridge_crossing)

    @field_validator("delta")
    @classmethod
    def _delta_range(cls, value: float) -> float:
        if not (0.0 < value < RunConfig.DELTA_UPPER):
            raise ValueError(
                f"delta must lie in (0, e^-1) = (0, {RunConfig.DELTA_UPPER:.8f}), got {value}"
            )
        return value

    @field_validator("alpha")
    @classmethod
    def _alpha_range(cls, value: float) -> float:
        if not (0.0 < value < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {value}")
        return value

    @field_validator("x0", "y0", mode="before")
    @classmethod
    def _as_list(cls, value: Any) -> List[float]:
        return [float(item) for item in np.atleast_1d(np.asarray(value, dtype=float))]

    @model_validator(mode="after")
    def _pair_inside_neighbourhood(self) -> "CouplingParams":
        if len(self.x0) != len(self.y0):
            raise ValueError("x0 and y0 must have the same dimension")
        if self.distance > self.delta:
            raise ValueError(
                f"|x0 - y0| = {self.distance:.6g} must not exceed delta = {self.delta}"
            )
        if self.couple_eps is not None:
            ceiling = self.delta * RunConfig.MAX_COUPLE_EPS_FACTOR
            if self.couple_eps > ceiling:
                raise ValueError(
                    f"couple_eps = {self.couple_eps} must not exceed delta·1e-3 = {ceiling:.3g}"
                )
        return self

    @property
    def distance(self) -> float:
        """
        |x0 - y0|
        """
        return float(np.linalg.norm(np.subtract(self.x0, self.y0)))

    @property
    def eps(self) -> float:
        """
        Coalescence threshold, δ·1e-4 unless given
        """
        if self.couple_eps is None:
            return self.delta * RunConfig.COUPLE_EPS_FACTOR
        return float(self.couple_eps)

    @property
    def beta(self) -> float:
        """
        Length (|x0 - y0| / δ)^(α/2) of u_δ
        """
        return (self.distance / self.delta) ** (self.alpha / 2.0)


def _directions(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    diff = x - y
    r = np.linalg.norm(diff, axis=1)
    u = np.divide(diff, r[:, None], out=np.zeros_like(diff), where=r[:, None] > 0)
    return u, r


def _cross_covariance(
    lambda2: float, beta: float, u: np.ndarray, root_x: np.ndarray, root_y: np.ndarray
) -> np.ndarray:
    dim = u.shape[1]
    reflection = np.eye(dim) - 2.0 * beta**2 * np.einsum("ni,nj->nij", u, u)
    return lambda2 * reflection + np.einsum("nik,njk->nij", root_x, root_y)


def _g_bar(
    ax: np.ndarray, ay: np.ndarray, c: np.ndarray, u: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    big_g = ax + ay - c - np.swapaxes(c, 1, 2)
    return big_g, np.einsum("ni,nij,nj->n", u, big_g, u)


def coupling_matrix(x: Any, y: Any, coeffs: CoefficientSet, params: CouplingParams) -> np.ndarray:
    """
    Cross-Covariance c(x, y) of the Coupled Diffusion

    Parameters
    ----------
    x: Any
    y: Any
    coeffs: CoefficientSet
    params: CouplingParams
        Supplies β through (x0, y0, δ, α)

    Returns
    -------
    np.ndarray
        (d, d) matrix

    Raises
    ------
    DegenerateDirectionError
        When x == y
    NotPSDError
        When σσ* - λ2·I is not PSD at x or y
    """
    px, py = as_point(x, coeffs.dim), as_point(y, coeffs.dim)
    if np.array_equal(px, py):
        raise DegenerateDirectionError(f"coupling direction is undefined at x = y = {px.tolist()}")
    u, _ = _directions(px[None], py[None])
    root_x = sigma_lambda(coeffs.sigma(px)[0], coeffs.lambda2).dense()
    root_y = sigma_lambda(coeffs.sigma(py)[0], coeffs.lambda2).dense()
    return _cross_covariance(coeffs.lambda2, params.beta, u, root_x[None], root_y[None])[0]


def block_covariance(
    x: np.ndarray, y: np.ndarray, coeffs: CoefficientSet, beta: float
) -> Dict[str, np.ndarray]:
    """
    Block covariance Σ = [[a(x), c], [c*, a(y)]] of a batch of pairs

    Rows with x == y use u = 0, the synchronous coupling.

    Returns
    -------
    Dict[str, np.ndarray]
        "sigma" (n, 2d, 2d), "c", "u", "r" and "g_bar" (⟨u, G u⟩)
    """
    u, r = _directions(x, y)
    root_x, _ = sigma_lambda_stack(coeffs.sigma(x), coeffs.lambda2)
    root_y, _ = sigma_lambda_stack(coeffs.sigma(y), coeffs.lambda2)
    c = _cross_covariance(coeffs.lambda2, beta, u, root_x, root_y)
    ax, ay = coeffs.a(x), coeffs.a(y)
    top = np.concatenate([ax, c], axis=2)
    bottom = np.concatenate([np.swapaxes(c, 1, 2), ay], axis=2)
    _, g_bar = _g_bar(ax, ay, c, u)
    return {
        "sigma": np.concatenate([top, bottom], axis=1),
        "c": c,
        "u": u,
        "r": r,
        "g_bar": g_bar,
    }


def _coupled_diffusion(
    coeffs: CoefficientSet,
    beta: float,
    x: np.ndarray,
    y: np.ndarray,
    drift_x: np.ndarray,
    drift_y: np.ndarray,
    normals: np.ndarray,
    h: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    dim = coeffs.dim
    block = block_covariance(x, y, coeffs, beta)
    root, _ = sqrt_psd_stack(block["sigma"])
    bad = np.flatnonzero(np.any(np.isnan(root), axis=(1, 2)))
    if bad.size:
        first = bad[0]
        raise CouplingDegeneracyError(
            f"block covariance has no square root at x = {x[first].tolist()}, "
            f"y = {y[first].tolist()}",
            x=x[first],
            y=y[first],
        )
    z = np.einsum("nij,nj->ni", root, normals[:, : 2 * dim]) * np.sqrt(h)[:, None]
    new_x = x + drift_x * h[:, None] + z[:, :dim]
    new_y = y + drift_y * h[:, None] + z[:, dim:]
    return new_x, new_y, block["g_bar"]


def coalesced(
    before: np.ndarray,
    after: np.ndarray,
    g_bar: np.ndarray,
    h: np.ndarray,
    aux: np.ndarray,
    eps: float,
    bridge_crossing: bool = True,
) -> np.ndarray:
    """
    Whether the distance process reached couple_eps during a step

    Parameters
    ----------
    before: np.ndarray
        Differences x - y at the start of the step, (n, d)
    after: np.ndarray
        Differences at the end of the step
    g_bar: np.ndarray
        Variance rate of the distance process at the start of the step
    h: np.ndarray
        Step lengths
    aux: np.ndarray
        One uniform per row deciding the bridge crossing
    eps: float
    bridge_crossing: bool
        Also test the straight segment between the endpoints and the Brownian
        bridge crossing probability exp(-2(r_s - eps)(r_t - eps) / (Ḡ·h))

    Returns
    -------
    np.ndarray
        Boolean per row
    """
    r_t = np.linalg.norm(after, axis=1)
    hit = r_t <= eps
    if not bridge_crossing:
        return hit
    r_s = np.linalg.norm(before, axis=1)
    segment = after - before
    length_sq = np.sum(np.square(segment), axis=1)
    weight = np.divide(
        -np.sum(before * segment, axis=1),
        length_sq,
        out=np.zeros_like(length_sq),
        where=length_sq > 0,
    )
    closest = before + np.clip(weight, 0.0, 1.0)[:, None] * segment
    hit |= np.linalg.norm(closest, axis=1) <= eps
    scale = g_bar * h
    exponent = np.divide(
        -2.0 * np.maximum(r_s - eps, 0.0) * np.maximum(r_t - eps, 0.0),
        scale,
        out=np.full_like(scale, -np.inf),
        where=scale > 0,
    )
    hit |= aux < np.exp(exponent)
    return hit


class CoupledPathRecord(ArrayModel):
    """
    One Coupled Path on its Merged Grid

    `tau` is the first node time with the pair within couple_eps and `s_delta`
    the first node time with distance above δ; both are inf when never reached.
    """

    path_id: int
    grid: TimeGrid
    x_states: np.ndarray
    y_states: np.ndarray
    glued: np.ndarray = Field(description="per-node flag, set from tau on when gluing")
    tau: float
    s_delta: float

    @property
    def distances(self) -> np.ndarray:
        """
        |X̃ - Ỹ| at every node
        """
        return np.linalg.norm(self.x_states - self.y_states, axis=1)


class CoupledEnsemble(ArrayModel):
    """
    Independent Coupled Pairs
    """

    coeffs: CoefficientSet
    params: CouplingParams
    horizon: PositiveFloat
    step: PositiveFloat
    n_paths: int
    master_seed: int
    glue: bool
    checkpoints: np.ndarray
    x_states: np.ndarray
    y_states: np.ndarray
    tau: np.ndarray
    s_delta: np.ndarray
    jump_counts_x: np.ndarray
    jump_counts_y: np.ndarray
    records: List[CoupledPathRecord] = Field(default_factory=list)

    def checkpoint_index(self, t: float) -> int:
        """
        Column of checkpoint t
        """
        distance = np.abs(self.checkpoints - t)
        index = int(np.argmin(distance))
        if distance[index] > SNAP_TOLERANCE * self.horizon:
            raise UsageError(
                f"t = {t} is not a checkpoint; checkpoints are {self.checkpoints.tolist()}"
            )
        return index

    def states_at(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        (X̃_t, Ỹ_t) of every pair at checkpoint t
        """
        column = self.checkpoint_index(t)
        return self.x_states[:, column], self.y_states[:, column]


class CoupledStepper(BatchStepper):
    """
    Coupled Euler Scheme on a Padded Batch
    """

    def __init__(
        self,
        coeffs: CoefficientSet,
        batch: NoiseBatch,
        params: CouplingParams,
        glue: bool = True,
        store_rows: Optional[np.ndarray] = None,
    ) -> None:
        super().__init__(coeffs, batch)
        n, d = batch.size, coeffs.dim
        self.params = params
        self.glue = glue
        self.beta = params.beta
        self.eps = params.eps
        self.x = np.tile(as_point(params.x0, d), (n, 1))
        self.y = np.tile(as_point(params.y0, d), (n, 1))
        self.tau = np.full(n, np.inf)
        self.s_delta = np.full(n, np.inf)
        self.glued = np.zeros(n, dtype=bool)
        self.hit = np.linalg.norm(self.x - self.y, axis=1) <= self.eps
        self.jumps_x = np.zeros(n, dtype=int)
        self.jumps_y = np.zeros(n, dtype=int)
        self.x_checkpoints = CheckpointRecorder(batch.checkpoint_nodes, (d,))
        self.y_checkpoints = CheckpointRecorder(batch.checkpoint_nodes, (d,))
        self.store_rows = np.zeros(0, dtype=int) if store_rows is None else store_rows
        if self.store_rows.size:
            shape = (self.store_rows.size, batch.length, d)
            self.x_path = np.full(shape, np.nan)
            self.y_path = np.full(shape, np.nan)
            self.glued_path = np.zeros(shape[:2], dtype=bool)

    def _marginal(self, rows: np.ndarray, h: np.ndarray, normals: np.ndarray) -> np.ndarray:
        x = self.x[rows]
        dt = h[rows][:, None]
        drift = self.coeffs.b(x) - self.compensator(x, rows)
        noise = np.einsum("nij,nj->ni", self.coeffs.sigma(x), normals[rows, : self.coeffs.dim])
        return x + drift * dt + noise * np.sqrt(dt)

    def diffuse(self, k: int, h: np.ndarray, normals: np.ndarray, aux: np.ndarray) -> None:
        active = h > 0
        times = self.batch.nodes[:, k + 1]
        glued = np.flatnonzero(active & self.glued)
        if glued.size:
            new = self._marginal(glued, h, normals)
            ensure_finite(new, times[glued])
            self.x[glued] = new
            self.y[glued] = new
        free = np.flatnonzero(active & ~self.glued)
        if free.size == 0:
            return
        x, y = self.x[free], self.y[free]
        drift_x = self.coeffs.b(x) - self.compensator(x, free)
        drift_y = self.coeffs.b(y) - self.compensator(y, free)
        new_x, new_y, g_bar = _coupled_diffusion(
            self.coeffs, self.beta, x, y, drift_x, drift_y, normals[free], h[free]
        )
        ensure_finite(new_x, times[free])
        ensure_finite(new_y, times[free])
        open_rows = np.isinf(self.tau[free])
        if np.any(open_rows):
            hit = coalesced(
                (x - y)[open_rows],
                (new_x - new_y)[open_rows],
                g_bar[open_rows],
                h[free][open_rows],
                aux[free][open_rows],
                self.eps,
                self.params.bridge_crossing,
            )
            self.hit[free[open_rows][hit]] = True
        self.x[free] = new_x
        self.y[free] = new_y

    def jump(self, node: int, rows: np.ndarray, marks: np.ndarray) -> None:
        x, y = self.x[rows], self.y[rows]
        new_x = x + self.coeffs.f(x, marks)
        new_y = y + self.coeffs.f(y, marks)
        glued = self.glued[rows]
        new_y[glued] = new_x[glued]
        times = self.batch.nodes[rows, node]
        ensure_finite(new_x, times)
        ensure_finite(new_y, times)
        self.x[rows] = new_x
        self.y[rows] = new_y
        self.jumps_x[rows] += 1
        self.jumps_y[rows] += 1

    def observe(self, node: int) -> None:
        times = self.batch.nodes[:, node]
        new = self.hit & np.isinf(self.tau)
        self.tau[new] = times[new]
        if self.glue:
            self.glued |= new
            self.y[new] = self.x[new]
        self.hit[:] = False
        exceed = (np.linalg.norm(self.x - self.y, axis=1) > self.params.delta) & np.isinf(
            self.s_delta
        )
        self.s_delta[exceed] = times[exceed]
        self.x_checkpoints.record(node, self.x)
        self.y_checkpoints.record(node, self.y)
        if self.store_rows.size:
            self.x_path[:, node] = self.x[self.store_rows]
            self.y_path[:, node] = self.y[self.store_rows]
            self.glued_path[:, node] = self.glued[self.store_rows]

    def records(self) -> List[CoupledPathRecord]:
        out = []
        for position, row in enumerate(self.store_rows):
            grid = self.batch.grids[row]
            out.append(
                CoupledPathRecord(
                    path_id=int(self.batch.path_ids[row]),
                    grid=grid,
                    x_states=self.x_path[position, : grid.size].copy(),
                    y_states=self.y_path[position, : grid.size].copy(),
                    glued=self.glued_path[position, : grid.size].copy(),
                    tau=float(self.tau[row]),
                    s_delta=float(self.s_delta[row]),
                )
            )
        return out

    def finish(self) -> Dict[str, Any]:
        return {
            "x_states": self.x_checkpoints.values,
            "y_states": self.y_checkpoints.values,
            "tau": self.tau,
            "s_delta": self.s_delta,
            "jump_counts_x": self.jumps_x,
            "jump_counts_y": self.jumps_y,
            "records": self.records(),
        }


def coupled_step(
    coeffs: CoefficientSet,
    params: CouplingParams,
    x: Any,
    y: Any,
    step: float,
    rng: np.random.Generator,
    marks: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    One Coupled Euler Step followed by the Step's Shared Jumps

    Parameters
    ----------
    coeffs: CoefficientSet
    params: CouplingParams
    x: Any
    y: Any
    step: float
    rng: np.random.Generator
        Source of the 2d Gaussian variates (and of Monte Carlo compensator marks)
    marks: Optional[np.ndarray]
        (k, mark_dim) marks of the jumps at the end of the step, applied in order

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        The next pair; a pair with x == y moves as a single marginal path
    """
    px, py = as_point(x, coeffs.dim)[None], as_point(y, coeffs.dim)[None]
    compensator = Compensator(coeffs, [rng])
    rows = np.array([0])
    normals = rng.standard_normal((1, 2 * coeffs.dim))
    h = np.array([float(step)])
    drift_x = coeffs.b(px) - compensator(px, rows)
    if np.array_equal(px, py):
        noise = np.einsum("nij,nj->ni", coeffs.sigma(px), normals[:, : coeffs.dim])
        new_x = px + drift_x * step + noise * math.sqrt(step)
        new_y = new_x.copy()
    else:
        drift_y = coeffs.b(py) - compensator(py, rows)
        new_x, new_y, _ = _coupled_diffusion(
            coeffs, params.beta, px, py, drift_x, drift_y, normals, h
        )
    glued = np.array_equal(new_x, new_y)
    for mark in np.asarray(marks if marks is not None else np.zeros((0, 1)), dtype=float):
        new_x = new_x + coeffs.f(new_x, mark[None])
        new_y = new_x.copy() if glued else new_y + coeffs.f(new_y, mark[None])
    return new_x[0], new_y[0]


def _coupled_plan(
    coeffs: CoefficientSet,
    params: CouplingParams,
    horizon: float,
    step: float,
    checkpoints: Optional[Sequence[float]],
) -> GridPlan:
    if len(params.x0) != coeffs.dim:
        raise ParameterError(
            f"coupling pair has dimension {len(params.x0)}, the model has {coeffs.dim}"
        )
    return GridPlan.create(horizon, step, width=2 * coeffs.dim, checkpoints=checkpoints)


def simulate_coupled(
    coeffs: CoefficientSet,
    params: CouplingParams,
    horizon: float,
    step: float,
    rng: np.random.Generator,
    glue: bool = True,
    strict: bool = True,
) -> CoupledPathRecord:
    """
    Simulate one Coupled Pair

    Parameters
    ----------
    coeffs: CoefficientSet
    params: CouplingParams
    horizon: float
    step: float
    rng: np.random.Generator
    glue: bool
        Identify the components from tau on
    strict: bool
        Raise instead of warning when dt exceeds 1/(4·stiffness)

    Returns
    -------
    CoupledPathRecord
    """
    check_step_size(coeffs, step, strict)
    plan = _coupled_plan(coeffs, params, horizon, step, None)
    batch = NoiseBatch([0], [draw_path_noise(plan, coeffs.kernel, rng)], plan)
    stepper = CoupledStepper(coeffs, batch, params, glue=glue, store_rows=np.array([0]))
    return run_batch(stepper)["records"][0]


def simulate_coupled_ensemble(
    coeffs: CoefficientSet,
    params: CouplingParams,
    horizon: float,
    step: float,
    n_paths: int,
    seed: int = 0,
    checkpoints: Optional[Sequence[float]] = None,
    record_paths: int = 0,
    glue: bool = True,
    strict: bool = True,
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> CoupledEnsemble:
    """
    Simulate Independent Coupled Pairs

    Parameters
    ----------
    coeffs: CoefficientSet
    params: CouplingParams
    horizon: float
    step: float
    n_paths: int
    seed: int
    checkpoints: Optional[Sequence[float]]
        Defaults to 11 equally spaced times on [0, T]
    record_paths: int
        Keep full records of the first record_paths pairs
    glue: bool
        Identify the components from tau on; without gluing each component
        keeps the marginal law of the jump SDE
    strict: bool
    threads: Optional[int]
    chunk_size: Optional[int]

    Returns
    -------
    CoupledEnsemble
    """
    check_step_size(coeffs, step, strict)
    if checkpoints is None:
        checkpoints = default_checkpoints(horizon)
    plan = _coupled_plan(coeffs, params, horizon, step, checkpoints)

    def make_stepper(batch: NoiseBatch) -> CoupledStepper:
        store = np.flatnonzero(batch.path_ids < record_paths)
        return CoupledStepper(coeffs, batch, params, glue=glue, store_rows=store)

    chunks = run_ensemble(
        coeffs, plan, n_paths, seed, make_stepper, threads=threads, chunk_size=chunk_size
    )
    ensemble = CoupledEnsemble(
        coeffs=coeffs,
        params=params,
        horizon=horizon,
        step=step,
        n_paths=n_paths,
        master_seed=seed,
        glue=glue,
        checkpoints=plan.checkpoints,
        x_states=np.concatenate([chunk["x_states"] for chunk in chunks]),
        y_states=np.concatenate([chunk["y_states"] for chunk in chunks]),
        tau=np.concatenate([chunk["tau"] for chunk in chunks]),
        s_delta=np.concatenate([chunk["s_delta"] for chunk in chunks]),
        jump_counts_x=np.concatenate([chunk["jump_counts_x"] for chunk in chunks]),
        jump_counts_y=np.concatenate([chunk["jump_counts_y"] for chunk in chunks]),
        records=[record for chunk in chunks for record in chunk["records"]],
    )
    logger.debug(
        "coupled %s pairs of %r: %s coalesced by T",
        n_paths,
        coeffs.label,
        int(np.sum(np.isfinite(ensemble.tau))),
    )
    return ensemble


def estimate_tail(ensemble: CoupledEnsemble, t: float) -> Proportion:
    """
    P̂(τ > t) with a 95% Wilson interval

    Parameters
    ----------
    ensemble: CoupledEnsemble
    t: float
        0 <= t <= T

    Returns
    -------
    Proportion
    """
    if t < 0 or t > ensemble.horizon * (1.0 + SNAP_TOLERANCE):
        raise UsageError(f"t = {t} lies outside [0, {ensemble.horizon}]")
    return proportion(int(np.sum(ensemble.tau > t)), ensemble.n_paths)


def estimate_exit_before_coupling(ensemble: CoupledEnsemble, t: float) -> Proportion:
    """
    P̂((2t) ∧ τ > S_δ): the pair leaves the δ-neighbourhood before coupling

    Parameters
    ----------
    ensemble: CoupledEnsemble
    t: float
        2t must not exceed T

    Returns
    -------
    Proportion
    """
    if t < 0 or 2.0 * t > ensemble.horizon * (1.0 + SNAP_TOLERANCE):
        raise UsageError(f"2t = {2.0 * t} exceeds the horizon {ensemble.horizon}")
    stopped = np.minimum(2.0 * t, ensemble.tau)
    return proportion(int(np.sum(stopped > ensemble.s_delta)), ensemble.n_paths)


def reflected_brownian_tail(distance: float, t: float, variance: float = 1.0) -> float:
    """
    P(τ > t) of reflection-coupled Brownian motions in one dimension

    The difference is distance + 2·B_(variance·t), so the tail is
    erf(distance / sqrt(8·variance·t)).
    """
    if t <= 0:
        return 1.0 if distance > 0 else 0.0
    return float(special.erf(distance / math.sqrt(8.0 * variance * t)))


def proof_alpha(t: float, constant: float, lambda0: float, delta: float) -> float:
    """
    α = exp{-(1 + δ)(|λ0| + 2C)t} / 3
    """
    return math.exp(-(1.0 + delta) * (abs(lambda0) + 2.0 * constant) * t) / 3.0


def distance_moment_bound(
    x0: Any, y0: Any, delta: float, lambda0: float, constant: float, t: float
) -> float:
    """
    Bound (1 + δ)·|x0 - y0|^exp{-(1 + δ)(|λ0|/2 + C)t} on the stopped mean distance
    """
    distance = float(np.linalg.norm(np.subtract(x0, y0)))
    exponent = math.exp(-(1.0 + delta) * (abs(lambda0) / 2.0 + constant) * t)
    return (1.0 + delta) * distance**exponent


def exit_probability_bound(
    x0: Any, y0: Any, delta: float, lambda0: float, constant: float, t: float
) -> float:
    """
    Bound (1 + δ)/δ·|x0 - y0|^exp{-(1 + δ)(|λ0| + 2C)t} on P((2t) ∧ τ > S_δ)
    """
    distance = float(np.linalg.norm(np.subtract(x0, y0)))
    exponent = math.exp(-(1.0 + delta) * (abs(lambda0) + 2.0 * constant) * t)
    return (1.0 + delta) / delta * distance**exponent


class GFunctionals(ErgoModel):
    """
    The Functionals of the Distance Process at a Pair (x, y)
    """

    r: float
    g: float
    g_prime: float
    g_double_prime: float
    G: List[List[float]]
    G_bar: float
    F: float


def g_derivatives(r: float) -> Tuple[float, float, float]:
    """
    g(r) = r/(1 + r) with g' = 1/(1 + r)² and g'' = -2/(1 + r)³
    """
    return r / (1.0 + r), 1.0 / (1.0 + r) ** 2, -2.0 / (1.0 + r) ** 3


def g_functionals(
    x: Any, y: Any, coeffs: CoefficientSet, params: CouplingParams
) -> GFunctionals:
    """
    Evaluate g, its derivatives, G, Ḡ and F at a pair

    Parameters
    ----------
    x: Any
    y: Any
    coeffs: CoefficientSet
    params: CouplingParams

    Returns
    -------
    GFunctionals

    Raises
    ------
    DegenerateDirectionError
        When x == y
    """
    px, py = as_point(x, coeffs.dim), as_point(y, coeffs.dim)
    c = coupling_matrix(px, py, coeffs, params)[None]
    u, r = _directions(px[None], py[None])
    big_g, g_bar = _g_bar(coeffs.a(px), coeffs.a(py), c, u)
    g, g_prime, g_double_prime = g_derivatives(float(r[0]))
    force = float(np.dot(px - py, coeffs.b(px)[0] - coeffs.b(py)[0]))
    return GFunctionals(
        r=float(r[0]),
        g=g,
        g_prime=g_prime,
        g_double_prime=g_double_prime,
        G=big_g[0].tolist(),
        G_bar=float(g_bar[0]),
        F=force,
    )


class StrongFellerReport(ErgoModel):
    """
    Both Sides of |p_t φ(x0) - p_t φ(y0)| <= 2‖φ‖·P(τ > t)
    """

    t: float
    estimator: Literal["paired", "independent"]
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    joint_stderr: float
    phi_sup: float
    tail: Proportion
    holds: bool


def strong_feller_modulus(
    coeffs: CoefficientSet,
    params: CouplingParams,
    t: float,
    phi: ObservableBase,
    n_paths: int,
    step: float,
    seed: int = 0,
    estimator: Literal["paired", "independent"] = "paired",
    strict: bool = True,
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> StrongFellerReport:
    """
    Monte Carlo Both Sides of the Coupling Inequality at Time t

    The paired estimator reads p_t φ(x0) and p_t φ(y0) off the two
    components of the coupled ensemble; the independent estimator uses two
    further single-path ensembles started at x0 and y0.

    Parameters
    ----------
    coeffs: CoefficientSet
    params: CouplingParams
    t: float
    phi: ObservableBase
        Bounded test function
    n_paths: int
    step: float
    seed: int
    estimator: Literal["paired", "independent"]
    strict: bool
    threads: Optional[int]
    chunk_size: Optional[int]

    Returns
    -------
    StrongFellerReport
        `holds` iff lhs <= rhs + 3·joint stderr
    """
    sup = phi.sup_norm
    if not math.isfinite(sup):
        raise UsageError("the strong Feller modulus needs a bounded test function")
    options = {"strict": strict, "threads": threads, "chunk_size": chunk_size}
    coupled = simulate_coupled_ensemble(
        coeffs, params, t, step, n_paths, seed=seed, checkpoints=[t], **options
    )
    x_t, y_t = coupled.states_at(t)
    if estimator == "paired":
        paired = MonteCarloEstimate.from_samples(phi(x_t) - phi(y_t))
        lhs, lhs_stderr = abs(paired.estimate), paired.stderr
    else:
        first = simulate_ensemble(
            coeffs, params.x0, t, step, n_paths, seed=seed + 1, checkpoints=[t], **options
        )
        second = simulate_ensemble(
            coeffs, params.y0, t, step, n_paths, seed=seed + 2, checkpoints=[t], **options
        )
        mean_x = MonteCarloEstimate.from_samples(phi(first.states_at(t)))
        mean_y = MonteCarloEstimate.from_samples(phi(second.states_at(t)))
        lhs = abs(mean_x.estimate - mean_y.estimate)
        lhs_stderr = math.hypot(mean_x.stderr, mean_y.stderr)
    tail = estimate_tail(coupled, t)
    rhs = 2.0 * sup * tail.estimate
    rhs_stderr = 2.0 * sup * tail.stderr
    joint = math.hypot(lhs_stderr, rhs_stderr)
    holds = lhs <= rhs + RunConfig.INCONCLUSIVE_STDERRS * joint
    logger.info("strong Feller check at t = %s: lhs %.4g, rhs %.4g", t, lhs, rhs)
    return StrongFellerReport(
        t=t,
        estimator=estimator,
        lhs=lhs,
        lhs_stderr=lhs_stderr,
        rhs=rhs,
        rhs_stderr=rhs_stderr,
        joint_stderr=joint,
        phi_sup=sup,
        tail=tail,
        holds=holds,
    )


class KSEntry(ErgoModel):
    """
    Two-Sample Kolmogorov-Smirnov Test of one Coordinate
    """

    time: float
    component: Literal["x", "y"]
    coordinate: int
    statistic: float
    pvalue: float


class MarginalKSReport(ErgoModel):
    """
    Unglued Coupled Components Against Single-Path Simulations
    """

    n_paths: int
    threshold: float
    entries: List[KSEntry]
    min_pvalue: float
    passes: bool
    jumps_synchronous: bool


def marginal_ks(
    coeffs: CoefficientSet,
    params: CouplingParams,
    times: Sequence[float],
    n_paths: int,
    step: float,
    seed: int = 0,
    threshold: float = 0.001,
    strict: bool = True,
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> MarginalKSReport:
    """
    Check the marginal condition with two-sample KS tests

    Parameters
    ----------
    coeffs: CoefficientSet
    params: CouplingParams
    times: Sequence[float]
        Checkpoints at which every coordinate of both components is tested
    n_paths: int
    step: float
    seed: int
        Seeds the coupled ensemble; the reference ensembles use seed + 1 and
        seed + 2
    threshold: float
        Smallest acceptable p-value
    strict: bool
    threads: Optional[int]
    chunk_size: Optional[int]

    Returns
    -------
    MarginalKSReport
    """
    horizon = float(max(times))
    options = {"strict": strict, "threads": threads, "chunk_size": chunk_size}
    coupled = simulate_coupled_ensemble(
        coeffs, params, horizon, step, n_paths, seed=seed, checkpoints=times, glue=False, **options
    )
    references = {
        "x": simulate_ensemble(
            coeffs, params.x0, horizon, step, n_paths, seed=seed + 1, checkpoints=times, **options
        ),
        "y": simulate_ensemble(
            coeffs, params.y0, horizon, step, n_paths, seed=seed + 2, checkpoints=times, **options
        ),
    }
    entries = []
    for time in coupled.checkpoints:
        pair = dict(zip(("x", "y"), coupled.states_at(time)))
        for component, reference in references.items():
            single = reference.states_at(time)
            for coordinate in range(coeffs.dim):
                result = stats.ks_2samp(pair[component][:, coordinate], single[:, coordinate])
                entries.append(
                    KSEntry(
                        time=float(time),
                        component=component,
                        coordinate=coordinate,
                        statistic=float(result.statistic),
                        pvalue=float(result.pvalue),
                    )
                )
    min_pvalue = min(entry.pvalue for entry in entries)
    return MarginalKSReport(
        n_paths=n_paths,
        threshold=threshold,
        entries=entries,
        min_pvalue=min_pvalue,
        passes=min_pvalue > threshold,
        jumps_synchronous=bool(np.array_equal(coupled.jump_counts_x, coupled.jump_counts_y)),
    )


class CouplingLab(LabCore):
    """
    Coupling Experiments
    """

    def simulate_coupled_ensemble(
        self, params: CouplingParams, horizon: float, step: float, n_paths: int, **kwargs: Any
    ) -> CoupledEnsemble:
        """
        Simulate coupled pairs with the lab's seed and worker settings
        """
        return simulate_coupled_ensemble(
            self.coeffs,
            params,
            horizon,
            step,
            n_paths,
            seed=self.seed,
            **self.engine_options,
            **kwargs,
        )

    def strong_feller_modulus(
        self,
        params: CouplingParams,
        t: float,
        phi: ObservableBase,
        n_paths: int,
        step: float,
        **kwargs: Any,
    ) -> StrongFellerReport:
        """
        Both sides of the coupling inequality at time t

        Parameters
        ----------
        params: CouplingParams
        t: float
        phi: ObservableBase
        n_paths: int
        step: float
        **kwargs: Any
            Forwarded to `strong_feller_modulus`

        Returns
        -------
        StrongFellerReport
        """
        return strong_feller_modulus(
            self.coeffs,
            params,
            t,
            phi,
            n_paths,
            step,
            seed=self.seed,
            **self.engine_options,
            **kwargs,
        )

    def marginal_ks(
        self,
        params: CouplingParams,
        times: Sequence[float],
        n_paths: int,
        step: float,
        **kwargs: Any,
    ) -> MarginalKSReport:
        """
        Marginal condition check of the unglued coupling
        """
        return marginal_ks(
            self.coeffs,
            params,
            times,
            n_paths,
            step,
            seed=self.seed,
            **self.engine_options,
            **kwargs,
        )
