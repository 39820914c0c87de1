"""
Controlled Bridges and Girsanov Weights

On [0, t0] the controlled process Y follows the jump SDE. At t0 it fixes the
truncated start X_t0^n = X_t0·1{|X_t0| <= n} and from there on the drift gets
the control

    h(t) = (y - start) / (T - t0) - b(J(t)),    J linear from start to y,

so that J solves dJ/dt = b(J) + h exactly. The weight
ξ_t = exp{-∫⟨H, dW⟩ - ½∫|H|² ds} with H = σ(Y)^(-1)·h turns the law of Y back
into the law of X.
"""

import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field, NonNegativeFloat, PositiveFloat, model_validator

from ergojump._config import RunConfig
from ergojump.exceptions import NondegeneracyError, ParameterError
from ergojump.models._base import ArrayModel, ErgoModel, as_point
from ergojump.models._core import (
    BatchStepper,
    CheckpointRecorder,
    GridPlan,
    LabCore,
    NoiseBatch,
    check_step_size,
    draw_path_noise,
    ensure_finite,
    run_batch,
    run_ensemble,
)
from ergojump.models._stats import MonteCarloEstimate, Proportion, proportion
from ergojump.models.coefficients import CoefficientSet
from ergojump.models.observables import ObservableBase
from ergojump.models.simulation import PathRecord

logger = logging.getLogger(__name__)


class BridgeControl(ErgoModel):
    """
    Linear Bridge from the Truncated Start to the Target
    """

    t0: NonNegativeFloat
    horizon: PositiveFloat
    n: NonNegativeFloat = Field(description="truncation level of the start")
    start: List[float]
    target: List[float]

    @model_validator(mode="after")
    def _ordered(self) -> "BridgeControl":
        if not self.t0 < self.horizon:
            raise ValueError(f"t0 = {self.t0} must lie before T = {self.horizon}")
        if len(self.start) != len(self.target):
            raise ValueError("start and target must have the same dimension")
        return self

    @property
    def velocity(self) -> np.ndarray:
        """
        dJ/dt = (y - start) / (T - t0)
        """
        return (np.asarray(self.target) - np.asarray(self.start)) / (self.horizon - self.t0)

    def J(self, t: Any) -> np.ndarray:
        """
        Bridge position at the times t, shape (m, d)
        """
        times = np.atleast_1d(np.asarray(t, dtype=float)).reshape(-1, 1)
        return np.asarray(self.start) + (times - self.t0) * self.velocity

    def h(self, t: Any, coeffs: CoefficientSet) -> np.ndarray:
        """
        Control h(t) = dJ/dt - b(J(t)), shape (m, d)
        """
        return self.velocity - coeffs.b(self.J(t))

    def ode_residual(self, coeffs: CoefficientSet, points: int = 1000) -> float:
        """
        max |dJ/dt - b(J) - h| over a grid, dJ/dt by central differences
        """
        times = np.linspace(self.t0, self.horizon, points)
        step = (self.horizon - self.t0) * 1e-6
        derivative = (self.J(times + step) - self.J(times - step)) / (2.0 * step)
        residual = derivative - coeffs.b(self.J(times)) - self.h(times, coeffs)
        return float(np.max(np.abs(residual)))

    def sup_h(self, coeffs: CoefficientSet, points: int = 1000) -> float:
        """
        sup |h| on [t0, T], over a grid
        """
        times = np.linspace(self.t0, self.horizon, points)
        return float(np.max(np.linalg.norm(self.h(times, coeffs), axis=1)))


def truncate_start(x_t0: np.ndarray, n: float) -> np.ndarray:
    """
    X·1{|X| <= n} row by row
    """
    keep = np.linalg.norm(x_t0, axis=1) <= n
    return np.where(keep[:, None], x_t0, 0.0)


def make_bridge(
    x_t0: Any, n: float, y: Any, t0: float, horizon: float, coeffs: CoefficientSet
) -> BridgeControl:
    """
    Build the Bridge from X_t0

    Parameters
    ----------
    x_t0: Any
        State at t0
    n: float
        Truncation level; the start is 0 when |x_t0| > n
    y: Any
        Target
    t0: float
    horizon: float
    coeffs: CoefficientSet

    Returns
    -------
    BridgeControl
    """
    point = as_point(x_t0, coeffs.dim)
    start = truncate_start(point[None], n)[0]
    return BridgeControl(
        t0=t0,
        horizon=horizon,
        n=n,
        start=start.tolist(),
        target=as_point(y, coeffs.dim).tolist(),
    )


class BridgePlan(ErgoModel):
    """
    What a Controlled Run Needs Before X_t0 Is Known
    """

    target: List[float]
    n: NonNegativeFloat
    t0: NonNegativeFloat
    horizon: PositiveFloat

    @model_validator(mode="after")
    def _ordered(self) -> "BridgePlan":
        if not self.t0 < self.horizon:
            raise ValueError(f"t0 = {self.t0} must lie before T = {self.horizon}")
        return self

    @classmethod
    def create(
        cls,
        x0: Any,
        target: Any,
        horizon: float,
        t0: Optional[float] = None,
        n: Optional[float] = None,
    ) -> "BridgePlan":
        """
        Fill the defaults t0 = 0.9·T and n = 10·(1 + |x0|)
        """
        if t0 is None:
            t0 = RunConfig.T0_FRACTION * horizon
        if n is None:
            n = 10.0 * (1.0 + float(np.linalg.norm(np.atleast_1d(np.asarray(x0, dtype=float)))))
        target_list = [float(v) for v in np.atleast_1d(np.asarray(target, dtype=float))]
        return cls(target=target_list, n=n, t0=t0, horizon=horizon)

    def bridge(self, x_t0: Any, coeffs: CoefficientSet) -> BridgeControl:
        """
        The realised bridge for a state at t0
        """
        return make_bridge(x_t0, self.n, self.target, self.t0, self.horizon, coeffs)


class GirsanovWeight(ArrayModel):
    """
    Running log ξ of one Path at its Grid Nodes
    """

    times: np.ndarray
    log_weights: np.ndarray
    sup_H: float = Field(description="sup of |σ(Y)^-1·h| along the path")

    @property
    def terminal(self) -> float:
        """
        ξ_T
        """
        return float(np.exp(self.log_weights[-1]))


class ControlledEnsemble(ArrayModel):
    """
    Controlled Paths with their Weights
    """

    coeffs: CoefficientSet
    x0: np.ndarray
    plan: BridgePlan
    step: PositiveFloat
    n_paths: int
    master_seed: int
    checkpoints: np.ndarray
    states: np.ndarray
    log_weights: np.ndarray = Field(description="(n_paths, n_checkpoints) log ξ")
    starts: np.ndarray = Field(description="truncated starts X_t0^n")
    x_t0: np.ndarray
    sup_H: np.ndarray
    sup_h: np.ndarray
    records: List[PathRecord] = Field(default_factory=list)
    weights: List[GirsanovWeight] = Field(default_factory=list)

    @property
    def terminal_states(self) -> np.ndarray:
        return self.states[:, -1]

    @property
    def terminal_weights(self) -> np.ndarray:
        return np.exp(self.log_weights[:, -1])


def _kahan_add(
    total: np.ndarray, carry: np.ndarray, rows: np.ndarray, increment: np.ndarray
) -> None:
    adjusted = increment - carry[rows]
    updated = total[rows] + adjusted
    carry[rows] = (updated - total[rows]) - adjusted
    total[rows] = updated


class ControlledStepper(BatchStepper):
    """
    Euler Scheme of the Controlled Process with Weight Accumulation
    """

    def __init__(
        self,
        coeffs: CoefficientSet,
        batch: NoiseBatch,
        x0: np.ndarray,
        plan: BridgePlan,
        store_rows: Optional[np.ndarray] = None,
    ) -> None:
        super().__init__(coeffs, batch)
        n, d = batch.size, coeffs.dim
        self.plan = plan
        self.target = as_point(plan.target, d)
        self.y = np.tile(x0, (n, 1))
        self.t0 = float(batch.plan.breakpoints[0])
        self.t0_node = np.array([grid.index_of([self.t0])[0] for grid in batch.grids])
        self.start = np.full((n, d), np.nan)
        self.x_t0 = np.full((n, d), np.nan)
        self.log_xi = np.zeros(n)
        self.carry = np.zeros(n)
        self.sup_H = np.zeros(n)
        self.sup_h = np.zeros(n)
        self.states = CheckpointRecorder(batch.checkpoint_nodes, (d,))
        self.weights = CheckpointRecorder(batch.checkpoint_nodes)
        self.store_rows = np.zeros(0, dtype=int) if store_rows is None else store_rows
        if self.store_rows.size:
            self.trajectory = np.full((self.store_rows.size, batch.length, d), np.nan)
            self.pre_jump = np.full((self.store_rows.size, batch.length, d), np.nan)
            self.log_path = np.zeros((self.store_rows.size, batch.length))

    def _control(self, rows: np.ndarray, k: int) -> np.ndarray:
        s = self.batch.nodes[rows, k]
        remaining = self.plan.horizon - self.t0
        start = self.start[rows]
        bridge = start + ((s - self.t0) / remaining)[:, None] * (self.target - start)
        return (self.target - start) / remaining - self.coeffs.b(bridge)

    def diffuse(self, k: int, h: np.ndarray, normals: np.ndarray, aux: np.ndarray) -> None:
        rows = np.flatnonzero(h > 0)
        if rows.size == 0:
            return
        y = self.y[rows]
        dt = h[rows]
        sigma = self.coeffs.sigma(y)
        increments = normals[rows, : self.coeffs.dim] * np.sqrt(dt)[:, None]
        drift = self.coeffs.b(y) - self.compensator(y, rows)
        controlled = k >= self.t0_node[rows]
        if np.any(controlled):
            on = rows[controlled]
            control = self._control(on, k)
            sig = sigma[controlled]
            condition = np.linalg.cond(sig)
            if np.any(~(condition <= RunConfig.CONDITION_LIMIT)):
                worst = int(np.argmax(np.nan_to_num(condition, nan=np.inf)))
                raise NondegeneracyError(
                    f"σ(Y) is numerically singular at Y = {y[controlled][worst].tolist()} "
                    f"(condition number {condition[worst]:.3g})"
                )
            big_h = np.linalg.solve(sig, control[..., None])[..., 0]
            ensure_finite(big_h, self.batch.nodes[on, k], what="control H")
            self.sup_H[on] = np.maximum(self.sup_H[on], np.linalg.norm(big_h, axis=1))
            self.sup_h[on] = np.maximum(self.sup_h[on], np.linalg.norm(control, axis=1))
            drift[controlled] += control
            step_log = -np.sum(big_h * increments[controlled], axis=1) - 0.5 * np.sum(
                np.square(big_h), axis=1
            ) * dt[controlled]
            _kahan_add(self.log_xi, self.carry, on, step_log)
        new = y + drift * dt[:, None] + np.einsum("nij,nj->ni", sigma, increments)
        ensure_finite(new, self.batch.nodes[rows, k + 1])
        self.y[rows] = new

    def jump(self, node: int, rows: np.ndarray, marks: np.ndarray) -> None:
        if self.store_rows.size:
            stored = np.isin(self.store_rows, rows)
            self.pre_jump[stored, node] = self.y[self.store_rows[stored]]
        pre = self.y[rows]
        post = pre + self.coeffs.f(pre, marks)
        ensure_finite(post, self.batch.nodes[rows, node])
        self.y[rows] = post

    def observe(self, node: int) -> None:
        at_t0 = self.t0_node == node
        if np.any(at_t0):
            self.x_t0[at_t0] = self.y[at_t0]
            self.start[at_t0] = truncate_start(self.y[at_t0], self.plan.n)
        self.states.record(node, self.y)
        self.weights.record(node, self.log_xi)
        if self.store_rows.size:
            self.trajectory[:, node] = self.y[self.store_rows]
            self.log_path[:, node] = self.log_xi[self.store_rows]

    def finish(self) -> Dict[str, Any]:
        records, weights = [], []
        for position, row in enumerate(self.store_rows):
            grid = self.batch.grids[row]
            records.append(
                PathRecord(
                    path_id=int(self.batch.path_ids[row]),
                    x0=self.trajectory[position, 0].copy(),
                    grid=grid,
                    states=self.trajectory[position, : grid.size].copy(),
                    pre_jump_states=self.pre_jump[position, grid.jump_nodes].copy(),
                    jump_marks=self.batch.marks[row, grid.jump_nodes].copy(),
                    compensator_stderr=float(self.compensator.max_stderr[row]),
                )
            )
            weights.append(
                GirsanovWeight(
                    times=grid.nodes,
                    log_weights=self.log_path[position, : grid.size].copy(),
                    sup_H=float(self.sup_H[row]),
                )
            )
        return {
            "states": self.states.values,
            "log_weights": self.weights.values,
            "starts": self.start,
            "x_t0": self.x_t0,
            "sup_H": self.sup_H,
            "sup_h": self.sup_h,
            "records": records,
            "weights": weights,
        }


def _controlled_plan(
    coeffs: CoefficientSet, plan: BridgePlan, step: float, checkpoints: Optional[Sequence[float]]
) -> GridPlan:
    if len(plan.target) not in (1, coeffs.dim):
        raise ParameterError(f"target has dimension {len(plan.target)}, the model has {coeffs.dim}")
    times = sorted({*(() if checkpoints is None else checkpoints), plan.t0, plan.horizon})
    return GridPlan.create(
        plan.horizon, step, width=coeffs.dim, checkpoints=times, breakpoints=[plan.t0]
    )


def simulate_controlled(
    coeffs: CoefficientSet,
    x0: Any,
    plan: BridgePlan,
    step: float,
    rng: np.random.Generator,
    strict: bool = True,
) -> Tuple[PathRecord, GirsanovWeight]:
    """
    Simulate one Controlled Path and its Weight

    Parameters
    ----------
    coeffs: CoefficientSet
    x0: Any
    plan: BridgePlan
    step: float
    rng: np.random.Generator
    strict: bool

    Returns
    -------
    Tuple[PathRecord, GirsanovWeight]

    Raises
    ------
    NondegeneracyError
        When σ(Y) is numerically singular after t0
    """
    check_step_size(coeffs, step, strict)
    grid_plan = _controlled_plan(coeffs, plan, step, None)
    batch = NoiseBatch([0], [draw_path_noise(grid_plan, coeffs.kernel, rng)], grid_plan)
    stepper = ControlledStepper(
        coeffs, batch, as_point(x0, coeffs.dim), plan, store_rows=np.array([0])
    )
    result = run_batch(stepper)
    return result["records"][0], result["weights"][0]


def simulate_controlled_ensemble(
    coeffs: CoefficientSet,
    x0: Any,
    plan: BridgePlan,
    step: float,
    n_paths: int,
    seed: int = 0,
    checkpoints: Optional[Sequence[float]] = None,
    record_paths: int = 0,
    strict: bool = True,
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> ControlledEnsemble:
    """
    Simulate Independent Controlled Paths

    t0 and T are always checkpoints.

    Parameters
    ----------
    coeffs: CoefficientSet
    x0: Any
    plan: BridgePlan
    step: float
    n_paths: int
    seed: int
    checkpoints: Optional[Sequence[float]]
    record_paths: int
    strict: bool
    threads: Optional[int]
    chunk_size: Optional[int]

    Returns
    -------
    ControlledEnsemble
    """
    check_step_size(coeffs, step, strict)
    start = as_point(x0, coeffs.dim)
    grid_plan = _controlled_plan(coeffs, plan, step, checkpoints)

    def make_stepper(batch: NoiseBatch) -> ControlledStepper:
        store = np.flatnonzero(batch.path_ids < record_paths)
        return ControlledStepper(coeffs, batch, start, plan, store_rows=store)

    chunks = run_ensemble(
        coeffs, grid_plan, n_paths, seed, make_stepper, threads=threads, chunk_size=chunk_size
    )

    def gather(key: str) -> np.ndarray:
        return np.concatenate([chunk[key] for chunk in chunks])

    return ControlledEnsemble(
        coeffs=coeffs,
        x0=start,
        plan=plan,
        step=step,
        n_paths=n_paths,
        master_seed=seed,
        checkpoints=grid_plan.checkpoints,
        states=gather("states"),
        log_weights=gather("log_weights"),
        starts=gather("starts"),
        x_t0=gather("x_t0"),
        sup_H=gather("sup_H"),
        sup_h=gather("sup_h"),
        records=[record for chunk in chunks for record in chunk["records"]],
        weights=[weight for chunk in chunks for weight in chunk["weights"]],
    )


def bihari_bound(e0: float, constant: float, lambda0: float, t0: float, horizon: float) -> float:
    """
    Bihari bound [e0 + C·(T - t0)]^exp(-|λ0|·(T - t0)) on E|Y_T - y|²

    Parameters
    ----------
    e0: float
        E|X_t0 - X_t0^n|²
    constant: float
        C
    lambda0: float
    t0: float
    horizon: float

    Returns
    -------
    float
    """
    if e0 < 0:
        raise ParameterError(f"e0 must be non-negative, got {e0}")
    if not horizon > t0:
        raise ParameterError(f"T = {horizon} must exceed t0 = {t0}")
    span = horizon - t0
    return (e0 + constant * span) ** math.exp(-abs(lambda0) * span)


def calibrate_bihari_constant(
    coeffs: CoefficientSet, bridge_sup_h: float, start_norm: float, target_norm: float
) -> float:
    """
    Conservative C = 2λ1·(1 + R)² + sup|h|² with R = max(|start|, |y|) + 1
    """
    reach = max(start_norm, target_norm) + 1.0
    return 2.0 * coeffs.lambda1 * (1.0 + reach) ** 2 + bridge_sup_h**2


def reweighted_expectation(ensemble: ControlledEnsemble, phi: ObservableBase) -> MonteCarloEstimate:
    """
    E[ξ_T·φ(Y_T)], an estimate of E[φ(X_T)]
    """
    return MonteCarloEstimate.from_samples(
        ensemble.terminal_weights * phi(ensemble.terminal_states)
    )


class WeightMartingaleReport(ErgoModel):
    """
    E[ξ_t] at every Checkpoint
    """

    times: List[float]
    estimates: List[MonteCarloEstimate]
    holds: bool = Field(description="every estimate lies within 3 stderr of 1")


def weight_martingale_check(ensemble: ControlledEnsemble) -> WeightMartingaleReport:
    """
    Check that ξ is a mean-one martingale at the checkpoints

    Parameters
    ----------
    ensemble: ControlledEnsemble

    Returns
    -------
    WeightMartingaleReport
    """
    estimates = [
        MonteCarloEstimate.from_samples(np.exp(column)) for column in ensemble.log_weights.T
    ]
    stderrs = RunConfig.INCONCLUSIVE_STDERRS
    holds = all(
        estimate.contains(1.0, stderrs) or abs(estimate.estimate - 1.0) < 1e-12
        for estimate in estimates
    )
    return WeightMartingaleReport(
        times=ensemble.checkpoints.tolist(), estimates=estimates, holds=holds
    )


def terminal_spread(ensemble: ControlledEnsemble) -> MonteCarloEstimate:
    """
    E|Y_T - y|²
    """
    target = as_point(ensemble.plan.target, ensemble.coeffs.dim)
    return MonteCarloEstimate.from_samples(
        np.sum(np.square(ensemble.terminal_states - target), axis=1)
    )


class IrreducibilityReport(ErgoModel):
    """
    Evidence that p_T(x0, B(y, a)) > 0
    """

    x0: List[float]
    target: List[float]
    radius: float
    horizon: float
    t0: float
    n: float
    step: float
    n_paths: int
    seed: int
    miss: Proportion
    truncation_error: MonteCarloEstimate = Field(description="E|X_t0 - X_t0^n|²")
    bihari_constant: float
    bihari_bound: float
    chebyshev_bound: float
    miss_within_bound: bool
    weighted: MonteCarloEstimate
    weighted_lower: float
    weighted_upper: float
    weight_mean: MonteCarloEstimate
    sup_H: float
    demonstrated: bool
    note: Optional[str] = None


def irreducibility_probe(
    coeffs: CoefficientSet,
    x0: Any,
    target: Any,
    radius: float,
    horizon: float,
    step: float,
    n_paths: int,
    t0: Optional[float] = None,
    n: Optional[float] = None,
    seed: int = 0,
    strict: bool = True,
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> IrreducibilityReport:
    """
    Probe Irreducibility with the Controlled Bridge

    Reports the direct miss probability P(|Y_T - y| >= a), the
    Chebyshev/Bihari bound on it, and the weighted estimate
    mean(ξ_T·1{Y_T ∈ B(y, a)}) of p_T(x0, B(y, a)) with a normal 95% interval;
    a positive lower end certifies the ball is reached.

    Parameters
    ----------
    coeffs: CoefficientSet
    x0: Any
    target: Any
    radius: float
        a > 0
    horizon: float
    step: float
    n_paths: int
    t0: Optional[float]
        Defaults to 0.9·T
    n: Optional[float]
        Defaults to 10·(1 + |x0|)
    seed: int
    strict: bool
    threads: Optional[int]
    chunk_size: Optional[int]

    Returns
    -------
    IrreducibilityReport
    """
    if not radius > 0:
        raise ParameterError(f"radius must be positive, got {radius}")
    plan = BridgePlan.create(x0, target, horizon, t0=t0, n=n)
    ensemble = simulate_controlled_ensemble(
        coeffs,
        x0,
        plan,
        step,
        n_paths,
        seed=seed,
        strict=strict,
        threads=threads,
        chunk_size=chunk_size,
    )
    y = as_point(plan.target, coeffs.dim)
    distance = np.linalg.norm(ensemble.terminal_states - y, axis=1)
    inside = distance < radius
    miss = proportion(int(np.sum(~inside)), n_paths)
    truncated = np.sum(np.square(ensemble.x_t0 - ensemble.starts), axis=1)
    truncation_error = MonteCarloEstimate.from_samples(truncated)
    constant = calibrate_bihari_constant(
        coeffs,
        float(np.max(ensemble.sup_h)),
        float(np.max(np.linalg.norm(ensemble.starts, axis=1))),
        float(np.linalg.norm(y)),
    )
    bound = bihari_bound(truncation_error.estimate, constant, coeffs.lambda0, plan.t0, horizon)
    chebyshev = bound / radius**2
    weighted = MonteCarloEstimate.from_samples(ensemble.terminal_weights * inside)
    lower, upper = weighted.interval(1.96)
    sup_H = float(np.max(ensemble.sup_H))
    if not math.isfinite(sup_H):
        raise NondegeneracyError(f"sup |H| is not finite (got {sup_H})")
    note = None
    if not np.any(inside):
        note = "every controlled path missed the ball; positivity not demonstrated"
        logger.warning(note)
    report = IrreducibilityReport(
        x0=as_point(x0, coeffs.dim).tolist(),
        target=y.tolist(),
        radius=radius,
        horizon=horizon,
        t0=plan.t0,
        n=plan.n,
        step=step,
        n_paths=n_paths,
        seed=seed,
        miss=miss,
        truncation_error=truncation_error,
        bihari_constant=constant,
        bihari_bound=bound,
        chebyshev_bound=chebyshev,
        miss_within_bound=miss.estimate <= chebyshev + RunConfig.INCONCLUSIVE_STDERRS * miss.stderr,
        weighted=weighted,
        weighted_lower=lower,
        weighted_upper=upper,
        weight_mean=MonteCarloEstimate.from_samples(ensemble.terminal_weights),
        sup_H=sup_H,
        demonstrated=bool(np.any(inside)) and lower > 0,
        note=note,
    )
    logger.info(
        "irreducibility probe: weighted p = %.4g [%.4g, %.4g]", weighted.estimate, lower, upper
    )
    return report


class GirsanovLab(LabCore):
    """
    Irreducibility Experiments
    """

    def simulate_controlled_ensemble(
        self, x0: Any, plan: BridgePlan, step: float, n_paths: int, **kwargs: Any
    ) -> ControlledEnsemble:
        """
        Controlled paths with the lab's seed and worker settings
        """
        return simulate_controlled_ensemble(
            self.coeffs, x0, plan, step, n_paths, seed=self.seed, **self.engine_options, **kwargs
        )

    def irreducibility_probe(
        self,
        x0: Any,
        target: Any,
        radius: float,
        horizon: float,
        step: float,
        n_paths: int,
        **kwargs: Any,
    ) -> IrreducibilityReport:
        """
        Run the irreducibility probe with the lab's seed

        Parameters
        ----------
        x0: Any
        target: Any
        radius: float
        horizon: float
        step: float
        n_paths: int
        **kwargs: Any
            Forwarded to `irreducibility_probe` (t0, n, strict)

        Returns
        -------
        IrreducibilityReport
        """
        return irreducibility_probe(
            self.coeffs,
            x0,
            target,
            radius,
            horizon,
            step,
            n_paths,
            seed=self.seed,
            **self.engine_options,
            **kwargs,
        )
