"""
Invariant Measures and Convergence Rates

Empirical measures are histograms on an axis-aligned box. Cell counts are
kept sparse (occupied cells only), so measures in any dimension merge exactly
and order-independently; masses are counts divided by the sample size.
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field, PositiveInt, model_validator
from scipy import integrate

from ergojump._config import RunConfig
from ergojump.exceptions import InsufficientSignalError, ParameterError, UsageError
from ergojump.models._base import ArrayModel, ErgoModel, as_point
from ergojump.models._core import LabCore
from ergojump.models._descriptions import _GridDescriptions
from ergojump.models.coefficients import CoefficientSet
from ergojump.models.observables import ObservableBase
from ergojump.models.simulation import simulate_ensemble
from ergojump.models.timegrid import uniform_nodes

logger = logging.getLogger(__name__)

FEATURE_FREQUENCIES = 4
_STARTS_STREAM = 0x5EC7


class HistogramGrid(ErgoModel):
    """
    Axis-Aligned Box Split into Equal Bins per Axis
    """

    lower: List[float] = Field(description=_GridDescriptions.lower)
    upper: List[float] = Field(description=_GridDescriptions.upper)
    bins: List[PositiveInt] = Field(description=_GridDescriptions.bins)

    @model_validator(mode="after")
    def _consistent(self) -> "HistogramGrid":
        if not len(self.lower) == len(self.upper) == len(self.bins):
            raise ValueError("lower, upper and bins must have one entry per axis")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("every axis needs upper > lower")
        return self

    @classmethod
    def from_samples(
        cls,
        samples: Any,
        bins: Optional[int] = None,
        coverage: Optional[float] = None,
    ) -> "HistogramGrid":
        """
        Data-driven box holding the central `coverage` of every axis

        Parameters
        ----------
        samples: Any
            (n, d) points
        bins: Optional[int]
            Bins per axis, defaults to 100
        coverage: Optional[float]
            Per-axis quantile coverage, defaults to 0.999

        Returns
        -------
        HistogramGrid
            Axes without spread are widened to [v - 0.5, v + 0.5]
        """
        points = np.asarray(samples, dtype=float)
        points = points.reshape(points.shape[0], -1)
        bins = bins or RunConfig.HISTOGRAM_BINS
        coverage = coverage or RunConfig.BOX_COVERAGE
        tail = (1.0 - coverage) / 2.0
        lower = np.quantile(points, tail, axis=0)
        upper = np.quantile(points, 1.0 - tail, axis=0)
        flat = upper <= lower
        lower = np.where(flat, lower - 0.5, lower)
        upper = np.where(flat, upper + 0.5, upper)
        return cls(lower=lower.tolist(), upper=upper.tolist(), bins=[bins] * points.shape[1])

    @property
    def dim(self) -> int:
        return len(self.bins)

    @property
    def widths(self) -> np.ndarray:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / np.asarray(self.bins)

    def cell_index(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Cell of every point inside the closed box

        Returns
        -------
        Tuple[np.ndarray, np.ndarray]
            (m, d) integer cells of the points inside, and the inside mask
        """
        lower, upper = np.asarray(self.lower), np.asarray(self.upper)
        inside = np.all((points >= lower) & (points <= upper), axis=1)
        scaled = (points[inside] - lower) / self.widths
        cells = np.minimum(np.floor(scaled).astype(np.int64), np.asarray(self.bins) - 1)
        return cells, inside

    def coarsen(self, factors: Sequence[int]) -> "HistogramGrid":
        """
        Nested grid merging `factors[i]` neighbouring bins along axis i
        """
        factors = list(factors)
        if len(factors) != self.dim or any(b % f for b, f in zip(self.bins, factors)):
            raise UsageError(f"factors {factors} do not divide the bins {self.bins}")
        return HistogramGrid(
            lower=self.lower,
            upper=self.upper,
            bins=[b // f for b, f in zip(self.bins, factors)],
        )


def smooth_features(points: np.ndarray) -> np.ndarray:
    """
    Bounded test functions: tanh of every coordinate, then cos and sin of
    FEATURE_FREQUENCIES fixed random projections
    """
    frequencies = np.random.default_rng(0).standard_normal((FEATURE_FREQUENCIES, points.shape[1]))
    projections = points @ frequencies.T
    return np.hstack([np.tanh(points), np.cos(projections), np.sin(projections)])


def _sum_cells(cells: np.ndarray, counts: np.ndarray, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    if cells.shape[0] == 0:
        return np.zeros((0, dim), dtype=np.int64), np.zeros(0, dtype=np.int64)
    unique, inverse = np.unique(cells, axis=0, return_inverse=True)
    summed = np.bincount(inverse.reshape(-1), weights=counts, minlength=unique.shape[0])
    return unique, np.rint(summed).astype(np.int64)


class EmpiricalMeasure(ArrayModel):
    """
    Histogram of Samples on a HistogramGrid

    Raw moments and smooth feature sums of every sample (overflow included)
    are carried alongside the counts.
    """

    grid: HistogramGrid
    cells: np.ndarray = Field(description="(m, d) occupied cells, lexicographically sorted")
    counts: np.ndarray
    overflow: int = Field(ge=0)
    n: int = Field(ge=0)
    sums: np.ndarray
    sum_sq: np.ndarray
    feature_sums: np.ndarray
    feature_sq_sums: np.ndarray

    @classmethod
    def from_samples(cls, samples: Any, grid: HistogramGrid) -> "EmpiricalMeasure":
        """
        Histogram of (n, d) samples

        Parameters
        ----------
        samples: Any
        grid: HistogramGrid

        Returns
        -------
        EmpiricalMeasure
        """
        points = np.asarray(samples, dtype=float).reshape(-1, grid.dim)
        cells, inside = grid.cell_index(points)
        cells, counts = _sum_cells(cells, np.ones(cells.shape[0]), grid.dim)
        features = smooth_features(points)
        return cls(
            grid=grid,
            cells=cells,
            counts=counts,
            overflow=int(np.sum(~inside)),
            n=points.shape[0],
            sums=points.sum(axis=0),
            sum_sq=np.square(points).sum(axis=0),
            feature_sums=features.sum(axis=0),
            feature_sq_sums=np.square(features).sum(axis=0),
        )

    @property
    def masses(self) -> np.ndarray:
        """
        Mass of every occupied cell
        """
        return self.counts / self.n

    @property
    def overflow_mass(self) -> float:
        return self.overflow / self.n

    def merge(self, other: "EmpiricalMeasure") -> "EmpiricalMeasure":
        """
        Measure of the pooled samples

        Raises
        ------
        UsageError
            When the grids differ
        """
        _same_grid(self, other)
        cells, counts = _sum_cells(
            np.concatenate([self.cells, other.cells]),
            np.concatenate([self.counts, other.counts]),
            self.grid.dim,
        )
        return EmpiricalMeasure(
            grid=self.grid,
            cells=cells,
            counts=counts,
            overflow=self.overflow + other.overflow,
            n=self.n + other.n,
            sums=self.sums + other.sums,
            sum_sq=self.sum_sq + other.sum_sq,
            feature_sums=self.feature_sums + other.feature_sums,
            feature_sq_sums=self.feature_sq_sums + other.feature_sq_sums,
        )

    def coarsen(self, factors: Sequence[int]) -> "EmpiricalMeasure":
        """
        The same samples on the nested grid `grid.coarsen(factors)`
        """
        grid = self.grid.coarsen(factors)
        cells, counts = _sum_cells(
            self.cells // np.asarray(factors, dtype=np.int64), self.counts, grid.dim
        )
        return self.model_copy(update={"grid": grid, "cells": cells, "counts": counts})

    def mean(self) -> np.ndarray:
        return self.sums / self.n

    def variance(self) -> np.ndarray:
        """
        Per-coordinate variance of the samples
        """
        return self.sum_sq / self.n - np.square(self.mean())

    def feature_means(self) -> np.ndarray:
        return self.feature_sums / self.n

    def mass_outside(self, radius: float) -> float:
        """
        Mass outside B(0, radius), cells assigned by their centres and the
        overflow counted outside
        """
        centres = np.asarray(self.grid.lower) + (self.cells + 0.5) * self.grid.widths
        outside = np.linalg.norm(centres, axis=1) > radius
        return float((np.sum(self.counts[outside]) + self.overflow) / self.n)

    def mass_of_point(self, point: Any) -> float:
        """
        Mass of the cell containing `point` (0 outside the box)
        """
        cells, inside = self.grid.cell_index(as_point(point, self.grid.dim)[None])
        if not inside[0]:
            return 0.0
        match = np.all(self.cells == cells[0], axis=1)
        return float(np.sum(self.counts[match]) / self.n)


def _same_grid(first: EmpiricalMeasure, second: EmpiricalMeasure) -> None:
    if first.grid != second.grid:
        raise UsageError("measures live on different histogram grids")


def _aligned(first: EmpiricalMeasure, second: EmpiricalMeasure) -> Tuple[np.ndarray, np.ndarray]:
    _same_grid(first, second)
    cells = np.concatenate([first.cells, second.cells])
    if cells.shape[0]:
        unique, inverse = np.unique(cells, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        size = unique.shape[0]
        split = first.cells.shape[0]
        a = np.bincount(inverse[:split], weights=first.counts, minlength=size)
        b = np.bincount(inverse[split:], weights=second.counts, minlength=size)
    else:
        a = b = np.zeros(0)
    return np.append(a, first.overflow), np.append(b, second.overflow)


def tv_distance(first: EmpiricalMeasure, second: EmpiricalMeasure) -> float:
    """
    Total Variation Distance of Two Measures on the Same Grid

    ½·Σ|m1 - m2| over the cells plus ½·|overflow1 - overflow2|.

    Parameters
    ----------
    first: EmpiricalMeasure
    second: EmpiricalMeasure

    Returns
    -------
    float
        A value in [0, 1]

    Raises
    ------
    UsageError
        When the grids differ
    """
    a, b = _aligned(first, second)
    if first.grid.dim > RunConfig.GRIDDED_TV_MAX_DIM:
        logger.warning(
            "gridded total variation in dimension %s is dominated by bin sparsity",
            first.grid.dim,
        )
    return float(0.5 * np.sum(np.abs(a / first.n - b / second.n)))


def tv_noise_floor(first: EmpiricalMeasure, second: EmpiricalMeasure) -> float:
    """
    Standard error scale ½·Σ sqrt(m(1 - m)(1/n1 + 1/n2)) of the TV estimator
    at equal laws, m the pooled cell mass
    """
    a, b = _aligned(first, second)
    pooled = (a + b) / (first.n + second.n)
    scale = 1.0 / first.n + 1.0 / second.n
    return float(0.5 * np.sum(np.sqrt(pooled * (1.0 - pooled) * scale)))


def smooth_distance(first: EmpiricalMeasure, second: EmpiricalMeasure) -> Tuple[float, float]:
    """
    ½·max_k |E_1 f_k - E_2 f_k| over the smooth features, with its stderr
    """
    gap = np.abs(first.feature_means() - second.feature_means())
    k = int(np.argmax(gap))

    def var(measure: EmpiricalMeasure) -> float:
        mean = measure.feature_means()[k]
        return max(measure.feature_sq_sums[k] / measure.n - mean**2, 0.0)

    stderr = math.sqrt(var(first) / first.n + var(second) / second.n)
    return float(0.5 * gap[k]), 0.5 * stderr


DistanceKind = Literal["gridded-tv", "smooth"]


def measure_distance(
    first: EmpiricalMeasure, second: EmpiricalMeasure
) -> Tuple[float, float, DistanceKind]:
    """
    Gridded TV up to dimension 3, the smooth feature distance above

    Returns
    -------
    Tuple[float, float, DistanceKind]
        Distance, its noise-floor stderr and which distance was used
    """
    if first.grid.dim <= RunConfig.GRIDDED_TV_MAX_DIM:
        return tv_distance(first, second), tv_noise_floor(first, second), "gridded-tv"
    _same_grid(first, second)
    value, stderr = smooth_distance(first, second)
    return value, stderr, "smooth"


def krylov_bogoliubov(
    coeffs: CoefficientSet,
    x0: Any,
    horizon: float,
    step: float,
    burn_in: Optional[float] = None,
    grid: Optional[HistogramGrid] = None,
    mode: Literal["single", "ensemble"] = "single",
    n_paths: int = 1,
    seed: int = 0,
    bins: Optional[int] = None,
    strict: bool = True,
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> EmpiricalMeasure:
    """
    Estimate the Invariant Measure by Time Averaging

    Parameters
    ----------
    coeffs: CoefficientSet
    x0: Any
    horizon: float
    step: float
    burn_in: Optional[float]
        Discarded initial time, defaults to 10% of T
    grid: Optional[HistogramGrid]
        Histogram grid, by default fitted to the samples
    mode: Literal["single", "ensemble"]
        "single": occupation measure of the uniform nodes in [burn_in, T] of
        n_paths long paths; "ensemble": one state per path at a time drawn
        uniformly from [burn_in, T]
    n_paths: int
    seed: int
    bins: Optional[int]
        Bins per axis of a fitted grid
    strict: bool
    threads: Optional[int]
    chunk_size: Optional[int]

    Returns
    -------
    EmpiricalMeasure
    """
    if burn_in is None:
        burn_in = RunConfig.BURN_IN_FRACTION * horizon
    if not 0 <= burn_in < horizon:
        raise ParameterError(f"burn_in = {burn_in} must lie in [0, T = {horizon})")
    options: Dict[str, Any] = {"strict": strict, "threads": threads, "chunk_size": chunk_size}
    if mode == "single":
        nodes = uniform_nodes(horizon, step)
        times = nodes[nodes >= burn_in - 1e-9 * horizon]
        ensemble = simulate_ensemble(
            coeffs, x0, horizon, step, n_paths, seed=seed, checkpoints=times, **options
        )
        samples = ensemble.states.reshape(-1, coeffs.dim)
    else:
        span = horizon - burn_in

        def draw(rng: np.random.Generator) -> np.ndarray:
            return burn_in + span * rng.random(1)

        ensemble = simulate_ensemble(
            coeffs,
            x0,
            horizon,
            step,
            n_paths,
            seed=seed,
            checkpoints=[horizon],
            random_times=draw,
            **options,
        )
        samples = ensemble.random_states[:, 0]
    if grid is None:
        grid = HistogramGrid.from_samples(samples, bins=bins)
    measure = EmpiricalMeasure.from_samples(samples, grid)
    logger.info(
        "time-averaged measure of %r from %s samples (%s mode)", coeffs.label, measure.n, mode
    )
    return measure


class TVDecay(ErgoModel):
    """
    Distance of p̂_t(x0, ·) to μ̂ over Time
    """

    x0: List[float]
    times: List[float]
    distances: List[float]
    stderrs: List[float]
    kind: DistanceKind
    n_paths: int


def tv_decay(
    coeffs: CoefficientSet,
    x0: Any,
    mu_hat: EmpiricalMeasure,
    times: Sequence[float],
    n_paths: int,
    step: float,
    seed: int = 0,
    strict: bool = True,
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> TVDecay:
    """
    TV(p̂_t(x0, ·), μ̂) at every time, with noise-floor standard errors

    Parameters
    ----------
    coeffs: CoefficientSet
    x0: Any
    mu_hat: EmpiricalMeasure
    times: Sequence[float]
    n_paths: int
    step: float
    seed: int
    strict: bool
    threads: Optional[int]
    chunk_size: Optional[int]

    Returns
    -------
    TVDecay
    """
    horizon = float(max(times))
    ensemble = simulate_ensemble(
        coeffs,
        x0,
        horizon,
        step,
        n_paths,
        seed=seed,
        checkpoints=times,
        strict=strict,
        threads=threads,
        chunk_size=chunk_size,
    )
    distances, stderrs = [], []
    kind: DistanceKind = "gridded-tv"
    for column in range(ensemble.checkpoints.size):
        law = EmpiricalMeasure.from_samples(ensemble.states[:, column], mu_hat.grid)
        value, stderr, kind = measure_distance(law, mu_hat)
        distances.append(value)
        stderrs.append(stderr)
    return TVDecay(
        x0=as_point(x0, coeffs.dim).tolist(),
        times=ensemble.checkpoints.tolist(),
        distances=distances,
        stderrs=stderrs,
        kind=kind,
        n_paths=n_paths,
    )


class RateFit(ErgoModel):
    """
    Log-Linear Fit tv ≈ C·exp(-α·t)
    """

    times: List[float]
    values: List[float]
    stderrs: List[float]
    window: List[float] = Field(description="times used by the fit")
    alpha: float
    log_c: float
    r_squared: float
    alpha_lower: float
    alpha_upper: float
    bootstrap: int

    @property
    def c(self) -> float:
        return math.exp(self.log_c)

    @property
    def excludes_zero(self) -> bool:
        """
        Whether the bootstrap interval of α̂ lies strictly above 0
        """
        return self.alpha_lower > 0


def _least_squares(t: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    if np.all(y == y[0]):
        return 0.0, float(y[0]), 1.0
    t_bar, y_bar = t.mean(), y.mean()
    sxx = np.sum(np.square(t - t_bar))
    slope = float(np.sum((t - t_bar) * (y - y_bar)) / sxx)
    intercept = float(y_bar - slope * t_bar)
    residual = np.sum(np.square(y - intercept - slope * t))
    total = np.sum(np.square(y - y_bar))
    return slope, intercept, float(1.0 - residual / total)


def rate_fit(
    times: Sequence[float],
    values: Sequence[float],
    stderrs: Optional[Sequence[float]] = None,
    bootstrap: Optional[int] = None,
    seed: int = 0,
) -> RateFit:
    """
    Fit an Exponential Decay Rate

    The window starts at the first value below 0.9 times the first value (or
    at the first point when there is none) and keeps the values above 3
    standard errors. α̂ comes with a pairs-bootstrap percentile interval.

    Parameters
    ----------
    times: Sequence[float]
    values: Sequence[float]
    stderrs: Optional[Sequence[float]]
        Noise-floor standard errors, zeros by default
    bootstrap: Optional[int]
        Resamples, defaults to 1000
    seed: int
        Seed of the resampling

    Returns
    -------
    RateFit

    Raises
    ------
    InsufficientSignalError
        When fewer than 4 points are usable
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    s = np.zeros_like(v) if stderrs is None else np.asarray(stderrs, dtype=float)
    bootstrap = bootstrap or RunConfig.BOOTSTRAP_SAMPLES
    if v.size < 4:
        raise InsufficientSignalError(f"a rate fit needs 4 points, got {v.size}")
    below = np.flatnonzero(v < RunConfig.KNEE_FRACTION * v[0])
    start = int(below[0]) if below.size else 0
    usable = (v > RunConfig.NOISE_FLOOR_STDERRS * s) & (v > 0)
    usable[:start] = False
    index = np.flatnonzero(usable)
    if index.size < 4:
        raise InsufficientSignalError(
            f"only {index.size} points lie above the noise floor, a rate fit needs 4"
        )
    window_t, window_y = t[index], np.log(v[index])
    slope, intercept, r_squared = _least_squares(window_t, window_y)
    rng = np.random.default_rng(seed)
    rates = []
    for _ in range(bootstrap):
        pick = rng.integers(0, index.size, index.size)
        if np.all(window_t[pick] == window_t[pick][0]):
            continue
        rates.append(-_least_squares(window_t[pick], window_y[pick])[0])
    lower, upper = np.percentile(rates, [2.5, 97.5]) if rates else (-slope, -slope)
    return RateFit(
        times=t.tolist(),
        values=v.tolist(),
        stderrs=s.tolist(),
        window=window_t.tolist(),
        alpha=-slope,
        log_c=intercept,
        r_squared=r_squared,
        alpha_lower=float(lower),
        alpha_upper=float(upper),
        bootstrap=bootstrap,
    )


def _check_superlinear(r: float) -> None:
    if not r > 2:
        raise ParameterError(f"the drift comparison bound needs r > 2, got r = {r}")


def drift_ode_closed_form(r: float, lambda3: float, x0sq: float, t: Any) -> Any:
    """
    Solution (f0^(1 - r/2) + λ3·(r/2 - 1)·t)^(1/(1 - r/2)) of f' = -λ3·f^(r/2)
    """
    _check_superlinear(r)
    times = np.asarray(t, dtype=float)
    if x0sq == 0:
        value = np.zeros_like(times)
    else:
        power = 1.0 - r / 2.0
        value = (x0sq**power + lambda3 * (r / 2.0 - 1.0) * times) ** (1.0 / power)
    return float(value) if times.ndim == 0 else value


def drift_ode_bound(r: float, lambda3: float, lambda4: float, x0sq: float, t: Any) -> Any:
    """
    Comparison Bound for E|X_t|²

    Integrates f' = -λ3·f^(r/2) + λ4, f(0) = |x0|², with the implicit Radau
    scheme and its analytic Jacobian.

    Parameters
    ----------
    r: float
        Growth exponent, > 2
    lambda3: float
    lambda4: float
    x0sq: float
    t: Any
        Time or times

    Returns
    -------
    Any
        A float for a scalar t, an array otherwise

    Raises
    ------
    ParameterError
        When r <= 2
    """
    _check_superlinear(r)
    times = np.asarray(t, dtype=float)
    flat = np.atleast_1d(times).reshape(-1)
    half = r / 2.0

    def rhs(_: float, f: np.ndarray) -> np.ndarray:
        return -lambda3 * np.maximum(f, 0.0) ** half + lambda4

    def jac(_: float, f: np.ndarray) -> np.ndarray:
        return np.array([[-lambda3 * half * np.maximum(f[0], 0.0) ** (half - 1.0)]])

    end = float(flat.max(initial=0.0))
    if end == 0:
        values = np.full(flat.shape, float(x0sq))
    else:
        order = np.argsort(flat)
        solution = integrate.solve_ivp(
            rhs,
            (0.0, end),
            [float(x0sq)],
            method="Radau",
            t_eval=flat[order],
            rtol=1e-10,
            atol=1e-12,
            jac=jac,
        )
        if not solution.success:
            raise ParameterError(f"drift comparison ODE failed: {solution.message}")
        values = np.empty(flat.shape)
        values[order] = solution.y[0]
    return float(values[0]) if times.ndim == 0 else values.reshape(times.shape)


def tightness_bound(
    x0: Any, lambda3: float, lambda4: float, r: float, horizon: float, radius: float
) -> float:
    """
    Bound (|x0|²/(λ3·T) + λ4/λ3)/R^r on the time-averaged mass outside B(0, R)
    """
    norm_sq = float(np.sum(np.square(np.asarray(x0, dtype=float))))
    return (norm_sq / (lambda3 * horizon) + lambda4 / lambda3) / radius**r


def sample_from_measure(
    measure: EmpiricalMeasure, size: int, rng: np.random.Generator
) -> np.ndarray:
    """
    Points drawn cell by cell from the in-box part of a measure, uniform
    within each cell
    """
    if measure.cells.shape[0] == 0:
        raise UsageError("the measure has no mass inside its grid")
    probabilities = measure.counts / measure.counts.sum()
    picks = rng.choice(measure.cells.shape[0], size=size, p=probabilities)
    offsets = rng.random((size, measure.grid.dim))
    return np.asarray(measure.grid.lower) + (measure.cells[picks] + offsets) * measure.grid.widths


class SpectralSeries(ErgoModel):
    """
    ‖p_t φ - μ̂(φ)‖ in the empirical L^γ(μ̂) Norm
    """

    gamma: float
    norms: List[float]
    stderrs: List[float]
    fit: Optional[RateFit] = None
    reference: Optional[List[float]] = None
    within_reference: Optional[bool] = None


class SpectralProbeReport(ErgoModel):
    """
    Decay of p_t φ Towards μ̂(φ)
    """

    times: List[float]
    mu_phi: float
    n_starts: int
    paths_per_start: int
    alpha_reference: Optional[float]
    series: List[SpectralSeries]


def spectral_probe(
    coeffs: CoefficientSet,
    mu_hat: EmpiricalMeasure,
    phi: ObservableBase,
    times: Sequence[float],
    n_starts: int,
    paths_per_start: int,
    step: float,
    seed: int = 0,
    gammas: Sequence[float] = (2.0, 4.0),
    alpha: Optional[float] = None,
    strict: bool = True,
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> SpectralProbeReport:
    """
    Empirical Spectral Gap Probe

    Starts are drawn from μ̂; p_t φ at every start is the mean over
    `paths_per_start` paths and μ̂(φ) the mean of φ over the starts. The
    standard error of each norm is the root mean square Monte Carlo error of
    p̂_t φ over the starts.

    Parameters
    ----------
    coeffs: CoefficientSet
    mu_hat: EmpiricalMeasure
    phi: ObservableBase
    times: Sequence[float]
    n_starts: int
    paths_per_start: int
    step: float
    seed: int
    gammas: Sequence[float]
    alpha: Optional[float]
        Rate of the e^(-α·t/γ) reference curve, by default the fitted γ = 2 rate
    strict: bool
    threads: Optional[int]
    chunk_size: Optional[int]

    Returns
    -------
    SpectralProbeReport
    """
    rng = np.random.default_rng([seed, _STARTS_STREAM])
    starts = sample_from_measure(mu_hat, n_starts, rng)
    mu_phi = float(np.mean(phi(starts)))
    ensemble = simulate_ensemble(
        coeffs,
        starts[0],
        float(max(times)),
        step,
        n_starts * paths_per_start,
        seed=seed,
        checkpoints=times,
        starts=np.repeat(starts, paths_per_start, axis=0),
        strict=strict,
        threads=threads,
        chunk_size=chunk_size,
    )
    values = np.stack([phi(ensemble.states[:, j]) for j in range(ensemble.checkpoints.size)])
    values = values.reshape(ensemble.checkpoints.size, n_starts, paths_per_start)
    p_t_phi = values.mean(axis=2)
    if paths_per_start > 1:
        mc_error = np.sqrt(np.mean(values.var(axis=2, ddof=1) / paths_per_start, axis=1))
    else:
        mc_error = np.zeros(ensemble.checkpoints.size)
    deviation = np.abs(p_t_phi - mu_phi)
    fitted = {}
    for gamma in gammas:
        norms = np.mean(deviation**gamma, axis=1) ** (1.0 / gamma)
        try:
            fitted[gamma] = (norms, rate_fit(ensemble.checkpoints, norms, mc_error, seed=seed))
        except InsufficientSignalError:
            fitted[gamma] = (norms, None)
    if alpha is None and 2.0 in fitted and fitted[2.0][1] is not None:
        alpha = fitted[2.0][1].alpha
    series = []
    for gamma, (norms, fit) in fitted.items():
        reference = within = None
        if alpha is not None:
            curve = norms[0] * np.exp(-alpha * ensemble.checkpoints / gamma)
            reference = curve.tolist()
            within = bool(
                np.all(norms <= curve + RunConfig.NOISE_FLOOR_STDERRS * mc_error + 1e-12)
            )
        series.append(
            SpectralSeries(
                gamma=gamma,
                norms=norms.tolist(),
                stderrs=mc_error.tolist(),
                fit=fit,
                reference=reference,
                within_reference=within,
            )
        )
    return SpectralProbeReport(
        times=ensemble.checkpoints.tolist(),
        mu_phi=mu_phi,
        n_starts=n_starts,
        paths_per_start=paths_per_start,
        alpha_reference=alpha,
        series=series,
    )


def write_measure(measure: EmpiricalMeasure, path: Union[str, Path]) -> Path:
    """
    Export a measure as text: the grid, then one `cell indices mass` line per
    occupied cell and a final `overflow mass` line
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"# lower: {' '.join(f'{v:.17g}' for v in measure.grid.lower)}",
        f"# upper: {' '.join(f'{v:.17g}' for v in measure.grid.upper)}",
        f"# bins: {' '.join(str(b) for b in measure.grid.bins)}",
        f"# n: {measure.n}",
    ]
    for cell, mass in zip(measure.cells, measure.masses):
        lines.append(f"{' '.join(str(int(i)) for i in cell)} {mass:.17g}")
    lines.append(f"overflow {measure.overflow_mass:.17g}")
    path.write_text("\n".join(lines) + "\n")
    return path


class ErgodicLab(LabCore):
    """
    Invariant Measure Experiments
    """

    def krylov_bogoliubov(
        self, x0: Any, horizon: float, step: float, **kwargs: Any
    ) -> EmpiricalMeasure:
        """
        Time-averaged measure with the lab's seed and worker settings
        """
        return krylov_bogoliubov(
            self.coeffs, x0, horizon, step, seed=self.seed, **self.engine_options, **kwargs
        )

    def tv_decay(
        self,
        x0: Any,
        mu_hat: EmpiricalMeasure,
        times: Sequence[float],
        n_paths: int,
        step: float,
        **kwargs: Any,
    ) -> TVDecay:
        """
        Distance of p̂_t(x0, ·) to μ̂
        """
        return tv_decay(
            self.coeffs,
            x0,
            mu_hat,
            times,
            n_paths,
            step,
            seed=self.seed,
            **self.engine_options,
            **kwargs,
        )

    def spectral_probe(
        self,
        mu_hat: EmpiricalMeasure,
        phi: ObservableBase,
        times: Sequence[float],
        n_starts: int,
        paths_per_start: int,
        step: float,
        **kwargs: Any,
    ) -> SpectralProbeReport:
        """
        Spectral gap probe with the lab's seed

        Parameters
        ----------
        mu_hat: EmpiricalMeasure
        phi: ObservableBase
        times: Sequence[float]
        n_starts: int
        paths_per_start: int
        step: float
        **kwargs: Any
            Forwarded to `spectral_probe`

        Returns
        -------
        SpectralProbeReport
        """
        return spectral_probe(
            self.coeffs,
            mu_hat,
            phi,
            times,
            n_starts,
            paths_per_start,
            step,
            seed=self.seed,
            **self.engine_options,
            **kwargs,
        )
