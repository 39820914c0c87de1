"""
Coefficient Sets and Hypothesis Checking

A coefficient set bundles the drift b, the diffusion σ, the jump map f and a
finite-activity jump kernel ν together with the constants λ0..λ4, r, γ, L and
the continuity modulus κ. Every coefficient is vectorised over a leading batch
axis. `check_hypotheses` audits the declared constants on a sampled point cloud;
it can falsify a claim, it never proves one.
"""

import hashlib
import json
import logging
import math
from typing import (
    Any,
    Callable,
    Dict,
    FrozenSet,
    Iterable,
    List,
    Literal,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from pydantic import Field, PositiveFloat, field_validator, model_validator

from ergojump._config import RunConfig
from ergojump.exceptions import DomainError, EvaluationError, ParameterError
from ergojump.models._base import ArrayModel, ErgoModel, as_batch
from ergojump.models._descriptions import (
    _CoefficientDescriptions,
    _KappaDescriptions,
    _KernelDescriptions,
)
from ergojump.models.matops import sigma_lambda_stack

logger = logging.getLogger(__name__)

ArrayFunction = Callable[..., np.ndarray]
Satisfied = Literal["yes", "no", "inconclusive"]

HYPOTHESES: Tuple[str, ...] = ("H1", "H2", "H3", "Hf", "H1'", "Hf'", "Hbsf")
_HYPOTHESIS_ALIASES = {
    "h1": "H1",
    "h2": "H2",
    "h3": "H3",
    "hf": "Hf",
    "h1'": "H1'",
    "h1′": "H1'",
    "h1p": "H1'",
    "hf'": "Hf'",
    "hf′": "Hf'",
    "hfp": "Hf'",
    "hbsf": "Hbsf",
    "h_bsf": "Hbsf",
    "h_{b,σ,f}": "Hbsf",
}


def normalize_hypothesis(name: str) -> str:
    """
    Map a user spelling of a hypothesis name onto its canonical form

    Parameters
    ----------
    name: str
        e.g. "H1′", "h1p", "Hbsf"

    Returns
    -------
    str
    """
    key = name.strip().lower()
    try:
        return _HYPOTHESIS_ALIASES[key]
    except KeyError as ke:
        raise ParameterError(
            f"unknown hypothesis {name!r}; expected one of {', '.join(HYPOTHESES)}"
        ) from ke


class ModulusKappa(ArrayModel):
    """
    Continuity Modulus κ of the Monotonicity Condition

    The log family reads κ(x) = C1·(log(1/x) ∨ K)^(1/beta1); it is non-increasing
    on (0, e^-K] and constant on [e^-K, ∞).
    """

    variant: Literal["log", "constant", "user"] = Field(
        "log", description=_KappaDescriptions.variant
    )
    C1: PositiveFloat = Field(1.0, description=_KappaDescriptions.C1)
    K: PositiveFloat = Field(1.0, description=_KappaDescriptions.K)
    beta1: float = Field(2.0, ge=1.0, description=_KappaDescriptions.beta1)
    function: Optional[ArrayFunction] = Field(
        None, description=_KappaDescriptions.function, exclude=True
    )

    @model_validator(mode="after")
    def _user_needs_function(self) -> "ModulusKappa":
        if self.variant == "user" and self.function is None:
            raise ValueError("a user-supplied modulus needs a function")
        return self

    def __call__(self, x: Any) -> Union[float, np.ndarray]:
        """
        Evaluate κ, see `kappa_eval`
        """
        return kappa_eval(self, x)

    def _ratio_on(self, lower: float, upper: float) -> float:
        grid = np.geomspace(lower, upper, 64)
        values = np.asarray(kappa_eval(self, grid), dtype=float)
        return float(np.max(values / np.log(1.0 / grid)))

    def limsup_ratio(self) -> float:
        """
        Largest κ(x) / log(1/x) over the last decade of the geometric grid ending at 1e-12

        Returns
        -------
        float
        """
        floor = RunConfig.KAPPA_GRID_FLOOR
        return self._ratio_on(floor, floor * 10.0)

    def has_finite_limsup(self) -> bool:
        """
        Numerical finiteness test of limsup_{x↓0} κ(x) / log(1/x)

        The ratio on the last decade of the grid must not exceed 1.25 times the
        ratio five decades earlier.

        Returns
        -------
        bool
        """
        floor = RunConfig.KAPPA_GRID_FLOOR
        tail = self.limsup_ratio()
        earlier = self._ratio_on(floor * 1e5, floor * 1e6)
        return bool(np.isfinite(tail) and tail <= 1.25 * earlier + 1e-12)


def kappa_eval(kappa: ModulusKappa, x: Any) -> Union[float, np.ndarray]:
    """
    Evaluate the Continuity Modulus

    Parameters
    ----------
    kappa: ModulusKappa
    x: Any
        Positive scalar or array

    Returns
    -------
    Union[float, np.ndarray]
        A float for scalar input, an array otherwise

    Raises
    ------
    DomainError
        When any x <= 0
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"kappa is defined for x > 0 only, got {x!r}")
    if kappa.variant == "log":
        value = kappa.C1 * np.maximum(np.log(1.0 / arr), kappa.K) ** (1.0 / kappa.beta1)
    elif kappa.variant == "constant":
        value = np.full_like(arr, kappa.C1)
    else:
        assert kappa.function is not None
        value = np.asarray(kappa.function(arr), dtype=float)
    if arr.ndim == 0:
        return float(value)
    return value


def _check_delta(delta: float) -> None:
    if not (0.0 < delta < RunConfig.DELTA_UPPER):
        raise ParameterError(
            f"delta must lie in (0, e^-1) = (0, {RunConfig.DELTA_UPPER:.8f}), got {delta!r}"
        )


def rho_delta(x: Any, delta: float) -> Union[float, np.ndarray]:
    """
    Concave Envelope ρ_δ

    x·log(1/x) on (0, δ], the tangent line (log(1/δ) - 1)·x + δ beyond δ, and 0 at
    x = 0. Concave, non-decreasing and continuous for δ in (0, e^-1).

    Parameters
    ----------
    x: Any
        Non-negative scalar or array
    delta: float
        Branch point in (0, e^-1)

    Returns
    -------
    Union[float, np.ndarray]

    Raises
    ------
    ParameterError
        When delta is outside (0, e^-1)
    DomainError
        When any x < 0
    """
    _check_delta(delta)
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr >= 0)):
        raise DomainError(f"rho_delta is defined for x >= 0 only, got {x!r}")
    safe = np.where(arr > 0, arr, 1.0)
    inner = np.where(arr > 0, arr * np.log(1.0 / safe), 0.0)
    outer = (math.log(1.0 / delta) - 1.0) * arr + delta
    value = np.where(arr <= delta, inner, outer)
    if arr.ndim == 0:
        return float(value)
    return value


def find_envelope_delta(
    kappa: ModulusKappa,
    candidates: Optional[Sequence[float]] = None,
    grid: Optional[np.ndarray] = None,
) -> float:
    """
    Find a δ such that x²κ(x) <= ρ_δ(x²) on a log grid

    Parameters
    ----------
    kappa: ModulusKappa
    candidates: Optional[Sequence[float]]
        δ values to try in order, defaults to a geometric ladder in (0, e^-1)
    grid: Optional[np.ndarray]
        x values, defaults to 2000 log-spaced points in [1e-8, 1]

    Returns
    -------
    float

    Raises
    ------
    ParameterError
        When no candidate works
    """
    if grid is None:
        grid = np.geomspace(1e-8, 1.0, 2000)
    if candidates is None:
        candidates = [RunConfig.DELTA_UPPER * 0.999, *np.geomspace(0.3, 1e-6, 40)]
    squared = np.square(grid)
    lhs = squared * np.asarray(kappa_eval(kappa, grid))
    for delta in candidates:
        if np.all(lhs <= np.asarray(rho_delta(squared, delta)) + 1e-12):
            return float(delta)
    raise ParameterError("no candidate delta makes rho_delta an envelope of x^2 kappa(x)")


class JumpKernel(ArrayModel):
    """
    Finite-Activity Jump Kernel

    Marks are produced by a deterministic map from uniform variates, so a
    path's marks are fixed by its random source.
    """

    total_rate: float = Field(ge=0.0, description=_KernelDescriptions.total_rate)
    uniform_dim: int = Field(1, ge=1, description=_KernelDescriptions.uniform_dim)
    mark_dim: int = Field(1, ge=1, description=_KernelDescriptions.mark_dim)
    mark_sampler: ArrayFunction = Field(description=_KernelDescriptions.mark_sampler)
    compensator: Optional[ArrayFunction] = Field(
        None, description=_KernelDescriptions.compensator
    )
    mark_moments: Dict[int, ArrayFunction] = Field(
        default_factory=dict, description=_KernelDescriptions.mark_moments
    )
    increment_moment: Optional[ArrayFunction] = Field(
        None, description=_KernelDescriptions.increment_moment
    )
    label: str = "custom"

    @field_validator("total_rate")
    @classmethod
    def _finite_activity(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("total_rate must be finite (finite activity only)")
        return value

    @field_validator("mark_moments")
    @classmethod
    def _known_orders(cls, value: Dict[int, ArrayFunction]) -> Dict[int, ArrayFunction]:
        unknown = set(value) - {2, 4}
        if unknown:
            raise ValueError(f"mark_moments keys must be 2 or 4, got {sorted(unknown)}")
        return value

    def sample_marks(self, uniforms: np.ndarray) -> np.ndarray:
        """
        Map (n, uniform_dim) uniforms to (n, mark_dim) marks
        """
        uniforms = np.asarray(uniforms, dtype=float).reshape(-1, self.uniform_dim)
        marks = np.asarray(self.mark_sampler(uniforms), dtype=float)
        return marks.reshape(uniforms.shape[0], self.mark_dim)


class CoefficientSet(ArrayModel):
    """
    The Model Under Study: (b, σ, f, ν) and its Declared Constants
    """

    dim: int = Field(ge=1, description=_CoefficientDescriptions.dim)
    drift: ArrayFunction = Field(description=_CoefficientDescriptions.drift)
    diffusion: ArrayFunction = Field(description=_CoefficientDescriptions.diffusion)
    jump_map: ArrayFunction = Field(description=_CoefficientDescriptions.jump_map)
    kernel: JumpKernel
    lambda0: float = Field(0.0, description=_CoefficientDescriptions.lambda0)
    lambda1: PositiveFloat = Field(1.0, description=_CoefficientDescriptions.lambda1)
    lambda2: PositiveFloat = Field(1.0, description=_CoefficientDescriptions.lambda2)
    lambda3: PositiveFloat = Field(1.0, description=_CoefficientDescriptions.lambda3)
    lambda4: float = Field(0.0, ge=0.0, description=_CoefficientDescriptions.lambda4)
    r: float = Field(2.0, ge=2.0, description=_CoefficientDescriptions.r)
    gamma: float = Field(0.5, gt=0.0, lt=1.0, description=_CoefficientDescriptions.gamma)
    jump_lipschitz: Optional[ArrayFunction] = Field(
        None, description=_CoefficientDescriptions.jump_lipschitz
    )
    kappa: ModulusKappa = Field(default_factory=lambda: ModulusKappa(variant="constant"))
    stiffness: Optional[PositiveFloat] = Field(
        None, description=_CoefficientDescriptions.stiffness
    )
    declared_hypotheses: FrozenSet[str] = Field(
        default_factory=frozenset, description=_CoefficientDescriptions.declared_hypotheses
    )
    label: str = "custom"
    spec_json: Optional[str] = Field(
        None, description="JSON form of the built-in family spec the set was built from"
    )

    @field_validator("lambda0", "lambda1", "lambda2", "lambda3", "lambda4", "r", "gamma")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("model constants must be finite")
        return value

    @field_validator("declared_hypotheses", mode="before")
    @classmethod
    def _canonical_names(cls, value: Iterable[str]) -> FrozenSet[str]:
        return frozenset(normalize_hypothesis(name) for name in value)

    def b(self, x: Any) -> np.ndarray:
        """
        Drift on an (n, d) batch
        """
        return np.asarray(self.drift(as_batch(x, self.dim)), dtype=float)

    def sigma(self, x: Any) -> np.ndarray:
        """
        Diffusion matrices on an (n, d) batch, shape (n, d, d)
        """
        batch = as_batch(x, self.dim)
        out = np.asarray(self.diffusion(batch), dtype=float)
        return out.reshape(batch.shape[0], self.dim, self.dim)

    def a(self, x: Any) -> np.ndarray:
        """
        Diffusion covariance σσ* on an (n, d) batch
        """
        sig = self.sigma(x)
        return np.einsum("nik,njk->nij", sig, sig)

    def f(self, x: Any, marks: np.ndarray) -> np.ndarray:
        """
        Jump map on an (n, d) batch with one mark per row
        """
        batch = as_batch(x, self.dim)
        marks = np.asarray(marks, dtype=float).reshape(batch.shape[0], -1)
        return np.asarray(self.jump_map(batch, marks), dtype=float).reshape(batch.shape)

    def lipschitz(self, marks: np.ndarray) -> np.ndarray:
        """
        Jump Lipschitz function L(u), defaulting to the constant gamma
        """
        marks = np.asarray(marks, dtype=float).reshape(-1, self.kernel.mark_dim)
        if self.jump_lipschitz is None:
            return np.full(marks.shape[0], self.gamma)
        return np.asarray(self.jump_lipschitz(marks), dtype=float).reshape(-1)

    def constants(self) -> Dict[str, Any]:
        """
        The declared constants as a flat mapping
        """
        return {
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "lambda3": self.lambda3,
            "lambda4": self.lambda4,
            "r": self.r,
            "gamma": self.gamma,
            "stiffness": self.stiffness,
            "kappa": self.kappa.model_dump(),
            "rate": self.kernel.total_rate,
        }

    def fingerprint(self) -> str:
        """
        Digest of the family spec (or label) and declared constants

        Returns
        -------
        str
        """
        payload = json.dumps(
            {"label": self.label, "spec": self.spec_json, "constants": self.constants()},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class SamplerSpec(ErgoModel):
    """
    Point Cloud Used to Audit the Hypotheses

    Uniform pairs in a ball plus near-diagonal pairs whose gaps are log-spaced
    down to `min_gap`, where the non-Lipschitz regime lives.
    """

    pairs: int = Field(RunConfig.CLOUD_PAIRS, ge=1)
    radius: PositiveFloat = RunConfig.CLOUD_RADIUS
    near_diagonal: int = Field(RunConfig.CLOUD_NEAR_DIAGONAL, ge=0)
    min_gap: PositiveFloat = RunConfig.CLOUD_MIN_GAP
    marks: int = Field(RunConfig.CLOUD_MARKS, ge=1)
    lipschitz_marks: int = Field(256, ge=1)

    def _ball(self, rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
        direction = rng.standard_normal((n, dim))
        norms = np.linalg.norm(direction, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        radius = self.radius * rng.random((n, 1)) ** (1.0 / dim)
        return direction / norms * radius

    def point_cloud(
        self, dim: int, rng: np.random.Generator
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Draw the (x, y) pairs, shape (pairs + near_diagonal, dim) each

        Returns
        -------
        Tuple[np.ndarray, np.ndarray]
        """
        x_far = self._ball(rng, self.pairs, dim)
        y_far = self._ball(rng, self.pairs, dim)
        if self.near_diagonal == 0:
            return x_far, y_far
        x_near = self._ball(rng, self.near_diagonal, dim)
        direction = rng.standard_normal((self.near_diagonal, dim))
        direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
        gaps = np.geomspace(1.0, self.min_gap, self.near_diagonal)[:, None]
        y_near = x_near + gaps * direction
        return np.vstack([x_far, x_near]), np.vstack([y_far, y_near])


class HypothesisEntry(ErgoModel):
    """
    Audit Outcome of One Hypothesis
    """

    name: str
    satisfied: Satisfied
    worst_violation: float = Field(
        description="Signed slack (lhs - rhs) at the worst sampled point"
    )
    tolerance: float
    witness: List[List[float]] = Field(default_factory=list)
    samples_used: int
    mc_stderr: Optional[float] = None
    note: Optional[str] = None


class HypothesisReport(ErgoModel):
    """
    Audit Outcome of a Set of Hypotheses
    """

    model: str
    fingerprint: str
    seed: int
    sampler: SamplerSpec
    entries: List[HypothesisEntry]

    @property
    def all_satisfied(self) -> bool:
        """
        True when every audited hypothesis came back "yes"
        """
        return all(entry.satisfied == "yes" for entry in self.entries)

    def __getitem__(self, name: str) -> HypothesisEntry:
        """
        Look up an entry by (any spelling of) its hypothesis name
        """
        canonical = normalize_hypothesis(name)
        for entry in self.entries:
            if entry.name == canonical:
                return entry
        raise KeyError(name)


class _Slack:
    """
    Per-sample slack of one inequality, with optional Monte Carlo error
    """

    def __init__(
        self,
        lhs: np.ndarray,
        rhs: np.ndarray,
        witnesses: Callable[[int], List[List[float]]],
        stderr: Optional[np.ndarray] = None,
    ) -> None:
        self.lhs = np.asarray(lhs, dtype=float)
        self.rhs = np.asarray(rhs, dtype=float)
        self.witnesses = witnesses
        self.stderr = None if stderr is None else np.broadcast_to(stderr, self.lhs.shape)

    def entry(self, name: str, note: Optional[str] = None) -> HypothesisEntry:
        slack = self.lhs - self.rhs
        tolerance = RunConfig.CHECK_TOLERANCE * (
            1.0 + np.maximum(np.abs(self.lhs), np.abs(self.rhs))
        )
        excess = slack - tolerance
        worst = int(np.argmax(excess))
        stderr = None if self.stderr is None else float(self.stderr[worst])
        if excess[worst] <= 0:
            satisfied: Satisfied = "yes"
        elif stderr is not None and excess[worst] <= RunConfig.INCONCLUSIVE_STDERRS * stderr:
            satisfied = "inconclusive"
        else:
            satisfied = "no"
        return HypothesisEntry(
            name=name,
            satisfied=satisfied,
            worst_violation=float(slack[worst]),
            tolerance=float(tolerance[worst]),
            witness=self.witnesses(worst),
            samples_used=int(slack.size),
            mc_stderr=stderr,
            note=note,
        )


class HypothesisChecker:
    """
    Vectorised Evaluation of Every Hypothesis on one Point Cloud
    """

    _block_elements = 2_000_000

    def __init__(self, coeffs: CoefficientSet, sampler: SamplerSpec, seed: int) -> None:
        self.coeffs = coeffs
        self.sampler = sampler
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.x, self.y = sampler.point_cloud(coeffs.dim, rng)
        kernel = coeffs.kernel
        self.marks = kernel.sample_marks(rng.random((sampler.marks, kernel.uniform_dim)))
        self.dispatch: Dict[str, Callable[[], HypothesisEntry]] = {
            "H1": self.check_h1,
            "H2": self.check_h2,
            "H3": self.check_h3,
            "Hf": self.check_hf,
            "H1'": self.check_h1_prime,
            "Hf'": self.check_hf_prime,
            "Hbsf": self.check_hbsf,
        }

    def _finite(self, values: np.ndarray, points: np.ndarray, what: str) -> np.ndarray:
        flat = values.reshape(values.shape[0], -1)
        bad = ~np.all(np.isfinite(flat), axis=1)
        if np.any(bad):
            index = int(np.argmax(bad))
            point = points[index].tolist()
            raise EvaluationError(f"{what} is not finite at x = {point}", point=point)
        return values

    def drift(self, points: np.ndarray) -> np.ndarray:
        return self._finite(self.coeffs.b(points), points, "drift b(x)")

    def sigma(self, points: np.ndarray) -> np.ndarray:
        return self._finite(self.coeffs.sigma(points), points, "diffusion sigma(x)")

    def _pair_witness(self, index: int) -> List[List[float]]:
        return [self.x[index].tolist(), self.y[index].tolist()]

    def _point_witness(self, index: int) -> List[List[float]]:
        return [self.x[index].tolist()]

    def _modulus_rhs(self, constant: float) -> np.ndarray:
        gap = np.linalg.norm(self.x - self.y, axis=1)
        return constant * gap**2 * np.asarray(self.coeffs.kappa(np.maximum(gap, 1e-300)))

    def _monotone_part(self) -> np.ndarray:
        diff = self.x - self.y
        return 2.0 * np.sum(diff * (self.drift(self.x) - self.drift(self.y)), axis=1)

    def _jump_integral(
        self, integrand: Callable[[np.ndarray, np.ndarray], np.ndarray], n_points: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Monte Carlo estimate of rate * E[g(point, u)] for every point index
        """
        rate = self.coeffs.kernel.total_rate
        if rate == 0.0:
            return np.zeros(n_points), np.zeros(n_points)
        n_marks = self.marks.shape[0]
        block = max(1, self._block_elements // (n_marks * self.coeffs.dim))
        means = np.empty(n_points)
        stderrs = np.empty(n_points)
        for start in range(0, n_points, block):
            index = np.arange(start, min(start + block, n_points))
            rows = np.repeat(index, n_marks)
            marks = np.tile(self.marks, (index.size, 1))
            values = integrand(rows, marks).reshape(index.size, n_marks)
            means[index] = values.mean(axis=1)
            stderrs[index] = values.std(axis=1, ddof=1) / np.sqrt(n_marks) if n_marks > 1 else 0.0
        return rate * means, rate * stderrs

    def _point_moment(self, q: int) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        moments = self.coeffs.kernel.mark_moments
        if q in moments:
            return np.asarray(moments[q](self.x), dtype=float).reshape(-1), None

        def integrand(rows: np.ndarray, marks: np.ndarray) -> np.ndarray:
            jumps = self.coeffs.f(self.x[rows], marks)
            return np.sum(np.square(jumps), axis=1) ** (q / 2)

        return self._jump_integral(integrand, self.x.shape[0])

    def check_h1(self) -> HypothesisEntry:
        diff_sigma = self.sigma(self.x) - self.sigma(self.y)
        lhs = self._monotone_part() + np.sum(np.square(diff_sigma), axis=(1, 2))
        entry = _Slack(lhs, self._modulus_rhs(self.coeffs.lambda0), self._pair_witness).entry("H1")
        if not self.coeffs.kappa.has_finite_limsup():
            return entry.model_copy(
                update={
                    "satisfied": "no",
                    "note": "limsup of kappa(x)/log(1/x) as x -> 0 is not finite on the grid",
                }
            )
        return entry

    def check_h2(self) -> HypothesisEntry:
        lhs = np.sum(np.square(self.drift(self.x)), axis=1) + np.sum(
            np.square(self.sigma(self.x)), axis=(1, 2)
        )
        rhs = self.coeffs.lambda1 * (1.0 + np.linalg.norm(self.x, axis=1)) ** 2
        return _Slack(lhs, rhs, self._point_witness).entry("H2")

    def check_h3(self) -> HypothesisEntry:
        sig = self.sigma(self.x)
        sym = 0.5 * (sig + np.swapaxes(sig, 1, 2))
        smallest = np.linalg.eigvalsh(sym)[:, 0]
        lhs = np.full(smallest.shape, math.sqrt(self.coeffs.lambda2))
        return _Slack(lhs, smallest, self._point_witness).entry(
            "H3", note="<σ(x)h, h> >= sqrt(λ2)|h|² via the smallest eigenvalue of sym σ(x)"
        )

    def check_hf(self) -> HypothesisEntry:
        kernel = self.coeffs.kernel
        n_pairs = self.x.shape[0]
        if kernel.increment_moment is not None:
            increments = np.asarray(kernel.increment_moment(self.x, self.y)).reshape(-1)
            inc_err: Optional[np.ndarray] = None
        else:

            def integrand(rows: np.ndarray, marks: np.ndarray) -> np.ndarray:
                delta = self.coeffs.f(self.x[rows], marks) - self.coeffs.f(self.y[rows], marks)
                return np.sum(np.square(delta), axis=1)

            increments, inc_err = self._jump_integral(integrand, n_pairs)
        rhs = self._modulus_rhs(2.0 * abs(self.coeffs.lambda0))
        entries = [_Slack(increments, rhs, self._pair_witness, inc_err).entry("Hf")]
        for q in (2, 4):
            moment, err = self._point_moment(q)
            growth = self.coeffs.lambda1 * (1.0 + np.linalg.norm(self.x, axis=1)) ** q
            entries.append(_Slack(moment, growth, self._point_witness, err).entry("Hf"))
        return _worst_of(entries, "Hf", note="increment integral and q = 2, 4 growth")

    def check_h1_prime(self) -> HypothesisEntry:
        reduced_x, low_x = sigma_lambda_stack(self.sigma(self.x), self.coeffs.lambda2)
        reduced_y, low_y = sigma_lambda_stack(self.sigma(self.y), self.coeffs.lambda2)
        bad = np.isnan(reduced_x).any(axis=(1, 2)) | np.isnan(reduced_y).any(axis=(1, 2))
        if np.any(bad):
            slack = -np.minimum(low_x, low_y)
            worst = int(np.argmax(np.where(bad, slack, -np.inf)))
            return HypothesisEntry(
                name="H1'",
                satisfied="no",
                worst_violation=float(slack[worst]),
                tolerance=RunConfig.CLIP_TOLERANCE,
                witness=self._pair_witness(worst),
                samples_used=int(self.x.shape[0]),
                note="σσ* - λ2 I is not positive semi-definite at the witness",
            )
        lhs = self._monotone_part() + np.sum(np.square(reduced_x - reduced_y), axis=(1, 2))
        return _Slack(lhs, self._modulus_rhs(self.coeffs.lambda0), self._pair_witness).entry("H1'")

    def check_hf_prime(self) -> HypothesisEntry:
        coeffs = self.coeffs
        marks = self.marks[: self.sampler.lipschitz_marks]
        n_marks = marks.shape[0]
        lipschitz = coeffs.lipschitz(marks)
        bound = _Slack(
            lipschitz, np.full(n_marks, coeffs.gamma), lambda i: [marks[i].tolist()]
        ).entry("Hf'")
        positive = _Slack(
            -lipschitz, np.zeros(n_marks), lambda i: [marks[i].tolist()]
        ).entry("Hf'")
        origin = np.zeros((n_marks, coeffs.dim))
        at_origin = np.linalg.norm(coeffs.f(origin, marks), axis=1)
        zero = _Slack(at_origin, lipschitz, lambda i: [origin[i].tolist(), marks[i].tolist()]).entry("Hf'")
        rows = np.repeat(np.arange(self.x.shape[0]), n_marks)
        tiled = np.tile(marks, (self.x.shape[0], 1))
        delta = coeffs.f(self.x[rows], tiled) - coeffs.f(self.y[rows], tiled)
        lhs = np.linalg.norm(delta, axis=1)
        rhs = np.tile(lipschitz, self.x.shape[0]) * np.linalg.norm(self.x[rows] - self.y[rows], axis=1)
        lipschitz_entry = _Slack(
            lhs,
            rhs,
            lambda i: [self.x[rows[i]].tolist(), self.y[rows[i]].tolist(), tiled[i].tolist()],
        ).entry("Hf'")
        return _worst_of(
            [bound, positive, zero, lipschitz_entry],
            "Hf'",
            note="sup L <= γ < 1, |f(0,u)| <= L(u), |f(x,u) - f(y,u)| <= L(u)|x - y|",
        )

    def check_hbsf(self) -> HypothesisEntry:
        coeffs = self.coeffs
        moment, err = self._point_moment(2)
        lhs = (
            2.0 * np.sum(self.x * self.drift(self.x), axis=1)
            + np.sum(np.square(self.sigma(self.x)), axis=(1, 2))
            + moment
        )
        rhs = -coeffs.lambda3 * np.linalg.norm(self.x, axis=1) ** coeffs.r + coeffs.lambda4
        return _Slack(lhs, rhs, self._point_witness, err).entry("Hbsf")


def _worst_of(entries: List[HypothesisEntry], name: str, note: str) -> HypothesisEntry:
    rank = {"no": 2, "inconclusive": 1, "yes": 0}
    worst = max(
        entries,
        key=lambda entry: (rank[entry.satisfied], entry.worst_violation - entry.tolerance),
    )
    return worst.model_copy(
        update={
            "name": name,
            "samples_used": sum(entry.samples_used for entry in entries),
            "note": note,
        }
    )


def check_hypotheses(
    coeffs: CoefficientSet,
    which: Optional[Iterable[str]] = None,
    sampler: Optional[SamplerSpec] = None,
    seed: int = 0,
) -> HypothesisReport:
    """
    Audit Hypotheses on a Sampled Point Cloud

    Parameters
    ----------
    coeffs: CoefficientSet
    which: Optional[Iterable[str]]
        Hypotheses to audit, defaults to the set's declared hypotheses (or all
        of them when none are declared)
    sampler: Optional[SamplerSpec]
        Point cloud specification
    seed: int
        Sampling seed; identical (coeffs, sampler, seed) give identical reports

    Returns
    -------
    HypothesisReport

    Raises
    ------
    EvaluationError
        When a coefficient is not finite at a sampled point
    """
    sampler = sampler or SamplerSpec()
    if which is None:
        names = [name for name in HYPOTHESES if name in coeffs.declared_hypotheses] or list(HYPOTHESES)
    else:
        requested = {normalize_hypothesis(name) for name in which}
        names = [name for name in HYPOTHESES if name in requested]
    checker = HypothesisChecker(coeffs, sampler, seed)
    entries = []
    for name in names:
        entry = checker.dispatch[name]()
        logger.debug("%s: %s (worst slack %.3g)", name, entry.satisfied, entry.worst_violation)
        entries.append(entry)
    return HypothesisReport(
        model=coeffs.label,
        fingerprint=coeffs.fingerprint(),
        seed=seed,
        sampler=sampler,
        entries=entries,
    )
