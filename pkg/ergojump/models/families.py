"""
Built-in Model Families

Each family is a declarative pydantic spec (usable from experiment config
files) whose `build()` returns a `CoefficientSet` with closed-form
compensators, jump moments and derived constants. Constants can be overridden;
the hypothesis checker then audits the claimed values.
"""

import logging
import math
from typing import Annotated, Any, Callable, Dict, FrozenSet, Literal, Optional, Union

import numpy as np
from pydantic import Field, NonNegativeFloat, PositiveFloat, PositiveInt

from ergojump.exceptions import ParameterError
from ergojump.models._base import ErgoModel
from ergojump.models.coefficients import CoefficientSet, JumpKernel, ModulusKappa, rho_delta

logger = logging.getLogger(__name__)

MarkLaw = Literal["uniform", "unit", "exponential"]

LOG_MODULUS_DELTA = math.exp(-2.0)


class MarkMoments(ErgoModel):
    """
    Moments of a Mark Law in Dimension d
    """

    mean: float = Field(description="E[u_i], identical for every coordinate")
    second: float = Field(description="E|u|^2")
    fourth: float = Field(description="E|u|^4")
    coordinate_second: float = Field(description="E[u_i^2]")
    sup_norm: float = Field(description="sup |u| over the support")


def mark_moments(law: MarkLaw, dim: int) -> MarkMoments:
    """
    Closed-form moments of the built-in mark laws

    Parameters
    ----------
    law: MarkLaw
        "uniform" on [-1, 1]^d, "unit" (the all-ones vector) or "exponential"
        (i.i.d. Exp(1) coordinates)
    dim: int

    Returns
    -------
    MarkMoments
    """
    if law == "uniform":
        return MarkMoments(
            mean=0.0,
            second=dim / 3.0,
            fourth=dim / 5.0 + dim * (dim - 1) / 9.0,
            coordinate_second=1.0 / 3.0,
            sup_norm=math.sqrt(dim),
        )
    if law == "unit":
        return MarkMoments(
            mean=1.0,
            second=float(dim),
            fourth=float(dim * dim),
            coordinate_second=1.0,
            sup_norm=math.sqrt(dim),
        )
    return MarkMoments(
        mean=1.0,
        second=2.0 * dim,
        fourth=24.0 * dim + 4.0 * dim * (dim - 1),
        coordinate_second=2.0,
        sup_norm=math.inf,
    )


def _mark_sampler(law: MarkLaw, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    if law == "uniform":
        return lambda uniforms: 2.0 * uniforms - 1.0
    if law == "unit":
        return lambda uniforms: np.ones((uniforms.shape[0], dim))
    return lambda uniforms: -np.log1p(-uniforms)


def mark_kernel(
    law: MarkLaw,
    rate: float,
    dim: int,
    compensator: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    moments: Optional[Dict[int, Callable[[np.ndarray], np.ndarray]]] = None,
    increment_moment: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
) -> JumpKernel:
    """
    Jump kernel with a built-in mark law on U_0 ⊂ R^dim

    Parameters
    ----------
    law: MarkLaw
    rate: float
        Total rate ν(U_0)
    dim: int
        Mark dimension
    compensator: Optional[Callable]
        Closed form of ∫ f(x, u) ν(du) for the jump map the kernel will be used with
    moments: Optional[Dict[int, Callable]]
        Closed forms of ∫ |f(x, u)|^q ν(du)
    increment_moment: Optional[Callable]
        Closed form of ∫ |f(x, u) - f(y, u)|^2 ν(du)

    Returns
    -------
    JumpKernel
    """
    return JumpKernel(
        total_rate=rate,
        uniform_dim=dim,
        mark_dim=dim,
        mark_sampler=_mark_sampler(law, dim),
        compensator=compensator,
        mark_moments=moments or {},
        increment_moment=increment_moment,
        label=law,
    )


class ConstantOverrides(ErgoModel):
    """
    Optional Replacements for a Family's Derived Constants
    """

    lambda0: Optional[float] = None
    lambda1: Optional[PositiveFloat] = None
    lambda2: Optional[PositiveFloat] = None
    lambda3: Optional[PositiveFloat] = None
    lambda4: Optional[NonNegativeFloat] = None
    r: Optional[float] = Field(None, ge=2.0)
    gamma: Optional[float] = Field(None, gt=0.0, lt=1.0)
    stiffness: Optional[PositiveFloat] = None

    def apply(self, constants: Dict[str, Any]) -> Dict[str, Any]:
        """
        Merge the non-null overrides into a constants mapping
        """
        updated = dict(constants)
        updated.update(self.model_dump(exclude_none=True))
        return updated


class _FamilySpec(ErgoModel):
    """
    Shared Fields of the Built-in Families
    """

    overrides: ConstantOverrides = Field(default_factory=ConstantOverrides)

    def _finish(
        self,
        label: str,
        constants: Dict[str, Any],
        declared: FrozenSet[str],
        **coefficients: Any,
    ) -> CoefficientSet:
        merged = self.overrides.apply(constants)
        logger.debug("built %s with constants %s", label, merged)
        return CoefficientSet(
            label=label,
            spec_json=self.model_dump_json(),
            declared_hypotheses=declared,
            **merged,
            **coefficients,
        )


def _affine_jumps(
    dim: int, jump_scale: float, jump_gain: float, rate: float, marks: MarkLaw
) -> Dict[str, Any]:
    """
    Jump map f(x, u) = s_j·u + c·x with closed-form kernel integrals
    """
    moments = mark_moments(marks, dim)
    s_j, c = jump_scale, jump_gain

    def jump_map(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return s_j * u + c * x

    def compensator(x: np.ndarray) -> np.ndarray:
        return rate * (s_j * moments.mean + c * x)

    def increment(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return rate * c**2 * np.sum(np.square(x - y), axis=1)

    closed: Dict[int, Callable[[np.ndarray], np.ndarray]] = {}
    if marks == "uniform" or c == 0.0:

        def second(x: np.ndarray) -> np.ndarray:
            return rate * (s_j**2 * moments.second + c**2 * np.sum(np.square(x), axis=1))

        closed[2] = second
    if marks == "uniform":

        def fourth(x: np.ndarray) -> np.ndarray:
            sq = c**2 * np.sum(np.square(x), axis=1)
            return rate * (
                sq**2
                + (4.0 + 2.0 * dim) / 3.0 * s_j**2 * sq
                + s_j**4 * moments.fourth
            )

        closed[4] = fourth
    elif c == 0.0:
        closed[4] = lambda x: np.full(x.shape[0], rate * s_j**4 * moments.fourth)

    def lipschitz(u: np.ndarray) -> np.ndarray:
        return np.maximum(np.maximum(abs(c), s_j * np.linalg.norm(u, axis=1)), 1e-12)

    kernel = mark_kernel(
        marks, rate, dim, compensator=compensator, moments=closed, increment_moment=increment
    )
    return {"jump_map": jump_map, "kernel": kernel, "jump_lipschitz": lipschitz}


def _jump_growth_constant(
    dim: int, jump_scale: float, jump_gain: float, rate: float, marks: MarkLaw
) -> float:
    """
    λ1 contribution making ∫|f|^q ν <= λ1 (1 + |x|)^q hold for q = 2, 4
    """
    moments = mark_moments(marks, dim)
    s_j, c = jump_scale, jump_gain
    if marks == "uniform" or c == 0.0:
        second = max(s_j**2 * moments.second, c**2)
        fourth = max(c**4, (4.0 + 2.0 * dim) / 18.0 * s_j**2 * c**2, s_j**4 * moments.fourth)
    else:
        second = 2.0 * max(s_j**2 * moments.second, c**2)
        fourth = 8.0 * max(s_j**4 * moments.fourth, c**4)
    return rate * max(second, fourth)


def _scaled_identity(dim: int, scale: float) -> Callable[[np.ndarray], np.ndarray]:
    def diffusion(x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(scale * np.eye(dim), (x.shape[0], dim, dim)).copy()

    return diffusion


def _sup_lipschitz(jump_scale: float, jump_gain: float, marks: MarkLaw, dim: int) -> float:
    if jump_scale == 0.0:
        return abs(jump_gain)
    return max(abs(jump_gain), jump_scale * mark_moments(marks, dim).sup_norm)


class _AffineSpec(_FamilySpec):
    """
    b(x) = -θx, σ = s·I, f(x, u) = s_j·u + c·x
    """

    dim: PositiveInt = 1
    theta: PositiveFloat = 1.0
    diffusion: PositiveFloat = 1.0
    jump_scale: NonNegativeFloat = 1.0
    rate: NonNegativeFloat = 1.0
    marks: MarkLaw = "uniform"

    @property
    def gain(self) -> float:
        """
        State gain c of the jump map
        """
        return 0.0

    def declared(self) -> FrozenSet[str]:
        """
        Hypotheses the derived constants satisfy
        """
        declared = {"H1", "H2", "H3", "Hf", "H1'", "Hbsf"}
        if _sup_lipschitz(self.jump_scale, self.gain, self.marks, self.dim) < 1.0:
            declared.add("Hf'")
        return frozenset(declared)

    def stationary_variance(self) -> float:
        """
        Per-coordinate stationary variance (s² + rate·s_j²·E[u_i²]) / (2θ) when c = 0
        """
        if self.gain != 0.0:
            raise ParameterError("closed-form stationary variance needs jump_gain = 0")
        moments = mark_moments(self.marks, self.dim)
        return (
            self.diffusion**2 + self.rate * self.jump_scale**2 * moments.coordinate_second
        ) / (2.0 * self.theta)

    def build(self) -> CoefficientSet:
        """
        Build the coefficient set

        Returns
        -------
        CoefficientSet
        """
        dim, theta, s = self.dim, self.theta, self.diffusion
        c, rate, s_j = self.gain, self.rate, self.jump_scale
        if c != 0.0 and self.marks != "uniform":
            raise ParameterError("a non-zero jump gain needs uniform marks")
        if 2.0 * theta <= rate * c**2:
            raise ParameterError(
                "the drift condition needs 2·theta > rate·jump_gain², "
                f"got theta={theta} rate={rate} jump_gain={c}"
            )
        jumps = _affine_jumps(dim, s_j, c, rate, self.marks)
        sup_lipschitz = _sup_lipschitz(s_j, c, self.marks, dim)
        constants = {
            "lambda0": rate * c**2 / 2.0,
            "lambda1": max(
                theta**2, s**2 * dim, _jump_growth_constant(dim, s_j, c, rate, self.marks)
            ),
            "lambda2": s**2,
            "lambda3": 2.0 * theta - rate * c**2,
            "lambda4": s**2 * dim + rate * s_j**2 * mark_moments(self.marks, dim).second,
            "r": 2.0,
            "gamma": sup_lipschitz if 0.0 < sup_lipschitz < 1.0 else 0.99,
            "stiffness": theta + rate * abs(c),
            "kappa": ModulusKappa(variant="constant", C1=1.0),
        }
        return self._finish(
            self.family,  # type: ignore[attr-defined]
            constants,
            self.declared(),
            dim=dim,
            drift=lambda x: -theta * x,
            diffusion=_scaled_identity(dim, s),
            **jumps,
        )


class JumpOUSpec(_AffineSpec):
    """
    Jump Ornstein-Uhlenbeck Reference Model: b(x) = -θx, σ = s·I, f(x, u) = s_j·u

    Stationary mean 0 and per-coordinate stationary variance
    (s² + rate·s_j²·E[u_i²]) / (2θ), i.e. (s² + rate·s_j²/3) / (2θ) with
    uniform marks.
    """

    family: Literal["jump-ou"] = "jump-ou"


class LinearSpec(_AffineSpec):
    """
    Linear Model with a State-Dependent Jump: f(x, u) = s_j·u + c·x

    The drift condition needs 2θ > rate·c² and the monotonicity constant is
    λ0 = rate·c²/2.
    """

    family: Literal["linear"] = "linear"
    jump_gain: float = 0.0

    @property
    def gain(self) -> float:
        """
        State gain c of the jump map
        """
        return self.jump_gain


class PolynomialDriftSpec(_FamilySpec):
    """
    Superlinear Model: b(x) = -θ·x·|x|^(p-1), σ = s·I, f(x, u) = s_j·u

    The drift condition holds with r = p + 1 and λ3 = 2θ; the linear growth
    hypothesis fails for p > 1 and is not declared.
    """

    family: Literal["polynomial-drift"] = "polynomial-drift"
    dim: PositiveInt = 1
    theta: PositiveFloat = 1.0
    power: float = Field(2.0, ge=1.0)
    diffusion: PositiveFloat = 1.0
    jump_scale: NonNegativeFloat = 1.0
    rate: NonNegativeFloat = 1.0
    marks: MarkLaw = "uniform"

    def declared(self) -> FrozenSet[str]:
        """
        Hypotheses the derived constants satisfy
        """
        declared = {"H1", "H3", "Hf", "H1'", "Hbsf"}
        if self.power == 1.0:
            declared.add("H2")
        if _sup_lipschitz(self.jump_scale, 0.0, self.marks, self.dim) < 1.0:
            declared.add("Hf'")
        return frozenset(declared)

    def build(self) -> CoefficientSet:
        """
        Build the coefficient set

        Returns
        -------
        CoefficientSet
        """
        dim, theta, power, s = self.dim, self.theta, self.power, self.diffusion
        rate = self.rate
        jumps = _affine_jumps(dim, self.jump_scale, 0.0, rate, self.marks)
        sup_lipschitz = _sup_lipschitz(self.jump_scale, 0.0, self.marks, dim)

        def drift(x: np.ndarray) -> np.ndarray:
            norm = np.linalg.norm(x, axis=1, keepdims=True)
            return -theta * x * norm ** (power - 1.0)

        constants = {
            "lambda0": 0.0,
            "lambda1": max(
                theta**2,
                s**2 * dim,
                _jump_growth_constant(dim, self.jump_scale, 0.0, rate, self.marks),
                1e-12,
            ),
            "lambda2": s**2,
            "lambda3": 2.0 * theta,
            "lambda4": s**2 * dim
            + rate * self.jump_scale**2 * mark_moments(self.marks, dim).second,
            "r": power + 1.0,
            "gamma": sup_lipschitz if 0.0 < sup_lipschitz < 1.0 else 0.99,
            "stiffness": None,
            "kappa": ModulusKappa(variant="constant", C1=1.0),
        }
        return self._finish(
            self.family,
            constants,
            self.declared(),
            dim=dim,
            drift=drift,
            diffusion=_scaled_identity(dim, s),
            **jumps,
        )


class LogModulusSpec(_FamilySpec):
    """
    Non-Lipschitz Model in d = 1: b(x) = -θx + ε·sign(x)·ρ_δ(|x|), δ = e^-2

    The perturbation is monotone with a log-type modulus, so the monotonicity
    condition holds with λ0 = 4ε and κ(x) = log(1/x) ∨ 2 while no Lipschitz
    constant exists at 0.
    """

    family: Literal["log-modulus-perturbed"] = "log-modulus-perturbed"
    theta: PositiveFloat = 1.0
    epsilon: PositiveFloat = 0.1
    diffusion: PositiveFloat = 1.0
    jump_scale: NonNegativeFloat = 0.5
    rate: NonNegativeFloat = 1.0

    def declared(self) -> FrozenSet[str]:
        """
        Hypotheses the derived constants satisfy
        """
        declared = {"H1", "H2", "H3", "Hf", "H1'", "Hbsf"}
        if self.jump_scale < 1.0:
            declared.add("Hf'")
        return frozenset(declared)

    def build(self) -> CoefficientSet:
        """
        Build the coefficient set

        Returns
        -------
        CoefficientSet
        """
        theta, eps, s, rate = self.theta, self.epsilon, self.diffusion, self.rate
        if 2.0 * theta <= 3.0 * eps:
            raise ParameterError("the log-modulus family needs 2·theta > 3·epsilon")
        delta = LOG_MODULUS_DELTA
        jumps = _affine_jumps(1, self.jump_scale, 0.0, rate, "uniform")

        def drift(x: np.ndarray) -> np.ndarray:
            return -theta * x + eps * np.sign(x) * rho_delta(np.abs(x), delta)

        constants = {
            "lambda0": 4.0 * eps,
            "lambda1": max(
                (theta + eps) ** 2 + s**2,
                _jump_growth_constant(1, self.jump_scale, 0.0, rate, "uniform"),
            ),
            "lambda2": s**2,
            "lambda3": 2.0 * theta - 3.0 * eps,
            "lambda4": s**2 + rate * self.jump_scale**2 / 3.0 + 4.0 * eps * delta**2,
            "r": 2.0,
            "gamma": self.jump_scale if 0.0 < self.jump_scale < 1.0 else 0.99,
            "stiffness": None,
            "kappa": ModulusKappa(variant="log", C1=1.0, K=2.0, beta1=1.0),
        }
        return self._finish(
            self.family,
            constants,
            self.declared(),
            dim=1,
            drift=drift,
            diffusion=_scaled_identity(1, s),
            **jumps,
        )


class BrownianSpec(_FamilySpec):
    """
    Scaled Brownian Motion: b = 0, σ = s·I, no jumps

    Not ergodic; the drift-condition constants are placeholders and the
    drift condition is not declared.
    """

    family: Literal["brownian"] = "brownian"
    dim: PositiveInt = 1
    diffusion: PositiveFloat = 1.0

    def build(self) -> CoefficientSet:
        """
        Build the coefficient set

        Returns
        -------
        CoefficientSet
        """
        dim, s = self.dim, self.diffusion
        kernel = mark_kernel(
            "uniform",
            0.0,
            dim,
            compensator=lambda x: np.zeros_like(x),
            moments={2: lambda x: np.zeros(x.shape[0]), 4: lambda x: np.zeros(x.shape[0])},
            increment_moment=lambda x, y: np.zeros(x.shape[0]),
        )
        constants = {
            "lambda0": 0.0,
            "lambda1": s**2 * dim,
            "lambda2": s**2,
            "lambda3": 1.0,
            "lambda4": 0.0,
            "r": 2.0,
            "gamma": 0.5,
            "stiffness": None,
            "kappa": ModulusKappa(variant="constant", C1=1.0),
        }
        return self._finish(
            self.family,
            constants,
            frozenset({"H1", "H2", "H3", "Hf", "H1'", "Hf'"}),
            dim=dim,
            drift=lambda x: np.zeros_like(x),
            diffusion=_scaled_identity(dim, s),
            jump_map=lambda x, u: np.zeros_like(x),
            kernel=kernel,
            jump_lipschitz=lambda u: np.full(u.shape[0], 1e-12),
        )


ModelSpec = Annotated[
    Union[JumpOUSpec, LinearSpec, PolynomialDriftSpec, LogModulusSpec, BrownianSpec],
    Field(discriminator="family"),
]

FAMILIES: Dict[str, Any] = {
    "jump-ou": JumpOUSpec,
    "linear": LinearSpec,
    "polynomial-drift": PolynomialDriftSpec,
    "log-modulus-perturbed": LogModulusSpec,
    "brownian": BrownianSpec,
}


def build_family(family: str, **parameters: Any) -> CoefficientSet:
    """
    Build a built-in family by name

    Parameters
    ----------
    family: str
        One of the keys of FAMILIES
    **parameters: Any
        Family parameters

    Returns
    -------
    CoefficientSet
    """
    try:
        spec_class = FAMILIES[family]
    except KeyError as ke:
        raise ParameterError(
            f"unknown model family {family!r}; expected one of {', '.join(FAMILIES)}"
        ) from ke
    return spec_class(**parameters).build()
