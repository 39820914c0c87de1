"""
Run Tests on Coefficient Sets and the Hypothesis Checker
"""

import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergojump.exceptions import DomainError, EvaluationError, ParameterError
from ergojump.models._base import ErgoModel
from ergojump.models.coefficients import (
    CoefficientSet,
    ModulusKappa,
    SamplerSpec,
    check_hypotheses,
    find_envelope_delta,
    kappa_eval,
    normalize_hypothesis,
    rho_delta,
)
from ergojump.models.families import build_family, mark_kernel

logger = logging.getLogger(__name__)

SMALL_CLOUD = SamplerSpec(pairs=512, near_diagonal=64, marks=2000, lipschitz_marks=32)


def test_normalize_hypothesis_spellings():
    """
    Unicode primes, ASCII primes and "p" suffixes all map to one name
    """
    assert normalize_hypothesis("h1p") == "H1'"
    assert normalize_hypothesis("H1′") == "H1'"
    assert normalize_hypothesis(" hbsf ") == "Hbsf"
    with pytest.raises(ParameterError):
        normalize_hypothesis("H9")


def test_kappa_log_variant():
    """
    κ(x) = C1·(log(1/x) ∨ K)^(1/β1)
    """
    kappa = ModulusKappa(variant="log", C1=2.0, K=1.0, beta1=2.0)
    assert kappa_eval(kappa, math.exp(-4.0)) == pytest.approx(4.0)
    assert kappa(0.9) == pytest.approx(2.0)
    assert isinstance(kappa_eval(kappa, 0.5), float)
    assert kappa_eval(kappa, np.array([0.5, 0.1])).shape == (2,)


def test_kappa_rejects_non_positive_arguments():
    """
    κ is defined on (0, ∞)
    """
    kappa = ModulusKappa(variant="constant")
    with pytest.raises(DomainError):
        kappa_eval(kappa, 0.0)
    with pytest.raises(DomainError):
        kappa_eval(kappa, np.array([1.0, -1.0]))


def test_kappa_user_variant_needs_function():
    """
    A user modulus must carry its callable
    """
    with pytest.raises(ValueError):
        ModulusKappa(variant="user")
    kappa = ModulusKappa(variant="user", function=lambda x: 3.0 * np.ones_like(x))
    assert kappa(0.2) == pytest.approx(3.0)


def test_kappa_limsup_detects_fast_growth():
    """
    log(1/x)² grows faster than log(1/x) at 0
    """
    finite = ModulusKappa(variant="log", C1=1.0, K=1.0, beta1=1.0)
    assert finite.has_finite_limsup()
    assert finite.limsup_ratio() == pytest.approx(1.0)
    fast = ModulusKappa(variant="user", function=lambda x: np.log(1.0 / x) ** 2)
    assert not fast.has_finite_limsup()


def test_rho_delta_is_continuous_at_delta():
    """
    Both branches agree at x = δ, and ρ_δ(0) = 0
    """
    delta = 0.1
    assert rho_delta(delta, delta) == pytest.approx(delta * math.log(1.0 / delta))
    assert rho_delta(delta * (1 + 1e-9), delta) == pytest.approx(
        rho_delta(delta, delta), rel=1e-6
    )
    assert rho_delta(0.0, delta) == 0.0


@settings(max_examples=50, deadline=None)
@given(
    delta=st.floats(min_value=1e-4, max_value=0.36),
    a=st.floats(min_value=0.0, max_value=5.0),
    b=st.floats(min_value=0.0, max_value=5.0),
)
def test_rho_delta_is_concave_and_non_decreasing(delta: float, a: float, b: float):
    """
    Midpoint concavity and monotonicity on random pairs
    """
    lo, hi = min(a, b), max(a, b)
    rho_lo, rho_hi = rho_delta(lo, delta), rho_delta(hi, delta)
    assert rho_lo <= rho_hi + 1e-12
    assert rho_delta(0.5 * (lo + hi), delta) >= 0.5 * (rho_lo + rho_hi) - 1e-12


def test_rho_delta_rejects_bad_inputs():
    """
    δ outside (0, e^-1) and negative x are refused
    """
    with pytest.raises(ParameterError):
        rho_delta(0.1, 0.5)
    with pytest.raises(DomainError):
        rho_delta(-0.1, 0.1)


def test_find_envelope_delta_for_constant_kappa():
    """
    x² <= ρ_δ(x²) on [0, 1] needs (2 - log(1/δ)) <= δ at x = 1
    """
    kappa = ModulusKappa(variant="constant", C1=1.0)
    delta = find_envelope_delta(kappa)
    assert 0.0 < delta < 0.16
    grid = np.geomspace(1e-8, 1.0, 200) ** 2
    assert np.all(grid <= rho_delta(grid, delta) + 1e-12)


def test_find_envelope_delta_without_candidate():
    """
    A modulus too large for every candidate raises
    """
    kappa = ModulusKappa(variant="constant", C1=100.0)
    with pytest.raises(ParameterError):
        find_envelope_delta(kappa, candidates=[0.1, 0.01])


def test_coefficient_set_batches(jump_ou: CoefficientSet):
    """
    Coefficients accept points and batches alike
    """
    assert jump_ou.b(2.0).shape == (1, 1)
    assert jump_ou.b(np.ones((5, 1))).shape == (5, 1)
    assert jump_ou.sigma(np.zeros((3, 1))).shape == (3, 1, 1)
    assert jump_ou.a(1.0)[0, 0, 0] == pytest.approx(1.0)
    assert jump_ou.lipschitz(np.array([[0.5], [-1.0]])).tolist() == pytest.approx([0.5, 1.0])


def test_coefficient_set_rejects_infinite_constants():
    """
    Constants must be finite
    """
    with pytest.raises(ValueError):
        CoefficientSet(
            dim=1,
            drift=lambda x: -x,
            diffusion=lambda x: np.ones((x.shape[0], 1, 1)),
            jump_map=lambda x, u: np.zeros_like(x),
            kernel=mark_kernel("uniform", 0.0, 1),
            lambda1=math.inf,
        )


def test_fingerprint_is_stable():
    """
    Identical specs fingerprint identically, different ones do not
    """
    first = build_family("jump-ou", theta=2.0)
    second = build_family("jump-ou", theta=2.0)
    third = build_family("jump-ou", theta=3.0)
    assert first.fingerprint() == second.fingerprint()
    assert first.fingerprint() != third.fingerprint()


def test_check_jump_ou_declared(jump_ou: CoefficientSet):
    """
    Every hypothesis the jump OU model declares is satisfied
    """
    report = check_hypotheses(jump_ou, sampler=SMALL_CLOUD, seed=4)
    names = {entry.name for entry in report.entries}
    assert names == set(jump_ou.declared_hypotheses)
    for entry in report.entries:
        logger.info("%s: %s (%.3g)", entry.name, entry.satisfied, entry.worst_violation)
    assert report.all_satisfied
    assert report.model == "jump-ou"


def test_check_is_deterministic(jump_ou: CoefficientSet):
    """
    Identical (model, sampler, seed) give identical reports
    """
    first = check_hypotheses(jump_ou, which=["H2", "Hbsf"], sampler=SMALL_CLOUD, seed=9)
    second = check_hypotheses(jump_ou, which=["H2", "Hbsf"], sampler=SMALL_CLOUD, seed=9)
    assert first.model_dump_json() == second.model_dump_json()
    assert first.fingerprint == jump_ou.fingerprint()
    assert not hasattr(ErgoModel, "fingerprint")


def test_check_catches_overclaimed_constant():
    """
    Claiming λ3 = 5 for θ = 1 breaks the drift condition
    """
    coeffs = build_family("jump-ou", overrides={"lambda3": 5.0})
    report = check_hypotheses(coeffs, which=["Hbsf"], sampler=SMALL_CLOUD)
    entry = report["Hbsf"]
    assert entry.satisfied == "no"
    assert entry.worst_violation > 0
    assert len(entry.witness) == 1


def test_check_superlinear_linear_growth_fails(superlinear: CoefficientSet):
    """
    b(x) = -x|x| is not of linear growth
    """
    assert "H2" not in superlinear.declared_hypotheses
    report = check_hypotheses(superlinear, which=["H2"], sampler=SMALL_CLOUD)
    assert report["h2"].satisfied == "no"


def test_check_superlinear_drift_condition(superlinear: CoefficientSet):
    """
    The drift condition holds with r = 3
    """
    report = check_hypotheses(superlinear, which=["Hbsf", "H1"], sampler=SMALL_CLOUD)
    assert report.all_satisfied


def test_check_log_modulus_monotonicity(log_modulus: CoefficientSet):
    """
    The non-Lipschitz drift passes the monotonicity condition, near-diagonal
    pairs included
    """
    report = check_hypotheses(log_modulus, which=["H1"], sampler=SMALL_CLOUD, seed=2)
    assert report["H1"].satisfied == "yes"


def test_check_raises_on_non_finite_coefficients():
    """
    A drift that overflows is reported with its point
    """
    coeffs = CoefficientSet(
        dim=1,
        drift=lambda x: np.where(np.abs(x) > 5.0, np.inf, -x),
        diffusion=lambda x: np.ones((x.shape[0], 1, 1)),
        jump_map=lambda x, u: np.zeros_like(x),
        kernel=mark_kernel("uniform", 0.0, 1),
    )
    with pytest.raises(EvaluationError) as error:
        check_hypotheses(coeffs, which=["H2"], sampler=SMALL_CLOUD)
    assert abs(error.value.point[0]) > 5.0
