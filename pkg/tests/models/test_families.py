"""
Run Tests on the Built-in Model Families
"""

import numpy as np
import pytest
from pydantic import TypeAdapter

from ergojump.exceptions import ParameterError
from ergojump.models.coefficients import CoefficientSet, SamplerSpec, check_hypotheses
from ergojump.models.families import (
    JumpOUSpec,
    LinearSpec,
    LogModulusSpec,
    ModelSpec,
    PolynomialDriftSpec,
    build_family,
    mark_kernel,
    mark_moments,
)

SMALL_CLOUD = SamplerSpec(pairs=256, near_diagonal=32, marks=1000, lipschitz_marks=32)


def test_uniform_mark_moments():
    """
    Uniform marks on [-1, 1]^2
    """
    moments = mark_moments("uniform", 2)
    assert moments.second == pytest.approx(2.0 / 3.0)
    assert moments.fourth == pytest.approx(2.0 / 5.0 + 2.0 / 9.0)
    assert moments.coordinate_second == pytest.approx(1.0 / 3.0)
    assert mark_moments("exponential", 3).second == pytest.approx(6.0)


def test_uniform_marks_stay_in_the_cube():
    """
    Uniform variates map onto [-1, 1]^d
    """
    kernel = mark_kernel("uniform", 2.0, 2)
    marks = kernel.sample_marks(np.random.default_rng(0).random((100, 2)))
    assert marks.shape == (100, 2)
    assert np.all(np.abs(marks) <= 1.0)
    assert kernel.total_rate == 2.0


def test_jump_ou_constants(jump_ou: CoefficientSet):
    """
    Derived constants of the default jump OU model
    """
    assert jump_ou.label == "jump-ou"
    assert jump_ou.lambda3 == pytest.approx(2.0)
    assert jump_ou.lambda4 == pytest.approx(1.0 + 1.0 / 3.0)
    assert jump_ou.r == 2.0
    assert "Hf'" not in jump_ou.declared_hypotheses
    assert JumpOUSpec().stationary_variance() == pytest.approx(2.0 / 3.0)


def test_jump_ou_small_jumps_declare_contraction():
    """
    s_j = 0.5 makes the jump map a contraction in the mark
    """
    coeffs = build_family("jump-ou", jump_scale=0.5)
    assert "Hf'" in coeffs.declared_hypotheses
    assert coeffs.gamma == pytest.approx(0.5)
    report = check_hypotheses(coeffs, which=["Hf'"], sampler=SMALL_CLOUD)
    assert report["Hf'"].satisfied == "yes"


def test_linear_constants_hold():
    """
    A state-dependent jump gain shifts λ0 and λ3
    """
    coeffs = LinearSpec(jump_gain=0.5).build()
    assert coeffs.lambda0 == pytest.approx(0.125)
    assert coeffs.lambda3 == pytest.approx(1.75)
    assert check_hypotheses(coeffs, sampler=SMALL_CLOUD, seed=3).all_satisfied


def test_linear_rejects_strong_gain():
    """
    2θ <= rate·c² leaves no drift condition
    """
    with pytest.raises(ParameterError):
        LinearSpec(jump_gain=2.0).build()
    with pytest.raises(ParameterError):
        LinearSpec(jump_gain=0.1, marks="unit").build()


def test_linear_stationary_variance_needs_zero_gain():
    """
    Only the c = 0 case has a closed form
    """
    with pytest.raises(ParameterError):
        LinearSpec(jump_gain=0.5).stationary_variance()


def test_polynomial_drift_declarations():
    """
    Linear growth is declared only for p = 1
    """
    assert "H2" in PolynomialDriftSpec(power=1.0).declared()
    coeffs = PolynomialDriftSpec(power=3.0).build()
    assert "H2" not in coeffs.declared_hypotheses
    assert coeffs.r == pytest.approx(4.0)


def test_log_modulus_drift_is_not_lipschitz(log_modulus: CoefficientSet):
    """
    The difference quotient at 0 grows as the gap shrinks
    """
    small, smaller = 1e-4, 1e-10
    slope_small = float(log_modulus.b(small)[0, 0]) / small
    slope_smaller = float(log_modulus.b(smaller)[0, 0]) / smaller
    assert slope_smaller > slope_small + 1.0
    assert log_modulus.kappa.variant == "log"


def test_log_modulus_rejects_large_epsilon():
    """
    2θ > 3ε keeps λ3 positive
    """
    with pytest.raises(ParameterError):
        LogModulusSpec(theta=0.1, epsilon=0.1).build()


def test_brownian_is_not_ergodic(brownian: CoefficientSet):
    """
    No drift condition holds without a drift
    """
    assert "Hbsf" not in brownian.declared_hypotheses
    assert brownian.kernel.total_rate == 0.0
    report = check_hypotheses(brownian, which=["Hbsf"], sampler=SMALL_CLOUD)
    assert report["Hbsf"].satisfied == "no"


def test_overrides_replace_derived_constants():
    """
    Overrides change only the named constants
    """
    coeffs = build_family("jump-ou", overrides={"lambda3": 5.0})
    assert coeffs.lambda3 == 5.0
    assert coeffs.lambda4 == pytest.approx(1.0 + 1.0 / 3.0)


def test_unknown_family():
    """
    Unknown families list the known ones
    """
    with pytest.raises(ParameterError, match="jump-ou"):
        build_family("geometric")


def test_model_spec_discriminates_on_family():
    """
    Config mappings parse into the matching spec class
    """
    adapter = TypeAdapter(ModelSpec)
    spec = adapter.validate_python({"family": "linear", "jump_gain": 0.5})
    assert isinstance(spec, LinearSpec)
    assert spec.gain == 0.5
    assert isinstance(adapter.validate_python({"family": "jump-ou"}), JumpOUSpec)
