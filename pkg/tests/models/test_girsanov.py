"""
Run Tests on Controlled Bridges and Girsanov Weights
"""

import logging

import numpy as np
import pytest
from pydantic import ValidationError

from ergojump import ErgoLab
from ergojump.exceptions import NondegeneracyError, ParameterError
from ergojump.models._core import path_generator
from ergojump.models.coefficients import CoefficientSet
from ergojump.models.families import mark_kernel
from ergojump.models.girsanov import (
    BridgeControl,
    BridgePlan,
    bihari_bound,
    calibrate_bihari_constant,
    irreducibility_probe,
    make_bridge,
    reweighted_expectation,
    simulate_controlled,
    simulate_controlled_ensemble,
    terminal_spread,
    truncate_start,
    weight_martingale_check,
)
from ergojump.models.observables import TanhObservable

logger = logging.getLogger(__name__)


def test_bridge_control_solves_its_ode(jump_ou: CoefficientSet):
    """
    J runs from the start to the target and solves dJ/dt = b(J) + h
    """
    bridge = BridgeControl(t0=0.9, horizon=1.0, n=10.0, start=[0.5], target=[2.0])
    assert bridge.J([0.9, 1.0])[:, 0].tolist() == pytest.approx([0.5, 2.0])
    assert bridge.velocity.tolist() == pytest.approx([15.0])
    assert bridge.ode_residual(jump_ou) < 1e-6
    assert bridge.h(0.9, jump_ou)[0, 0] == pytest.approx(15.0 + 0.5)
    assert bridge.sup_h(jump_ou) == pytest.approx(17.0)


def test_bridge_needs_t0_before_horizon():
    """
    t0 < T
    """
    with pytest.raises(ValidationError):
        BridgeControl(t0=1.0, horizon=1.0, n=1.0, start=[0.0], target=[1.0])
    with pytest.raises(ValidationError):
        BridgePlan(target=[1.0], n=1.0, t0=2.0, horizon=1.0)


def test_truncated_start(jump_ou: CoefficientSet):
    """
    Starts beyond the truncation level are moved to the origin
    """
    starts = truncate_start(np.array([[0.5], [-3.0]]), 2.0)
    assert starts[:, 0].tolist() == [0.5, 0.0]
    bridge = make_bridge(5.0, 2.0, 1.0, 0.5, 1.0, jump_ou)
    assert bridge.start == [0.0]
    assert bridge.target == [1.0]


def test_bridge_plan_defaults():
    """
    t0 = 0.9·T and n = 10·(1 + |x0|)
    """
    plan = BridgePlan.create([3.0, 4.0], [0.0, 0.0], 2.0)
    assert plan.t0 == pytest.approx(1.8)
    assert plan.n == pytest.approx(60.0)


def test_single_controlled_path(jump_ou: CoefficientSet):
    """
    The weight stays 1 before t0 and the record ends at T
    """
    plan = BridgePlan.create(0.0, 1.0, 1.0, t0=0.5)
    record, weight = simulate_controlled(jump_ou, 0.0, plan, 0.01, path_generator(1, 0))
    before = weight.times <= 0.5
    assert np.all(weight.log_weights[before] == 0.0)
    assert weight.times[-1] == 1.0
    assert record.states.shape == (record.grid.size, 1)
    assert weight.sup_H > 0.0
    assert weight.terminal > 0.0


def test_weights_are_mean_one(brownian: CoefficientSet):
    """
    E[ξ_t] = 1 at every checkpoint, exactly before t0
    """
    plan = BridgePlan.create(0.0, 0.0, 1.0, t0=0.1)
    ensemble = simulate_controlled_ensemble(
        brownian, 0.0, plan, 0.01, 2000, seed=4, checkpoints=[0.05, 0.5, 1.0]
    )
    assert ensemble.checkpoints.tolist() == pytest.approx([0.05, 0.1, 0.5, 1.0])
    report = weight_martingale_check(ensemble)
    for time, estimate in zip(report.times, report.estimates):
        logger.info("E[xi_%s] = %.4f ± %.4f", time, estimate.estimate, estimate.stderr)
    assert report.estimates[0].estimate == 1.0
    assert report.holds


def test_reweighting_and_spread(brownian: CoefficientSet):
    """
    ξ_T·φ(Y_T) estimates E φ(B_1) = 0 and Y_T - y ~ N(0, T - t0)
    """
    plan = BridgePlan.create(0.0, 0.0, 1.0, t0=0.1)
    ensemble = simulate_controlled_ensemble(brownian, 0.0, plan, 0.01, 2000, seed=8)
    estimate = reweighted_expectation(ensemble, TanhObservable())
    assert abs(estimate.estimate) <= 4.0 * estimate.stderr + 0.01
    spread = terminal_spread(ensemble)
    assert abs(spread.estimate - 0.9) <= 5.0 * spread.stderr + 0.02
    assert np.all(np.isfinite(ensemble.x_t0))


def test_controlled_ensemble_rejects_wrong_target(jump_ou: CoefficientSet):
    """
    The target must match the state dimension
    """
    plan = BridgePlan.create(0.0, [1.0, 2.0], 1.0)
    with pytest.raises(ParameterError):
        simulate_controlled_ensemble(jump_ou, 0.0, plan, 0.01, 4)


def test_degenerate_diffusion_is_refused():
    """
    σ = 0 cannot be inverted after t0
    """
    coeffs = CoefficientSet(
        dim=1,
        drift=lambda x: -x,
        diffusion=lambda x: np.zeros((x.shape[0], 1, 1)),
        jump_map=lambda x, u: np.zeros_like(x),
        kernel=mark_kernel("uniform", 0.0, 1),
    )
    plan = BridgePlan.create(0.0, 1.0, 1.0)
    with pytest.raises(NondegeneracyError):
        simulate_controlled(coeffs, 0.0, plan, 0.01, path_generator(0, 0))


def test_bihari_bound():
    """
    [e0 + C(T - t0)]^exp(-|λ0|(T - t0))
    """
    assert bihari_bound(0.0, 1.0, 0.0, 0.9, 1.0) == pytest.approx(0.1)
    with pytest.raises(ParameterError):
        bihari_bound(-1.0, 1.0, 0.0, 0.9, 1.0)
    with pytest.raises(ParameterError):
        bihari_bound(0.0, 1.0, 0.0, 1.0, 1.0)


def test_calibrated_bihari_constant(jump_ou: CoefficientSet):
    """
    2λ1·(2 + max norm)² + sup|h|²
    """
    constant = calibrate_bihari_constant(jump_ou, 0.5, 1.0, 2.0)
    assert constant == pytest.approx(2.0 * jump_ou.lambda1 * 16.0 + 0.25)
    assert calibrate_bihari_constant(jump_ou, 0.0, 2.0, 1.0) < constant


def test_irreducibility_probe(lab: ErgoLab):
    """
    A reachable ball is certified by a positive weighted lower bound
    """
    report = lab.irreducibility_probe(0.0, 1.0, 0.5, 1.0, 0.01, 2000)
    logger.info("weighted p = %.4g [%.4g, %.4g]", report.weighted.estimate, report.weighted_lower, report.weighted_upper)
    assert report.t0 == pytest.approx(0.9)
    assert report.truncation_error.estimate == 0.0
    assert report.miss.estimate < 0.5
    assert report.weighted_lower > 0.0
    assert report.demonstrated
    assert report.note is None


def test_irreducibility_probe_needs_positive_radius(jump_ou: CoefficientSet):
    """
    a > 0
    """
    with pytest.raises(ParameterError):
        irreducibility_probe(jump_ou, 0.0, 1.0, 0.0, 1.0, 0.01, 10)
