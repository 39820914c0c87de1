"""
Run Tests on the Coupled Pair
"""

import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError

from ergojump import ErgoLab
from ergojump.exceptions import DegenerateDirectionError, UsageError
from ergojump.models._core import path_generator
from ergojump.models.coefficients import CoefficientSet
from ergojump.models.coupling import (
    CouplingParams,
    block_covariance,
    coalesced,
    coupled_step,
    coupling_matrix,
    distance_moment_bound,
    estimate_exit_before_coupling,
    estimate_tail,
    exit_probability_bound,
    g_derivatives,
    g_functionals,
    marginal_ks,
    proof_alpha,
    reflected_brownian_tail,
    simulate_coupled,
    simulate_coupled_ensemble,
    strong_feller_modulus,
)
from ergojump.models.observables import CoordinateObservable, TanhObservable

logger = logging.getLogger(__name__)

PARAMS = CouplingParams(delta=0.1, x0=[0.0], y0=[0.05])


def test_params_validation():
    """
    δ in (0, e^-1), the pair inside the δ-neighbourhood, couple_eps <= δ·1e-3
    """
    with pytest.raises(ValidationError, match="e\\^-1"):
        CouplingParams(delta=0.5, x0=[0.0], y0=[0.05])
    with pytest.raises(ValidationError, match="must not exceed delta"):
        CouplingParams(delta=0.1, x0=[0.0], y0=[0.2])
    with pytest.raises(ValidationError, match="couple_eps"):
        CouplingParams(delta=0.1, x0=[0.0], y0=[0.05], couple_eps=0.01)
    with pytest.raises(ValidationError):
        CouplingParams(delta=0.1, alpha=1.0, x0=[0.0], y0=[0.05])


def test_params_derived_values():
    """
    β = (|x0 - y0| / δ)^(α/2) and the default coalescence threshold
    """
    assert PARAMS.distance == pytest.approx(0.05)
    assert PARAMS.beta == pytest.approx(0.5**0.25)
    assert PARAMS.eps == pytest.approx(1e-5)
    assert CouplingParams(delta=0.1, x0=0.0, y0=0.1).beta == pytest.approx(1.0)


def test_coupling_matrix_on_additive_noise(jump_ou_2d: CoefficientSet):
    """
    σ = λ2 = 1 leaves only the reflection part λ2·(I - 2β²uu*)
    """
    params = CouplingParams(delta=0.1, x0=[0.0, 0.0], y0=[0.05, 0.0])
    c = coupling_matrix([1.0, 0.0], [0.0, 0.0], jump_ou_2d, params)
    expected = np.eye(2)
    expected[0, 0] -= 2.0 * params.beta**2
    assert np.allclose(c, expected)
    with pytest.raises(DegenerateDirectionError):
        coupling_matrix([1.0, 0.0], [1.0, 0.0], jump_ou_2d, params)


def test_block_covariance_is_psd(jump_ou_2d: CoefficientSet):
    """
    The block covariance of a batch of pairs is symmetric PSD
    """
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal((50, 2)), rng.standard_normal((50, 2))
    y[0] = x[0]
    block = block_covariance(x, y, jump_ou_2d, beta=0.8)
    sigma = block["sigma"]
    assert sigma.shape == (50, 4, 4)
    assert np.allclose(sigma, np.swapaxes(sigma, 1, 2))
    assert np.all(np.linalg.eigvalsh(sigma)[:, 0] >= -1e-10)
    assert block["r"][0] == 0.0


def test_g_functionals(jump_ou: CoefficientSet):
    """
    G = Ḡ = 4β² and F = -θ|x - y|² for the one-dimensional jump OU model
    """
    functionals = g_functionals(0.1, 0.0, jump_ou, PARAMS)
    assert functionals.G_bar == pytest.approx(4.0 * PARAMS.beta**2)
    assert functionals.F == pytest.approx(-0.01)
    assert functionals.g == pytest.approx(0.1 / 1.1)
    assert g_derivatives(0.0) == (0.0, 1.0, -2.0)


def test_coalesced_criteria():
    """
    Endpoint, segment and bridge crossing detection
    """
    before = np.array([[1.0], [1.0], [1.0], [1.0]])
    after = np.array([[0.0], [-1.0], [0.5], [0.5]])
    g_bar = np.array([4.0, 4.0, 4.0, 0.0])
    h = np.full(4, 0.01)
    aux = np.array([0.5, 0.5, 0.0, 0.0])
    hit = coalesced(before, after, g_bar, h, aux, 1e-5)
    assert hit.tolist() == [True, True, True, False]
    only_endpoint = coalesced(before, after, g_bar, h, aux, 1e-5, bridge_crossing=False)
    assert only_endpoint.tolist() == [True, False, False, False]


def test_coupled_step_keeps_glued_pairs(jump_ou: CoefficientSet):
    """
    A pair with x == y moves as one path, jumps included
    """
    x, y = coupled_step(
        jump_ou, PARAMS, 0.3, 0.3, 0.01, np.random.default_rng(1), marks=np.array([[0.4]])
    )
    assert np.array_equal(x, y)
    x, y = coupled_step(jump_ou, PARAMS, 0.0, 0.05, 0.01, np.random.default_rng(1))
    assert x.shape == (1,)
    assert not np.array_equal(x, y)


def test_single_coupled_path_glues(jump_ou: CoefficientSet):
    """
    From tau on the two components coincide
    """
    record = simulate_coupled(jump_ou, PARAMS, 2.0, 0.01, path_generator(0, 0))
    assert record.x_states[0, 0] == 0.0
    assert record.y_states[0, 0] == 0.05
    if math.isfinite(record.tau):
        after = record.grid.nodes >= record.tau
        assert np.array_equal(record.x_states[after], record.y_states[after])
        assert np.all(record.glued[after])
        assert record.distances[-1] == 0.0


def test_reflection_coupling_of_brownian_motion(brownian: CoefficientSet):
    """
    β = 1 is the reflection coupling, whose tail is erf(|x0 - y0| / sqrt(8t))
    """
    params = CouplingParams(delta=0.1, x0=[0.0], y0=[0.1])
    ensemble = simulate_coupled_ensemble(
        brownian, params, 1.0, 0.01, 4000, seed=3, checkpoints=[0.5, 1.0]
    )
    for t in (0.5, 1.0):
        tail = estimate_tail(ensemble, t)
        exact = reflected_brownian_tail(0.1, t)
        logger.info("P(tau > %s) = %.4f, exact %.4f", t, tail.estimate, exact)
        assert abs(tail.estimate - exact) <= 4.0 * tail.stderr + 0.01
    x_t, y_t = ensemble.states_at(1.0)
    coupled = np.isfinite(ensemble.tau) & (ensemble.tau <= 1.0)
    assert np.array_equal(x_t[coupled], y_t[coupled])


def test_tail_queries_are_checked(jump_ou: CoefficientSet):
    """
    Tail times inside [0, T], exit times with 2t <= T
    """
    ensemble = simulate_coupled_ensemble(jump_ou, PARAMS, 1.0, 0.01, 50, checkpoints=[1.0])
    assert estimate_tail(ensemble, 0.0).estimate == 1.0
    assert 0.0 <= estimate_exit_before_coupling(ensemble, 0.5).estimate <= 1.0
    with pytest.raises(UsageError):
        estimate_tail(ensemble, 1.5)
    with pytest.raises(UsageError):
        estimate_exit_before_coupling(ensemble, 0.6)


def test_coupled_ensemble_does_not_depend_on_threads(jump_ou_2d: CoefficientSet):
    """
    Thread count never changes the pairs
    """
    params = CouplingParams(delta=0.1, x0=[0.0, 0.0], y0=[0.03, 0.04])
    options = {"seed": 6, "checkpoints": [0.5], "chunk_size": 16}
    serial = simulate_coupled_ensemble(jump_ou_2d, params, 0.5, 0.01, 48, threads=1, **options)
    threaded = simulate_coupled_ensemble(jump_ou_2d, params, 0.5, 0.01, 48, threads=3, **options)
    assert np.array_equal(serial.x_states, threaded.x_states)
    assert np.array_equal(serial.tau, threaded.tau)
    assert np.array_equal(serial.jump_counts_x, serial.jump_counts_y)


def test_strong_feller_modulus_holds(jump_ou: CoefficientSet):
    """
    The paired estimate never exceeds 2‖φ‖P(τ > t)
    """
    report = strong_feller_modulus(
        jump_ou, PARAMS, 0.5, TanhObservable(), 500, 0.01, seed=2
    )
    assert report.holds
    assert report.lhs <= report.rhs + 1e-12
    assert report.phi_sup == 1.0
    assert report.tail.n == 500


def test_strong_feller_modulus_independent(lab: ErgoLab):
    """
    The independent estimator runs two further ensembles
    """
    report = lab.strong_feller_modulus(
        PARAMS, 0.5, TanhObservable(), 300, 0.01, estimator="independent"
    )
    assert report.estimator == "independent"
    assert report.lhs_stderr > 0.0


def test_strong_feller_needs_bounded_phi(jump_ou: CoefficientSet):
    """
    Unbounded test functions are refused
    """
    with pytest.raises(UsageError):
        strong_feller_modulus(jump_ou, PARAMS, 0.5, CoordinateObservable(), 10, 0.01)


def test_marginal_ks_passes(jump_ou: CoefficientSet):
    """
    Unglued components keep the law of single paths
    """
    report = marginal_ks(jump_ou, PARAMS, [0.5, 1.0], 400, 0.02, seed=7, chunk_size=128)
    assert len(report.entries) == 4
    assert report.jumps_synchronous
    assert report.passes


def test_proof_bounds():
    """
    Closed forms of the proof constants
    """
    assert proof_alpha(1.0, 1.0, 0.0, 0.1) == pytest.approx(math.exp(-2.2) / 3.0)
    assert distance_moment_bound(0.0, 0.05, 0.1, 0.0, 1.0, 0.0) == pytest.approx(1.1 * 0.05)
    assert exit_probability_bound(0.0, 0.05, 0.1, 0.0, 1.0, 0.0) == pytest.approx(11.0 * 0.05)
    assert reflected_brownian_tail(0.1, 0.0) == 1.0
