"""
Run Tests on the Symmetric Matrix Algebra
"""

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergojump.exceptions import NotPSDError, PreconditionError
from ergojump.models.matops import (
    SymmetricMatrix,
    hs_norm,
    lemma21_gap,
    lemma21_suite,
    random_orthogonal,
    sigma_lambda,
    sigma_lambda_stack,
    sqrt_psd,
    sqrt_psd_stack,
)

logger = logging.getLogger(__name__)


def test_symmetric_matrix_keeps_upper_triangle():
    """
    Only the upper triangle is stored, so the dense form is symmetric
    """
    matrix = SymmetricMatrix.from_dense([[1.0, 2.0], [5.0, 3.0]])
    dense = matrix.dense()
    assert np.array_equal(dense, dense.T)
    assert dense[1, 0] == 2.0
    assert SymmetricMatrix.identity(3).eigenvalues.tolist() == [1.0, 1.0, 1.0]


def test_sqrt_of_diagonal():
    """
    sqrt(diag(4, 9)) = diag(2, 3)
    """
    root = sqrt_psd(SymmetricMatrix.diagonal([4.0, 9.0]))
    assert np.allclose(root.dense(), np.diag([2.0, 3.0]), atol=1e-12)


def test_sqrt_clips_tiny_negative_eigenvalues():
    """
    Eigenvalues just below zero are clipped
    """
    root = sqrt_psd(np.diag([1.0, -1e-14]))
    assert np.allclose(root.dense(), np.diag([1.0, 0.0]))


def test_sqrt_rejects_negative_definite():
    """
    A clearly negative eigenvalue raises with the eigenvalue attached
    """
    with pytest.raises(NotPSDError) as error:
        sqrt_psd(np.diag([1.0, -0.5]))
    assert error.value.eigenvalue == pytest.approx(-0.5)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    dim=st.integers(min_value=1, max_value=4),
)
def test_sqrt_squares_back(seed: int, dim: int):
    """
    sqrt(M)² = M for random PSD matrices
    """
    rng = np.random.default_rng(seed)
    factor = rng.standard_normal((dim, dim))
    matrix = factor @ factor.T
    root = sqrt_psd(matrix).dense()
    assert np.allclose(root @ root, matrix, atol=1e-8 * max(1.0, hs_norm(matrix)))
    assert np.all(np.linalg.eigvalsh(root) >= -1e-8)


def test_sqrt_stack_marks_bad_rows():
    """
    Rows that are not PSD come back as NaN roots
    """
    stack = np.stack([np.eye(2), np.diag([1.0, -1.0])])
    roots, smallest = sqrt_psd_stack(stack)
    assert np.allclose(roots[0], np.eye(2))
    assert np.all(np.isnan(roots[1]))
    assert smallest.tolist() == pytest.approx([1.0, -1.0])


def test_sigma_lambda_of_scaled_identity():
    """
    σ = 2I, λ2 = 3 gives sqrt(4 - 3)·I = I
    """
    reduced = sigma_lambda(2.0 * np.eye(2), 3.0)
    assert np.allclose(reduced.dense(), np.eye(2))
    stacked, _ = sigma_lambda_stack(np.stack([2.0 * np.eye(2)] * 3), 3.0)
    assert np.allclose(stacked, np.eye(2))


def test_sigma_lambda_rejects_too_large_lambda():
    """
    λ2 above the ellipticity of σ fails
    """
    with pytest.raises(NotPSDError):
        sigma_lambda(np.eye(2), 2.0)


def test_lemma21_gap_on_diagonal_pair():
    """
    Diagonal matrices commute and satisfy the inequality
    """
    gap = lemma21_gap(np.diag([2.0, 3.0]), np.diag([4.0, 1.5]), 1.0)
    assert gap.holds
    assert gap.lhs <= gap.rhs + 1e-9
    assert gap.norm_gap == pytest.approx(gap.trace_form, abs=1e-9)


def test_lemma21_gap_rejects_non_commuting_pair():
    """
    Non-commuting inputs are rejected, not tested
    """
    a_mat = np.array([[2.0, 0.5], [0.5, 3.0]])
    b_mat = np.diag([2.0, 4.0])
    with pytest.raises(PreconditionError):
        lemma21_gap(a_mat, b_mat, 1.0)


def test_lemma21_gap_rejects_small_eigenvalues():
    """
    Every eigenvalue must be at least sqrt(λ)
    """
    with pytest.raises(PreconditionError):
        lemma21_gap(np.diag([0.5, 3.0]), np.diag([2.0, 2.0]), 1.0)


def test_random_orthogonal_is_orthogonal():
    """
    QᵀQ = I for every generated basis
    """
    basis = random_orthogonal(np.random.default_rng(3), 5, 3)
    products = np.einsum("nki,nkj->nij", basis, basis)
    assert np.allclose(products, np.eye(3))


def test_lemma21_suite_small():
    """
    A reduced property run holds on every pair
    """
    report = lemma21_suite(n_pairs=500, seed=1)
    logger.info(report.summary)
    assert report.holds_count == 500
    assert report.summary == "holds: 500/500"
    assert report.trace_identity_holds


@pytest.mark.slow
def test_lemma21_suite_full():
    """
    The full 10 000 pair run
    """
    report = lemma21_suite()
    assert report.summary == "holds: 10000/10000"
    assert report.worst_trace_relative_error <= 1e-8
