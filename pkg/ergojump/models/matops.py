"""
Symmetric Positive Semi-Definite Matrix Algebra

Square roots by symmetric eigendecomposition, the reduced diffusion
σ_λ = sqrt(σσ* - λI), Hilbert-Schmidt norms and a direct numerical check of
the commuting-pair square-root inequality.
"""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field

from ergojump._config import RunConfig
from ergojump.exceptions import NotPSDError, PreconditionError
from ergojump.models._base import ArrayModel, ErgoModel

logger = logging.getLogger(__name__)

MatrixLike = Union["SymmetricMatrix", np.ndarray, Sequence[Sequence[float]]]


class SymmetricMatrix(ArrayModel):
    """
    Real Symmetric Matrix Stored as its Upper Triangle

    Symmetry holds by construction: only one triangle is ever stored.
    """

    dim: int = Field(ge=1)
    packed: np.ndarray

    @classmethod
    def from_dense(cls, matrix: MatrixLike) -> "SymmetricMatrix":
        """
        Build from a dense square matrix, keeping its upper triangle

        Parameters
        ----------
        matrix: MatrixLike

        Returns
        -------
        SymmetricMatrix
        """
        if isinstance(matrix, SymmetricMatrix):
            return matrix
        dense = np.atleast_2d(np.asarray(matrix, dtype=float))
        if dense.shape[0] != dense.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {dense.shape}")
        rows, cols = np.triu_indices(dense.shape[0])
        packed = dense[rows, cols].copy()
        packed.setflags(write=False)
        return cls(dim=dense.shape[0], packed=packed)

    @classmethod
    def identity(cls, dim: int) -> "SymmetricMatrix":
        """
        Identity matrix of size dim
        """
        return cls.from_dense(np.eye(dim))

    @classmethod
    def diagonal(cls, values: Sequence[float]) -> "SymmetricMatrix":
        """
        Diagonal matrix with the given entries
        """
        return cls.from_dense(np.diag(np.asarray(values, dtype=float)))

    def dense(self) -> np.ndarray:
        """
        Dense (dim, dim) copy of the matrix

        Returns
        -------
        np.ndarray
        """
        out = np.zeros((self.dim, self.dim))
        rows, cols = np.triu_indices(self.dim)
        out[rows, cols] = self.packed
        out[cols, rows] = self.packed
        return out

    def eigh(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Eigenvalues (ascending) and orthonormal eigenvectors

        Returns
        -------
        Tuple[np.ndarray, np.ndarray]
        """
        return np.linalg.eigh(self.dense())

    @property
    def eigenvalues(self) -> np.ndarray:
        """
        Eigenvalues sorted ascending
        """
        return np.linalg.eigvalsh(self.dense())


def _dense(matrix: MatrixLike) -> np.ndarray:
    if isinstance(matrix, SymmetricMatrix):
        return matrix.dense()
    return np.atleast_2d(np.asarray(matrix, dtype=float))


def hs_norm(matrix: MatrixLike) -> float:
    """
    Hilbert-Schmidt (Frobenius) Norm

    Parameters
    ----------
    matrix: MatrixLike
        Any square matrix with finite entries

    Returns
    -------
    float
    """
    return float(np.sqrt(np.sum(np.square(_dense(matrix)))))


def hs_norm_stack(matrices: np.ndarray) -> np.ndarray:
    """
    Hilbert-Schmidt norm of every matrix of an (n, d, d) stack
    """
    return np.sqrt(np.sum(np.square(matrices), axis=(-2, -1)))


def default_clip_tolerance(norm: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """
    Default eigenvalue clipping tolerance: 1e-10 * max(1, ||M||_HS)
    """
    return RunConfig.CLIP_TOLERANCE * np.maximum(1.0, norm)


def sqrt_psd(matrix: MatrixLike, clip_tol: Optional[float] = None) -> SymmetricMatrix:
    """
    Unique Symmetric PSD Square Root

    Eigenvalues in [-clip_tol, 0) are clipped to zero before the square root is
    taken.

    Parameters
    ----------
    matrix: MatrixLike
        Symmetric matrix with eigenvalues >= -clip_tol
    clip_tol: Optional[float]
        Clipping tolerance, defaults to 1e-10 * max(1, ||M||_HS)

    Returns
    -------
    SymmetricMatrix

    Raises
    ------
    NotPSDError
        When an eigenvalue lies below -clip_tol
    """
    dense = _dense(matrix)
    dense = 0.5 * (dense + dense.T)
    if clip_tol is None:
        clip_tol = float(default_clip_tolerance(hs_norm(dense)))
    eigenvalues, eigenvectors = np.linalg.eigh(dense)
    if eigenvalues[0] < -clip_tol:
        raise NotPSDError(
            f"matrix is not positive semi-definite: eigenvalue {eigenvalues[0]:.6g} "
            f"< -{clip_tol:.3g}",
            eigenvalue=float(eigenvalues[0]),
        )
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    root = (eigenvectors * roots) @ eigenvectors.T
    return SymmetricMatrix.from_dense(root)


def sqrt_psd_stack(
    matrices: np.ndarray, clip_tol: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Symmetric PSD square roots of an (n, d, d) stack

    Parameters
    ----------
    matrices: np.ndarray
        Stack of symmetric matrices
    clip_tol: Optional[np.ndarray]
        Per-matrix clipping tolerance, defaults to 1e-10 * max(1, ||M||_HS)

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        The roots and the smallest eigenvalue of each input. Entries whose
        smallest eigenvalue is below -clip_tol are returned as NaN roots so the
        caller can decide how to report them.
    """
    sym = 0.5 * (matrices + np.swapaxes(matrices, -1, -2))
    if clip_tol is None:
        clip_tol = default_clip_tolerance(hs_norm_stack(sym))
    eigenvalues, eigenvectors = np.linalg.eigh(sym)
    smallest = eigenvalues[..., 0]
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    out = np.einsum("...ik,...k,...jk->...ij", eigenvectors, roots, eigenvectors)
    bad = smallest < -np.asarray(clip_tol)
    if np.any(bad):
        out[bad] = np.nan
    return out, smallest


def sigma_lambda(
    sigma_x: MatrixLike, lambda2: float, clip_tol: Optional[float] = None
) -> SymmetricMatrix:
    """
    Reduced Diffusion sqrt(σσ* - λ2·I)

    Parameters
    ----------
    sigma_x: MatrixLike
        Diffusion matrix σ(x), not necessarily symmetric
    lambda2: float
        Ellipticity constant
    clip_tol: Optional[float]
        Clipping tolerance passed to sqrt_psd

    Returns
    -------
    SymmetricMatrix

    Raises
    ------
    NotPSDError
        When σσ* - λ2·I is not PSD, i.e. the ellipticity bound fails at this point
    """
    sigma = _dense(sigma_x)
    reduced = sigma @ sigma.T - lambda2 * np.eye(sigma.shape[0])
    return sqrt_psd(reduced, clip_tol=clip_tol)


def sigma_lambda_stack(
    sigmas: np.ndarray, lambda2: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reduced diffusion of an (n, d, d) stack of diffusion matrices

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        Roots (NaN where σσ* - λ2·I is not PSD) and the smallest eigenvalue of
        σσ* - λ2·I per matrix
    """
    dim = sigmas.shape[-1]
    reduced = np.einsum("...ik,...jk->...ij", sigmas, sigmas) - lambda2 * np.eye(dim)
    return sqrt_psd_stack(reduced)


class Lemma21Gap(ErgoModel):
    """
    Both Sides of ||A - B|| <= ||A_λ - B_λ|| for a Commuting Pair
    """

    lhs: float
    rhs: float
    holds: bool
    norm_gap: float = Field(description="||A-B||^2 - ||A_λ-B_λ||^2")
    trace_form: float = Field(description="2 (tr(A_λ B_λ) - tr(AB) + λ d)")


def lemma21_gap(A: MatrixLike, B: MatrixLike, lam: float) -> Lemma21Gap:
    """
    Evaluate the Square-Root Inequality for Commuting Symmetric Matrices

    Parameters
    ----------
    A: MatrixLike
        Symmetric matrix with all eigenvalues >= sqrt(lam)
    B: MatrixLike
        Symmetric matrix with all eigenvalues >= sqrt(lam), commuting with A
    lam: float
        Positive shift λ

    Returns
    -------
    Lemma21Gap

    Raises
    ------
    PreconditionError
        When A and B do not commute within 1e-9 ||A|| ||B||, or when an
        eigenvalue lies below sqrt(lam)
    """
    a_mat = _dense(A)
    b_mat = _dense(B)
    dim = a_mat.shape[0]
    norm_a, norm_b = hs_norm(a_mat), hs_norm(b_mat)
    commutator = hs_norm(a_mat @ b_mat - b_mat @ a_mat)
    if commutator > RunConfig.COMMUTATION_TOLERANCE * max(norm_a * norm_b, 1e-300):
        raise PreconditionError(
            f"A and B do not commute: ||AB - BA|| = {commutator:.3g}"
        )
    floor = np.sqrt(lam) * (1.0 - 1e-12)
    for name, mat in (("A", a_mat), ("B", b_mat)):
        smallest = float(np.linalg.eigvalsh(0.5 * (mat + mat.T))[0])
        if smallest < floor:
            raise PreconditionError(
                f"{name} has eigenvalue {smallest:.6g} below sqrt(lambda) = {np.sqrt(lam):.6g}"
            )
    identity = np.eye(dim)
    a_lam = sqrt_psd(a_mat @ a_mat - lam * identity).dense()
    b_lam = sqrt_psd(b_mat @ b_mat - lam * identity).dense()
    lhs = hs_norm(a_mat - b_mat)
    rhs = hs_norm(a_lam - b_lam)
    trace_form = 2.0 * (
        np.trace(a_lam @ b_lam) - np.trace(a_mat @ b_mat) + lam * dim
    )
    return Lemma21Gap(
        lhs=lhs,
        rhs=rhs,
        holds=bool(lhs <= rhs + 1e-9),
        norm_gap=lhs**2 - rhs**2,
        trace_form=float(trace_form),
    )


class Lemma21SuiteReport(ErgoModel):
    """
    Outcome of the Seeded Commuting-Pair Property Run
    """

    n_pairs: int
    dim: int
    lambdas: List[float]
    seed: int
    holds_count: int
    worst_margin: float = Field(description="max over pairs of lhs - rhs")
    worst_trace_relative_error: float
    trace_identity_holds: bool

    @property
    def summary(self) -> str:
        """
        Short human readable verdict, e.g. "holds: 10000/10000"
        """
        return f"holds: {self.holds_count}/{self.n_pairs}"


def random_orthogonal(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """
    Haar-distributed orthogonal matrices via a sign-corrected QR factorisation
    """
    gaussian = rng.standard_normal((n, dim, dim))
    q, r = np.linalg.qr(gaussian)
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    return q * signs[:, None, :]


def lemma21_suite(
    n_pairs: int = 10_000,
    lambdas: Sequence[float] = (0.5, 1.0, 2.0),
    dim: int = 3,
    seed: int = 0,
    upper: float = 10.0,
) -> Lemma21SuiteReport:
    """
    Run the commuting-pair inequality on seeded random pairs

    Pair i shares a random orthogonal eigenbasis U between A and B, uses
    λ = lambdas[i % len(lambdas)] and eigenvalues drawn uniformly from
    [sqrt(λ)(1 + 1e-3), upper].

    Parameters
    ----------
    n_pairs: int
    lambdas: Sequence[float]
    dim: int
    seed: int
    upper: float

    Returns
    -------
    Lemma21SuiteReport
    """
    rng = np.random.default_rng(seed)
    lam = np.asarray(lambdas, dtype=float)[np.arange(n_pairs) % len(lambdas)]
    lower = np.sqrt(lam) * (1.0 + 1e-3)
    basis = random_orthogonal(rng, n_pairs, dim)
    eig_a = lower[:, None] + (upper - lower[:, None]) * rng.random((n_pairs, dim))
    eig_b = lower[:, None] + (upper - lower[:, None]) * rng.random((n_pairs, dim))

    def compose(eigs: np.ndarray) -> np.ndarray:
        return np.einsum("nik,nk,njk->nij", basis, eigs, basis)

    a_mat, b_mat = compose(eig_a), compose(eig_b)
    commutator = hs_norm_stack(a_mat @ b_mat - b_mat @ a_mat)
    scale = hs_norm_stack(a_mat) * hs_norm_stack(b_mat)
    if np.any(commutator > RunConfig.COMMUTATION_TOLERANCE * scale):
        raise PreconditionError("generated pairs do not commute to tolerance")
    identity = np.eye(dim)
    shift = lam[:, None, None] * identity
    a_lam, _ = sqrt_psd_stack(a_mat @ a_mat - shift)
    b_lam, _ = sqrt_psd_stack(b_mat @ b_mat - shift)
    lhs = hs_norm_stack(a_mat - b_mat)
    rhs = hs_norm_stack(a_lam - b_lam)
    tr_ab = np.trace(a_mat @ b_mat, axis1=-2, axis2=-1)
    tr_lam = np.trace(a_lam @ b_lam, axis1=-2, axis2=-1)
    trace_form = 2.0 * (tr_lam - tr_ab + lam * dim)
    relative = np.abs((lhs**2 - rhs**2) - trace_form) / (1.0 + np.abs(tr_ab) + lam * dim)
    holds = lhs <= rhs + 1e-9
    logger.debug(
        "commuting-pair suite: %s/%s pairs hold, worst trace error %.3g",
        int(holds.sum()),
        n_pairs,
        float(relative.max()),
    )
    return Lemma21SuiteReport(
        n_pairs=n_pairs,
        dim=dim,
        lambdas=[float(value) for value in lambdas],
        seed=seed,
        holds_count=int(holds.sum()),
        worst_margin=float(np.max(lhs - rhs)),
        worst_trace_relative_error=float(relative.max()),
        trace_identity_holds=bool(np.all(relative <= 1e-8)),
    )
