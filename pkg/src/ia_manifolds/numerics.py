"""
Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128`` stored
in numpy's default row-major (C) order. Eigenvalue and singular value
work is delegated to LAPACK through ``numpy.linalg``; this module pins the
sign/phase conventions on top of it so that every result is deterministic.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NumericsError",
    "NonHermitianInput",
    "ConvergenceFailure",
    "RankDeficient",
    "EigenDecomposition",
    "as_complex_matrix",
    "hermitian_eig",
    "thin_svd",
    "thin_qr",
    "gram_schmidt",
]

HERMITIAN_TOL = 1e-10
RANK_TOL = 1e-12


class NumericsError(ArithmeticError):
    """Base class for linear-algebra failures raised by this package."""


class NonHermitianInput(NumericsError, ValueError):
    pass


class ConvergenceFailure(NumericsError):
    pass


class RankDeficient(NumericsError, ValueError):
    pass


@dataclass(frozen=True)
class EigenDecomposition:
    """
    Eigen-pairs of a Hermitian matrix.

    Attributes
    ----------
    values : np.ndarray
        Real eigenvalues sorted in ascending order.
    vectors : np.ndarray
        Unitary matrix whose ``i``-th column pairs with ``values[i]``.
    """

    values: np.ndarray
    vectors: np.ndarray


def as_complex_matrix(A):
    """Return `A` as a finite 2-D complex128 array (no copy when possible)."""
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def _pin_column_phases(X):
    # Largest-magnitude entry of each column made real positive; argmax
    # takes the first index on ties, which keeps the choice deterministic.
    idx = np.argmax(np.abs(X), axis=0)
    pivots = X[idx, np.arange(X.shape[1])]
    mags = np.abs(pivots)
    phases = np.where(mags > 0, pivots / np.where(mags > 0, mags, 1.0), 1.0)
    return X * phases.conj()


def hermitian_eig(A):
    """
    Full eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    A : array_like, (n, n)
        Hermitian matrix; ``||A - A^H|| <= 1e-10 ||A||`` is required.

    Returns
    -------
    EigenDecomposition
        Ascending eigenvalues and orthonormal eigenvectors. Each
        eigenvector's largest-magnitude entry is real and positive.

    Raises
    ------
    NonHermitianInput
        If `A` is not square or not Hermitian within tolerance.
    ConvergenceFailure
        If LAPACK fails to converge.
    """
    A = as_complex_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise NonHermitianInput(f"matrix is not square: {A.shape}")
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.conj().T) > HERMITIAN_TOL * max(scale, np.finfo(float).tiny):
        raise NonHermitianInput("matrix is not Hermitian within tolerance")
    try:
        values, vectors = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return EigenDecomposition(values, _pin_column_phases(vectors))


def _check_rank(Y, singular_values=None):
    s = np.linalg.svd(Y, compute_uv=False) if singular_values is None else singular_values
    if s[-1] <= RANK_TOL * s[0]:
        raise RankDeficient(
            f"matrix of shape {Y.shape} is numerically rank deficient "
            f"(sigma_min/sigma_max = {s[-1] / s[0] if s[0] > 0 else 0.0:.3g})"
        )


def _check_tall(Y):
    if Y.shape[0] < Y.shape[1]:
        raise ValueError(f"expected n >= p, got shape {Y.shape}")


def thin_svd(Y):
    """
    Economy SVD ``Y = U diag(S) V^H`` of a tall matrix.

    Returns
    -------
    U : np.ndarray, (n, p)
    S : np.ndarray, (p,)
        Non-negative singular values in descending order.
    V : np.ndarray, (p, p)
        Note this is ``V`` itself, not ``V^H``.
    """
    Y = as_complex_matrix(Y)
    _check_tall(Y)
    try:
        U, S, Vh = np.linalg.svd(Y, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return U, S, Vh.conj().T


def thin_qr(Y):
    """
    Economy QR factorization with a real positive diagonal in ``R``.

    Raises
    ------
    RankDeficient
        If the smallest singular value of `Y` is below ``1e-12`` times the
        largest.
    """
    Y = as_complex_matrix(Y)
    _check_tall(Y)
    _check_rank(Y)
    Q, R = np.linalg.qr(Y, mode="reduced")
    diag = np.diagonal(R)
    phases = diag / np.abs(diag)
    Q = Q * phases
    R = phases.conj()[:, None] * R
    # R is exactly upper triangular; the diagonal is real up to rounding
    R[np.diag_indices_from(R)] = np.abs(diag)
    return Q, R


def gram_schmidt(Y):
    """
    Orthonormalize the columns of `Y` by modified Gram-Schmidt.

    Each column is orthogonalized twice against the previously accepted
    ones ("twice is enough") and normalized so that its inner product with
    the source column is real and positive. The result therefore agrees
    with the ``Q`` factor of :func:`thin_qr`.

    Parameters
    ----------
    Y : array_like, (n, p)
        Full-column-rank matrix.

    Returns
    -------
    np.ndarray, (n, p)
        Orthonormal columns; column ``j`` spans the same space as the first
        ``j + 1`` columns of `Y`.
    """
    Y = as_complex_matrix(Y)
    _check_tall(Y)
    n, p = Y.shape
    if p == 1:
        # cheap path for the common single-stream case
        nrm = np.linalg.norm(Y)
        if not nrm > 0:
            raise RankDeficient("zero column")
        return Y / nrm
    _check_rank(Y)
    Q = np.array(Y, copy=True)
    for j in range(p):
        v = Q[:, j]
        for _ in range(2):
            for i in range(j):
                v = v - Q[:, i] * np.vdot(Q[:, i], v)
        Q[:, j] = v / np.linalg.norm(v)
    return Q
