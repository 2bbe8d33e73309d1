"""
Descent directions, metrics and retractions for the three search spaces.

* ``EUCLIDEAN``: flat ``C^{n x p}``; the iterate is pulled back onto the
  orthonormality constraint by Gram-Schmidt.
* ``STIEFEL``: canonical metric ``Re tr(Z2^H (I - X X^H / 2) Z1)``; the
  retraction is the closest orthonormal matrix (polar factor from the SVD).
* ``GRASSMANN``: subspaces represented by an orthonormal basis, horizontal
  tangent vectors ``X^H Z = 0``; the retraction is the QR ``Q`` factor.

Only projection retractions are provided; there are no geodesics.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .numerics import gram_schmidt, thin_qr, thin_svd, RankDeficient

__all__ = [
    "ManifoldKind",
    "TangentDirection",
    "descent_direction",
    "inner_product",
    "retract",
    "manifold_dim",
    "tangent_dim",
]


class ManifoldKind(enum.Enum):
    EUCLIDEAN = "euclidean"
    STIEFEL = "stiefel"
    GRASSMANN = "grassmann"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown manifold kind {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class TangentDirection:
    Z: np.ndarray
    kind: ManifoldKind


def descent_direction(kind, V, D):
    """
    Steepest-descent direction at `V` given the Euclidean gradient `D`.

    Returns ``-D`` in flat space, ``V D^H V - D`` on the Stiefel manifold
    and ``-(I - V V^H) D`` on the Grassmann manifold.
    """
    kind = ManifoldKind.parse(kind)
    if V.shape != D.shape:
        raise ValueError(f"shape mismatch: V {V.shape}, D {D.shape}")
    if kind is ManifoldKind.EUCLIDEAN:
        Z = -D
    elif kind is ManifoldKind.STIEFEL:
        Z = V @ (D.conj().T @ V) - D
    else:
        Z = V @ (V.conj().T @ D) - D
    return TangentDirection(Z, kind)


def inner_product(kind, V, Z1, Z2):
    """Real-valued metric ``<Z1, Z2>`` of the given kind at point `V`."""
    kind = ManifoldKind.parse(kind)
    if kind is ManifoldKind.STIEFEL:
        # tr(Z2^H Z1) - tr((V^H Z2)^H (V^H Z1)) / 2
        return float(
            np.real(np.vdot(Z2, Z1)) - 0.5 * np.real(np.vdot(V.conj().T @ Z2, V.conj().T @ Z1))
        )
    return float(np.real(np.vdot(Z2, Z1)))


def retract(kind, Y):
    """
    Map a full-column-rank matrix back to orthonormal columns.

    Raises
    ------
    RankDeficient
        If `Y` has lost column rank.
    """
    kind = ManifoldKind.parse(kind)
    if kind is ManifoldKind.EUCLIDEAN:
        return gram_schmidt(Y)
    if kind is ManifoldKind.STIEFEL:
        U, S, Vr = thin_svd(Y)
        if not S[-1] > 1e-12 * S[0]:
            raise RankDeficient("cannot project a rank-deficient matrix onto the Stiefel manifold")
        return U @ Vr.conj().T
    return thin_qr(Y)[0]


def manifold_dim(kind, n, p):
    """
    Dimension of the search space, using the counting ``np``,
    ``np - p(p + 1)/2`` and ``p(n - p)`` for the flat, Stiefel and
    Grassmann cases respectively.
    """
    kind = ManifoldKind.parse(kind)
    if kind is ManifoldKind.EUCLIDEAN:
        return n * p
    if kind is ManifoldKind.STIEFEL:
        return n * p - p * (p + 1) // 2
    return p * (n - p)


def tangent_dim(kind, n, p):
    """Real dimension of the tangent space (``2np``, ``p(2n - p)``, ``2p(n - p)``)."""
    kind = ManifoldKind.parse(kind)
    if kind is ManifoldKind.EUCLIDEAN:
        return 2 * n * p
    if kind is ManifoldKind.STIEFEL:
        return p * (2 * n - p)
    return p * (2 * n - 2 * p)
