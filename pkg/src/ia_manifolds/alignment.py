"""
Leakage-interference cost and its Euclidean gradient.

A precoder set is a plain list of ``K`` arrays, ``V[j]`` of shape
``(M[j], d[j])`` with orthonormal columns. Users are indexed from 0.

The cost is

    f(V) = sum_k sum_{i < d[k]} |lambda_i(Q[k])|,
    Q[k] = sum_{j != k} (P[j] / d[j]) H[k][j] V[j] V[j]^H H[k][j]^H,

with eigenvalues in ascending order. Its gradient with respect to ``V[j]``
under the real inner product ``Re tr(A^H B)`` is

    D[j] = 2 (P[j] / d[j]) sum_{k != j} H[k][j]^H U[k] U[k]^H H[k][j] V[j],

where ``U[k]`` holds the eigenvectors of the ``d[k]`` smallest eigenvalues
of ``Q[k]``. This is the first-order perturbation of a sum of simple
eigenvalues and is only a subgradient when ``lambda_{d[k]}`` and
``lambda_{d[k]+1}`` coincide.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .numerics import EigenDecomposition, hermitian_eig

__all__ = [
    "DegenerateSpectrumWarning",
    "ReceiverAnalysis",
    "check_precoders",
    "interference_covariance",
    "analyze_receiver",
    "receiver_filters",
    "leakage_cost",
    "euclidean_gradient",
]

ORTHONORMAL_TOL = 1e-10
SPECTRAL_GAP_TOL = 1e-9


class DegenerateSpectrumWarning(RuntimeWarning):
    """The gradient was evaluated where the cost is not differentiable."""


@dataclass(frozen=True)
class ReceiverAnalysis:
    """Interference covariance at one receiver and its zero-forcing filter."""

    Q: np.ndarray
    eig: EigenDecomposition
    U: np.ndarray
    leakage: float


def check_precoders(V, cfg=None, tol=ORTHONORMAL_TOL):
    """Raise ``ValueError`` unless every ``V[j]`` has orthonormal columns."""
    for j, Vj in enumerate(V):
        if cfg is not None and Vj.shape != (cfg.M[j], cfg.d[j]):
            raise ValueError(f"V[{j}] has shape {Vj.shape}, expected {(cfg.M[j], cfg.d[j])}")
        err = np.linalg.norm(Vj.conj().T @ Vj - np.eye(Vj.shape[1]))
        if err > tol:
            raise ValueError(f"V[{j}] is not orthonormal (||V^H V - I|| = {err:.3g})")


def interference_covariance(ch, V, cfg, k):
    """Interference covariance matrix ``Q[k]`` seen at receiver `k`."""
    Q = np.zeros((cfg.N[k], cfg.N[k]), dtype=np.complex128)
    for j in range(cfg.K):
        if j == k:
            continue
        G = ch.H[k][j] @ V[j]
        Q += (cfg.P[j] / cfg.d[j]) * (G @ G.conj().T)
    return Q


def analyze_receiver(ch, V, cfg, k):
    Q = interference_covariance(ch, V, cfg, k)
    eig = hermitian_eig(Q)
    dk = cfg.d[k]
    return ReceiverAnalysis(
        Q=Q,
        eig=eig,
        U=eig.vectors[:, :dk],
        leakage=float(np.sum(np.abs(eig.values[:dk]))),
    )


def receiver_filters(ch, V, cfg):
    """Zero-forcing filters ``U[k]``: eigenvectors of the smallest eigenvalues of ``Q[k]``."""
    return [analyze_receiver(ch, V, cfg, k).U for k in range(cfg.K)]


def leakage_cost(ch, V, cfg):
    """
    Total leakage interference ``f(V)``.

    Parameters
    ----------
    ch : ChannelSet
    V : list of np.ndarray
        Precoders, one per transmitter.
    cfg : NetworkConfig

    Returns
    -------
    float
        Non-negative cost; zero means perfect alignment.
    """
    total = 0.0
    for k in range(cfg.K):
        lam = np.linalg.eigvalsh(interference_covariance(ch, V, cfg, k))
        total += np.sum(np.abs(lam[: cfg.d[k]]))
    return float(total)


def euclidean_gradient(ch, V, cfg, j, receivers=None):
    """
    Gradient of :func:`leakage_cost` with respect to ``V[j]``.

    `receivers` may carry precomputed :class:`ReceiverAnalysis` objects for
    every receiver (index ``j`` is ignored). A
    :class:`DegenerateSpectrumWarning` is issued when some receiver lacks a
    spectral gap after its ``d[k]`` smallest eigenvalues.
    """
    Vj = V[j]
    D = np.zeros_like(Vj, dtype=np.complex128)
    for k in range(cfg.K):
        if k == j:
            continue
        rx = receivers[k] if receivers is not None else analyze_receiver(ch, V, cfg, k)
        dk = cfg.d[k]
        vals = rx.eig.values
        if dk < len(vals) and vals[dk] - vals[dk - 1] <= SPECTRAL_GAP_TOL:
            warnings.warn(
                f"receiver {k}: eigenvalues {dk - 1} and {dk} are not separated; "
                "returning a subgradient",
                DegenerateSpectrumWarning,
                stacklevel=2,
            )
        W = rx.U.conj().T @ ch.H[k][j]
        D += W.conj().T @ (W @ Vj)
    return (2.0 * cfg.P[j] / cfg.d[j]) * D
