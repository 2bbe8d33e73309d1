"""
Post-hoc evaluation of a precoder design.

Sum rates assume the zero-forcing receivers ``U[k]`` and treat residual
interference as Gaussian noise (unit noise variance):

    R = sum_k log2 det(I + (P[k]/d[k]) A_k^{-1} U[k]^H H[k][k] V[k] V[k]^H H[k][k]^H U[k])
    A_k = U[k]^H (I + Q[k]) U[k]
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .alignment import analyze_receiver
from .network import snr_db_to_power
from .numerics import NumericsError, RankDeficient, gram_schmidt

__all__ = [
    "DegenerateStart",
    "NumericalFailure",
    "MetricsReport",
    "normalized_leakage",
    "principal_angles",
    "interference_angles",
    "max_interference_angle",
    "user_rates",
    "sum_rate",
    "dof_slope",
]

DEGENERATE_START_TOL = 1e-15


class DegenerateStart(ValueError):
    """The initial cost is already (numerically) zero."""


class NumericalFailure(NumericsError):
    pass


@dataclass
class MetricsReport:
    normalized_trace: np.ndarray
    raw_trace: np.ndarray
    angles: list = field(default_factory=list)
    rates: list = field(default_factory=list)
    dof_estimate: float = float("nan")


def normalized_leakage(trace):
    """
    Divide a cost trace by its first entry.

    `trace` may be a sequence of costs or of ``(iteration, cost)`` pairs.
    """
    costs = np.asarray([c[1] if isinstance(c, tuple) else c for c in trace], dtype=float)
    if costs.size == 0:
        raise ValueError("empty trace")
    if costs[0] <= DEGENERATE_START_TOL:
        raise DegenerateStart(f"initial cost {costs[0]:.3g} is already at alignment")
    return costs / costs[0]


def principal_angles(A, B):
    """
    Principal angles (radians, ascending) between the column spans of `A`
    and `B`.

    Both inputs are orthonormalized first. Cosines are the singular values
    of ``A^H B`` clipped to ``[0, 1]``; angles below ``pi/4`` are recomputed
    from the sines, the singular values of ``(I - A A^H) B``, because
    ``arccos`` cannot resolve angles much below ``1e-8``.
    """
    Qa = gram_schmidt(A)
    Qb = gram_schmidt(B)
    if Qa.shape[1] < Qb.shape[1]:
        Qa, Qb = Qb, Qa
    cos = np.clip(np.linalg.svd(Qa.conj().T @ Qb, compute_uv=False), 0.0, 1.0)
    sin = np.clip(
        np.linalg.svd(Qb - Qa @ (Qa.conj().T @ Qb), compute_uv=False), 0.0, 1.0
    )
    # cos is descending and sin is descending; pair largest cos with smallest sin
    theta = np.arccos(cos)
    small = theta < np.pi / 4
    theta[small] = np.arcsin(sin[::-1][small])
    return theta


def interference_angles(ch, V, cfg, k):
    """
    Pairwise principal angles between interference subspaces at receiver `k`.

    Returns
    -------
    dict
        ``{(j1, j2): angles}`` for every interferer pair ``j1 < j2``, both
        different from `k`. Empty when fewer than two interferers exist.

    Raises
    ------
    RankDeficient
        If some ``H[k][j] V[j]`` has lost column rank.
    """
    others = [j for j in range(cfg.K) if j != k]
    blocks = {j: ch.H[k][j] @ V[j] for j in others}
    out = {}
    for j1, j2 in combinations(others, 2):
        try:
            out[(j1, j2)] = principal_angles(blocks[j1], blocks[j2])
        except RankDeficient as exc:
            raise RankDeficient(f"receiver {k}: interference block lost rank") from exc
    return out


def max_interference_angle(ch, V, cfg, k):
    angles = interference_angles(ch, V, cfg, k)
    if not angles:
        return float("nan")
    return float(max(np.max(a) for a in angles.values()))


def user_rates(ch, V, cfg):
    """Per-user achievable rate in bits/s/Hz with the configured powers."""
    rates = []
    for k in range(cfg.K):
        rx = analyze_receiver(ch, V, cfg, k)
        U = rx.U
        A = U.conj().T @ (np.eye(cfg.N[k]) + rx.Q) @ U
        A = 0.5 * (A + A.conj().T)
        G = U.conj().T @ ch.H[k][k] @ V[k]
        S = (cfg.P[k] / cfg.d[k]) * (G @ G.conj().T)
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"receiver {k}: noise-plus-interference not positive definite") from exc
        # det(I + A^{-1} S) = det(A + S) / det(A)
        _, logdet_as = np.linalg.slogdet(A + S)
        _, logdet_a = np.linalg.slogdet(A)
        rates.append(float(logdet_as - logdet_a) / np.log(2.0))
    return rates


def sum_rate(ch, V, cfg, snr_db=None):
    """
    Sum rate in bits/s/Hz.

    With `snr_db` given, every user's power is set to ``10**(snr_db/10)``
    before the receive filters are computed; otherwise ``cfg.P`` is used.
    """
    if snr_db is not None:
        cfg = cfg.with_snr(snr_db)
    return float(sum(user_rates(ch, V, cfg)))


def dof_slope(rates):
    """
    High-SNR slope of sum rate against ``log2(SNR)``.

    Parameters
    ----------
    rates : sequence of (snr_db, rate)
        At least two points with strictly increasing SNR.

    Returns
    -------
    float
        Least-squares slope over the highest-SNR half of the points
        (``n // 2`` points, but at least two), in bits per doubling of SNR.
    """
    pts = np.asarray(rates, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two (snr_db, rate) points")
    if np.any(np.diff(pts[:, 0]) <= 0):
        raise ValueError("snr_db must be strictly increasing")
    n_top = max(2, pts.shape[0] // 2)
    top = pts[-n_top:]
    x = np.log2(snr_db_to_power(top[:, 0]))
    slope, _ = np.polyfit(x, top[:, 1], 1)
    return float(slope)
