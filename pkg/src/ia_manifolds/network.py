"""
Problem instances for the K-user MIMO interference channel.

Random draws use numpy's PCG64 bit generator seeded through
``numpy.random.SeedSequence(master_seed, spawn_key=(purpose, realization))``.
The purpose tag keeps channel and precoder streams independent, and the
realization index means that adding realizations never perturbs earlier
ones.
"""

from dataclasses import dataclass, replace

import numpy as np

from .numerics import gram_schmidt

__all__ = [
    "NetworkConfig",
    "ChannelSet",
    "snr_db_to_power",
    "check_feasibility",
    "rng_for",
    "sample_channels",
    "sample_initial_precoders",
    "PURPOSE_CHANNEL",
    "PURPOSE_PRECODER",
]

PURPOSE_CHANNEL = 1
PURPOSE_PRECODER = 2


def snr_db_to_power(snr_db):
    """Transmit power for a given SNR in dB with unit noise variance."""
    return 10.0 ** (snr_db / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    """
    Dimensions and powers of a K-user interference channel.

    Use :meth:`symmetric` for the common case where every user has the
    same antenna counts, stream count and power. Noise variance is 1.

    Attributes
    ----------
    K : int
        Number of transmitter/receiver pairs.
    M, N, d : tuple of int
        Per-user transmit antennas, receive antennas and data streams.
    P : tuple of float
        Per-user total transmit power (linear scale).
    """

    K: int
    M: tuple
    N: tuple
    d: tuple
    P: tuple

    def __post_init__(self):
        object.__setattr__(self, "M", tuple(int(m) for m in self.M))
        object.__setattr__(self, "N", tuple(int(n) for n in self.N))
        object.__setattr__(self, "d", tuple(int(x) for x in self.d))
        object.__setattr__(self, "P", tuple(float(p) for p in self.P))
        if self.K < 2:
            raise ValueError(f"K must be at least 2, got {self.K}")
        for name in ("M", "N", "d", "P"):
            if len(getattr(self, name)) != self.K:
                raise ValueError(f"{name} must have K={self.K} entries")
        for j in range(self.K):
            if not 1 <= self.d[j] <= min(self.M[j], self.N[j]):
                raise ValueError(
                    f"user {j}: need 1 <= d <= min(M, N), got d={self.d[j]}, "
                    f"M={self.M[j]}, N={self.N[j]}"
                )
            if not self.P[j] > 0:
                raise ValueError(f"user {j}: power must be positive, got {self.P[j]}")

    @classmethod
    def symmetric(cls, K, M, N, d, snr_db=20.0):
        P = snr_db_to_power(snr_db)
        return cls(K, (M,) * K, (N,) * K, (d,) * K, (P,) * K)

    def with_snr(self, snr_db):
        """Copy with every user's power set from `snr_db`."""
        return replace(self, P=(snr_db_to_power(snr_db),) * self.K)

    def with_powers(self, P):
        return replace(self, P=tuple(P))


@dataclass(frozen=True)
class ChannelSet:
    """
    Channel matrices ``H[k][j]`` from transmitter ``j`` to receiver ``k``.

    ``H[k][j]`` has shape ``(N[k], M[j])``. `seed` and `realization`
    record the stream that produced the draw.
    """

    H: tuple
    seed: int = None
    realization: int = 0

    @property
    def K(self):
        return len(self.H)

    def check(self, cfg):
        if self.K != cfg.K:
            raise ValueError(f"channel set has K={self.K}, config has K={cfg.K}")
        for k in range(cfg.K):
            for j in range(cfg.K):
                if self.H[k][j].shape != (cfg.N[k], cfg.M[j]):
                    raise ValueError(
                        f"H[{k}][{j}] has shape {self.H[k][j].shape}, "
                        f"expected {(cfg.N[k], cfg.M[j])}"
                    )


def check_feasibility(cfg):
    """
    Alignment feasibility test without symbol extension.

    User ``j`` is declared feasible when ``M[j] + N[j] >= (K + 1) d[j]``.
    The result is advisory; optimizers run on infeasible instances too.

    Returns
    -------
    per_user : list of bool
    all_feasible : bool
    """
    per_user = [cfg.M[j] + cfg.N[j] >= (cfg.K + 1) * cfg.d[j] for j in range(cfg.K)]
    return per_user, all(per_user)


def rng_for(master_seed, purpose, realization=0):
    """Generator for one (master seed, purpose tag, realization) stream."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(purpose), int(realization)))
    return np.random.Generator(np.random.PCG64(ss))


def _complex_gaussian(rng, shape):
    # circularly-symmetric, unit variance: real and imaginary parts each 1/2
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_channels(cfg, seed, realization=0):
    """
    Draw i.i.d. CN(0, 1) channel matrices for every (receiver, transmitter).

    Blocks are drawn in row-major (k, j) order from a single stream, so the
    result is a pure function of ``(cfg dimensions, seed, realization)``.
    """
    rng = rng_for(seed, PURPOSE_CHANNEL, realization)
    H = tuple(
        tuple(_complex_gaussian(rng, (cfg.N[k], cfg.M[j])) for j in range(cfg.K))
        for k in range(cfg.K)
    )
    return ChannelSet(H, seed=seed, realization=realization)


def sample_initial_precoders(cfg, seed, realization=0):
    """Random orthonormal starting precoders (Gram-Schmidt of Gaussian draws)."""
    rng = rng_for(seed, PURPOSE_PRECODER, realization)
    return [gram_schmidt(_complex_gaussian(rng, (cfg.M[j], cfg.d[j]))) for j in range(cfg.K)]
