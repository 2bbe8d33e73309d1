import numpy as np


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hermitian(rng, n):
    A = crandn(rng, n, n)
    return (A + A.conj().T) / 2


def random_orthonormal(rng, n, p):
    return np.linalg.qr(crandn(rng, n, p))[0]
