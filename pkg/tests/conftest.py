import numpy as np
import pytest

from hypercloud.rng import make_rng
from hypercloud.spectral import SpectralPairs, SpectrumBasis


def random_orthonormal(n, seed):
    """Deterministic random orthonormal matrix (QR with sign-fixed R)."""
    rng = make_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return q * signs


def random_pairs(n, seed, lambda_max=1.0, normalized=False):
    """Random spectral pairs with sigma in [0, 1]."""
    rng = make_rng(seed)
    sigma = rng.uniform(0.0, 1.0, size=n)
    if normalized:
        sigma[int(rng.integers(0, n))] = 1.0
    basis = SpectrumBasis(vectors=random_orthonormal(n, seed + 1), source_rank=n)
    return SpectralPairs(basis=basis, sigma=sigma, lambda_max=lambda_max)


@pytest.fixture
def rng():
    return make_rng(20240)
