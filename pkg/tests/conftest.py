import math

import numpy as np
import pytest

from qcascade.eigenops import decompose
from qcascade.liouvillian import SpectralTensor
from qcascade.models import ModelSpec
from qcascade.operators import hermitian_eigensystem


def random_hermitian(rng, n, scale=1.0):
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (x + x.conj().T)


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, n, rank=None):
    rank = n if rank is None else rank
    x = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def random_psd(rng, n, scale=1.0):
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (x @ x.conj().T) / n


def random_t0_model(rng, dim, n_channels=2, degenerate=False):
    """A zero-temperature model with random spectrum, couplings and rate matrices.

    With ``degenerate=True`` the energies are small integers, so the spectrum
    has repeated levels and many coinciding Bohr frequencies.
    """
    if degenerate:
        energies = rng.integers(0, 4, size=dim).astype(float)
        energies[:2] = [0.0, 3.0]
    else:
        energies = np.sort(rng.uniform(0.0, 3.0, size=dim))
    V = random_unitary(rng, dim)
    H = V @ np.diag(energies) @ V.conj().T
    H = 0.5 * (H + H.conj().T)
    couplings = [random_hermitian(rng, dim, 0.5) for _ in range(n_channels)]
    d = decompose(couplings, hermitian_eigensystem(H))
    gam, shift = {}, {}
    for w in d.frequencies:
        shift[float(w)] = random_hermitian(rng, n_channels, 0.1)
        if w > d.freq_tol:
            gam[float(w)] = random_psd(rng, n_channels, 0.3)
    tensor = SpectralTensor.from_rates(gam, shift, beta=math.inf, channel_count=n_channels)
    rho0 = random_density(rng, dim, rank=int(rng.integers(1, dim + 1)))
    labels = [f"A{k}" for k in range(n_channels)]
    return ModelSpec([dim], H, list(zip(labels, couplings)), tensor, rho0, {"name": "random"})


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
