import numpy as np
import pytest

from petzlab import make_rng


@pytest.fixture
def rng():
    return make_rng(20240611)


def random_hermitian(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def random_psd(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return g @ g.conj().T


def ket(*amps):
    v = np.asarray(amps, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())
