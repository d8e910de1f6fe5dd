import numpy as np
import pytest

from klkit import counterexamples, kernels
from klkit.eigensolve import nystrom_decompose
from klkit.grid import uniform_grid


def brownian_lambda(k):
    return 1.0 / ((np.asarray(k) - 0.5) * np.pi) ** 2


@pytest.fixture(scope="session")
def brownian_nystrom_512():
    return nystrom_decompose(kernels.brownian(), uniform_grid(0, 1, 512), 10)


@pytest.fixture(scope="session")
def catalog_spectra():
    """Nyström spectra (up to 60 terms) of the three catalog kernels on 256 nodes."""
    g = uniform_grid(0, 1, 256)
    out = {}
    for k in (kernels.brownian(), kernels.exponential(0.5), kernels.squared_exponential(0.2)):
        out[k.name] = (k, nystrom_decompose(k, g, 60))
    return out


@pytest.fixture(scope="session")
def failing12():
    return counterexamples.failing_family(12)


@pytest.fixture(scope="session")
def passing12():
    return counterexamples.passing_family(12)


@pytest.fixture(scope="session")
def brownian_analytic_513():
    return counterexamples.analytic_brownian_spectrum(200, uniform_grid(0, 1, 513))
