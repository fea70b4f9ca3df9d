import numpy as np
import pytest

from bdcdme.basis import build_cosine_basis, cosine_rate, spectral_projection
from bdcdme.cdme import CdmeDistribution
from bdcdme.pde import solve_spectral
from bdcdme.rates import ConstantRate, DiracRate

RATE = 0.5
# exp(-(1 - e^{-1/2})) and friends, computed with the math module
M1 = 1 - np.exp(-0.5)


def make_dist(lambda_c, n=1000, lambda_d=RATE, t_end=4.0):
    basis = build_cosine_basis(lambda_d, n)
    proj = spectral_projection(lambda_c, ConstantRate(lambda_d), basis)
    return CdmeDistribution(solve_spectral(proj, t_end=t_end)), proj


@pytest.fixture(scope="session")
def lambda_d():
    return ConstantRate(RATE)


@pytest.fixture(scope="session")
def constant_case():
    return make_dist(ConstantRate(RATE), n=50)


@pytest.fixture(scope="session")
def smooth_rate():
    return cosine_rate(0.5, 0.5)


@pytest.fixture(scope="session")
def smooth_case(smooth_rate):
    return make_dist(smooth_rate, n=200)


@pytest.fixture(scope="session")
def dirac0_case():
    return make_dist(DiracRate(0.0, RATE))


@pytest.fixture(scope="session")
def dirac_half_case():
    return make_dist(DiracRate(0.5, RATE))
