import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp, trapezoid

from bdcdme.cdme import cdme_residual, cme_reference, poisson_pmf, rate_equation
from bdcdme.errors import PositionOutOfDomain, UnsupportedOrder
from bdcdme.rates import ConstantRate

# exp(-(1 - e^{-1/2})) evaluated independently with the math module
RHO0_AT_1 = 0.6747120037358997
RHO1_AT_1 = 0.2654784869939317
RHO2_AT_1 = 0.05222882256899526


def test_frozen_values_consistent():
    m = 1 - math.exp(-0.5)
    assert RHO0_AT_1 == pytest.approx(math.exp(-m), abs=1e-15)
    assert RHO1_AT_1 == pytest.approx(m * math.exp(-m), abs=1e-15)
    assert RHO2_AT_1 == pytest.approx(m**2 * math.exp(-m) / 2, abs=1e-15)


def test_constant_scenario_values(constant_case):
    dist, _ = constant_case
    assert dist.rho0(1.0) == pytest.approx(RHO0_AT_1, abs=1e-12)
    assert dist.rho_n(1.0, [0.3]) == pytest.approx(RHO1_AT_1, abs=1e-12)
    assert dist.rho_n(1.0, [0.3, 0.8]) == pytest.approx(RHO2_AT_1, abs=1e-12)


def test_rho0_solves_scalar_ode(constant_case):
    # d rho0/dt = -(lambda_c) rho0 + lambda_d int rho1 reduces to rho0' = -m' rho0
    dist, _ = constant_case
    sol = solve_ivp(lambda t, y: -0.5 * np.exp(-0.5 * t) * y, (0, 10), [1.0], rtol=1e-12, atol=1e-14, dense_output=True)
    for t in np.linspace(0, 10, 21):
        assert dist.rho0(t) == pytest.approx(sol.sol(t)[0], abs=1e-9)


def test_cme_reference_against_ode():
    c, d, n_max = 0.5, 0.5, 40

    def rhs(t, p):
        out = -(c + d * np.arange(n_max + 1)) * p
        out[1:] += c * p[:-1]
        out[:-1] += d * np.arange(1, n_max + 1) * p[1:]
        return out

    p0 = np.zeros(n_max + 1)
    p0[0] = 1
    sol = solve_ivp(rhs, (0, 2), p0, rtol=1e-12, atol=1e-15, method="LSODA")
    ref = np.array([cme_reference(c, d, 2.0, n) for n in range(n_max + 1)])
    assert np.allclose(ref, sol.y[:, -1], atol=1e-10)


def test_rate_equation():
    assert rate_equation(0.5, 0.5, 1.0) == pytest.approx(1 - math.exp(-0.5))
    assert rate_equation(0.5, 0.5, 0.0) == 0.0


def test_poisson_pmf_large_mean():
    p = poisson_pmf(200.0, 400)
    assert np.all(np.isfinite(p)) and p.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    t=st.floats(0.05, 4.0),
    pts=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=4),
    seed=st.integers(0, 1000),
)
def test_permutation_symmetry(dirac_half_case, t, pts, seed):
    dist, _ = dirac_half_case
    perm = np.random.default_rng(seed).permutation(len(pts))
    a = dist.rho_n(t, pts)
    b = dist.rho_n(t, np.asarray(pts)[perm])
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0.01, 4.0), n=st.integers(0, 6))
def test_poisson_consistency(smooth_case, t, n):
    dist, _ = smooth_case
    pmf = dist.count_pmf(t, n_max=50)
    m = dist.mass(t)
    assert pmf.pmf[n] == pytest.approx(math.exp(-m) * m**n / math.factorial(n), rel=1e-10)
    assert pmf.pmf.sum() + pmf.tail == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(t=st.floats(0.05, 4.0))
def test_nonnegative_and_normalised(dirac0_case, t):
    dist, _ = dirac0_case
    x = np.linspace(0, 1, 201)
    p = dist.conditional_density(t, x)
    assert np.all(p >= -1e-9)
    assert trapezoid(p, x) == pytest.approx(1.0, abs=1e-3)


def test_out_of_domain(constant_case):
    dist, _ = constant_case
    with pytest.raises(PositionOutOfDomain):
        dist.rho_n(1.0, [1.2])


def test_residual_orders(constant_case):
    dist, _ = constant_case
    lc = ld = ConstantRate(0.5)
    for n, pts in [(0, ()), (1, (0.3,)), (2, (0.3, 0.6)), (3, (0.2, 0.5, 0.8))]:
        assert abs(cdme_residual(dist, lc, ld, n, 1.0, pts)) <= 1e-6
    with pytest.raises(UnsupportedOrder):
        cdme_residual(dist, lc, ld, 4, 1.0, (0.1, 0.2, 0.3, 0.4))


def test_residual_smooth(smooth_case, smooth_rate):
    dist, _ = smooth_case
    ld = ConstantRate(0.5)
    for t in (0.25, 1.0, 4.0):
        for n, pts in [(0, ()), (1, (0.7,)), (2, (0.1, 0.9))]:
            assert abs(cdme_residual(dist, smooth_rate, ld, n, t, pts)) <= 1e-4


def test_residual_detects_wrong_solution(constant_case):
    dist, _ = constant_case
    # the same solution does not satisfy the equation with a different source
    assert abs(cdme_residual(dist, ConstantRate(0.7), ConstantRate(0.5), 1, 1.0, (0.4,))) > 1e-3
