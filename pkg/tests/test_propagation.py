import math

import numpy as np
import pytest
from scipy.integrate import quad

from densemimo.propagation import (
    D_MIN,
    MultiSlopeModel,
    one_ring,
    one_ring_columns,
    one_ring_entry,
    path_loss,
    toeplitz_from_column,
    uncorrelated,
)
from densemimo.specfun import gauss_legendre

DUAL = MultiSlopeModel.dual_slope()


def test_dual_slope_examples():
    assert path_loss(DUAL, 50.0) == pytest.approx(8.3e-4 * math.pow(50.0, -2.1), rel=1e-12)
    assert path_loss(DUAL, 50.0) == pytest.approx(2.244e-7, rel=1e-3)
    assert path_loss(DUAL, 100.0) == pytest.approx(5.237e-8, rel=1e-3)
    assert path_loss(MultiSlopeModel.single_slope(2.0), 10.0) == pytest.approx(0.01, rel=1e-14)


def test_second_coefficient_matches_table_value():
    assert DUAL.upsilons[1] == pytest.approx(8.3e-4 * 100.0**1.9, rel=1e-14)
    assert DUAL.upsilons[1] == pytest.approx(5.2481, rel=3e-3)


def test_continuity_at_every_breakpoint():
    m = MultiSlopeModel(breakpoints=(20.0, 150.0, 900.0), exponents=(2.0, 2.5, 3.7, 4.5), upsilon1=1e-3)
    for r in m.breakpoints:
        eps = 1e-9 * r
        assert path_loss(m, r - eps) == pytest.approx(path_loss(m, r + eps), rel=1e-6)
        n = m.breakpoints.index(r)
        left = m.upsilons[n] * r ** -m.exponents[n]
        right = m.upsilons[n + 1] * r ** -m.exponents[n + 1]
        assert left == pytest.approx(right, rel=1e-12)


def test_path_loss_strictly_decreasing_and_vectorized():
    d = np.geomspace(D_MIN, 1e5, 500)
    beta = path_loss(DUAL, d)
    assert beta.shape == d.shape
    assert np.all(np.diff(beta) < 0)


@pytest.mark.parametrize("d", [0.5, 0.0, -3.0, math.nan])
def test_path_loss_domain(d):
    with pytest.raises(ValueError):
        path_loss(DUAL, d)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(breakpoints=(100.0,), exponents=(2.0,), upsilon1=1.0),
        dict(breakpoints=(100.0, 50.0), exponents=(2.0, 3.0, 4.0), upsilon1=1.0),
        dict(breakpoints=(100.0,), exponents=(4.0, 2.0), upsilon1=1.0),
        dict(breakpoints=(100.0,), exponents=(2.0, 4.0), upsilon1=0.0),
    ],
)
def test_model_validation(kwargs):
    with pytest.raises(ValueError):
        MultiSlopeModel(**kwargs)


@pytest.mark.parametrize("M", [1, 8, 64, 128])
@pytest.mark.parametrize("spread_deg", [0.0, 5.0, 10.0, 20.0, 40.0])
def test_one_ring_invariants(M, spread_deg):
    beta = 0.37
    for aoa in np.linspace(-np.pi, np.pi, 7):
        R = one_ring(M, beta, aoa, math.radians(spread_deg))
        E = R.entries
        assert np.allclose(E, E.conj().T, atol=1e-12)
        assert np.allclose(E[1:, 1:], E[:-1, :-1], atol=1e-12)
        assert np.allclose(np.diag(E), beta, atol=1e-12)
        assert np.trace(E).real / M == pytest.approx(beta, rel=1e-10)
        assert R.eigvalsh().min() >= -1e-10 * beta * M


def test_zero_spread_is_rank_one():
    R = one_ring(4, 1.0, math.radians(30), 0.0)
    ev = R.eigvalsh()
    assert ev[-1] == pytest.approx(4.0, rel=1e-12)
    assert np.allclose(ev[:-1], 0.0, atol=1e-12)
    a = np.exp(1j * np.pi * np.arange(4) * math.sin(math.radians(30)))
    assert np.allclose(R.entries, np.outer(a, a.conj()), atol=1e-14)


def test_entry_against_high_order_oracle():
    spread = math.radians(10)
    R = one_ring(16, 1.0, 0.0, spread, order=64)
    oracle = one_ring_entry(0, 1, 1.0, 0.0, spread, gauss_legendre(4096))
    assert R.entries[0, 1] == pytest.approx(oracle, abs=1e-9)


def test_entry_against_adaptive_quadrature():
    # independent oracle: scipy's adaptive integrator on real and imaginary parts
    spread, aoa, lag = math.radians(10), 0.7, 37
    re = quad(lambda t: math.cos(math.pi * lag * math.sin(aoa + t)), -spread, spread, limit=400, epsabs=1e-13)[0]
    im = quad(lambda t: math.sin(math.pi * lag * math.sin(aoa + t)), -spread, spread, limit=400, epsabs=1e-13)[0]
    col = one_ring_columns(64, [aoa], spread)[0]
    assert col[lag] == pytest.approx(complex(re, im) / (2 * spread), abs=1e-11)


def test_toeplitz_stack_matches_single():
    cols = one_ring_columns(12, [0.1, -1.3, 2.2], math.radians(7))
    stack = toeplitz_from_column(cols)
    assert stack.flags.c_contiguous
    for c, T in zip(cols, stack):
        assert np.allclose(T, toeplitz_from_column(c), atol=0)


def test_eigenvalue_spread_grows_as_spread_shrinks():
    beta = 1.0
    top5 = one_ring(100, beta, 0.3, math.radians(5)).eigvalsh()[-1]
    top10 = one_ring(100, beta, 0.3, math.radians(10)).eigvalsh()[-1]
    assert top5 > top10 > beta


def test_one_ring_domain_errors():
    with pytest.raises(ValueError):
        one_ring(8, 0.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        one_ring(8, 1.0, 0.0, -0.1)
    with pytest.raises(ValueError):
        one_ring(0, 1.0, 0.0, 0.1)


def test_uncorrelated():
    R = uncorrelated(8, 0.5)
    assert np.array_equal(R.entries, 0.5 * np.eye(8))
    assert np.allclose(R.eigvalsh(), 0.5)
    assert np.trace(R.entries).real / 8 == 0.5
    with pytest.raises(ValueError):
        uncorrelated(8, -1.0)


def test_sqrtm_reconstructs():
    R = one_ring(32, 2.0, -0.4, math.radians(5))
    S = R.sqrtm()
    assert np.allclose(S @ S, R.entries, atol=1e-9)
