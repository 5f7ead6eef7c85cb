"""Fast invariant checks that run in well under a minute.

Every check is a function returning ``None`` on success and raising
``AssertionError`` (or any exception) on failure.  :func:`run` executes
them all and reports one line per check.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import analytic, combining, propagation, specfun, uplink


@dataclass
class SmallInstance:
    """A toy multi-cell uplink seen from station 0, with every user tracked."""

    H_all: np.ndarray  # (n, M, U) estimates
    p: np.ndarray  # (U,)
    C: np.ndarray  # (U, M, M)
    cell_of: np.ndarray  # (U,)
    pilot_of: np.ndarray  # (U,)
    Z: np.ndarray  # sum p C + sigma2 I
    Zbar: np.ndarray
    K: int


def small_instance(rng, M=16, K=4, n_cells=5, zeta=2, spread_deg=10.0, n_draws=1, snr0_db=5.0, snrtr_db=15.0):
    """Random cell-edge-free toy network: own cell first, relative gains in (0.01, 0.5)."""
    U = n_cells * K
    cell_of = np.repeat(np.arange(n_cells), K)
    groups = np.concatenate([[0], rng.integers(zeta, size=n_cells - 1)])
    pilot_of = groups[cell_of] * K + np.tile(np.arange(K), n_cells)
    rel = np.where(cell_of == 0, 1.0, rng.uniform(0.01, 0.5, U))
    beta = rel  # own-cell gain normalized to one, so p = rho0
    aoas = rng.uniform(-np.pi, np.pi, U)
    spread = None if spread_deg is None else math.radians(spread_deg)
    cols = propagation.unit_columns(M, aoas, spread)
    R = beta[:, None, None] * propagation.toeplitz_from_column(cols)
    powers = uplink.power_control(np.ones(U), snr0_db, snrtr_db)
    tau_p = zeta * K
    est0 = uplink.mmse_estimate(None, R, powers.p_pilot, pilot_of, tau_p, 1.0, Q=None)
    y = uplink.observation_from_covariance(est0.Q, tau_p, rng, n_draws)
    est = uplink.mmse_estimate(y, R, powers.p_pilot, pilot_of, tau_p, 1.0, Q=est0.Q)
    p = powers.p
    Z = combining.z_matrix(p, est.C, 1.0)
    other = cell_of != 0
    Zbar = combining.zbar_matrix(p[:K], est.C[:K], np.tensordot(p[other], R[other], axes=1), 1.0)
    H = np.swapaxes(est.h_hat, -1, -2)
    return SmallInstance(H, p, est.C, cell_of, pilot_of, Z, Zbar, K)


def scheme_sinrs(inst: SmallInstance, draw=0):
    """SINR of every own-cell user for every scheme on one draw, dict scheme -> (K,)."""
    H = inst.H_all[draw]
    K = inst.K
    out = {}
    for s in combining.SCHEMES:
        V = combining.build_combiner(s, H[:, :K], p_own=inst.p[:K], H_all=H, p_all=inst.p, Z=inst.Z, Zbar=inst.Zbar).vectors
        out[s] = combining.sinr_batch(V, H, inst.p, np.arange(K), inst.Z)
    return out


def check_incomplete_gamma():
    for x in (0.1, 0.5, 2.0, 7.5, 30.0):
        assert math.isclose(specfun.upper_incomplete_gamma(1.0, x), math.exp(-x), rel_tol=1e-10)
        assert math.isclose(specfun.upper_incomplete_gamma(2.0, x), (1 + x) * math.exp(-x), rel_tol=1e-10)
    for a in (0.5, 1.5, 3.0, 4.0):
        assert math.isclose(specfun.upper_incomplete_gamma(a, 0.0), math.gamma(a), rel_tol=1e-12)


def check_lambert():
    for v in np.geomspace(1e-6, 1e6, 25):
        w = specfun.lambert_w0(v)
        assert abs(w * math.exp(w) - v) <= 1e-12 * max(1.0, v)


def check_quadrature():
    rule = specfun.gauss_legendre(16)
    for deg in range(0, 32):
        exact = (1.0 - (-1.0) ** (deg + 1)) / (deg + 1)
        got = specfun.integrate_oscillatory(lambda t, d=deg: t**d, -1.0, 1.0, rule)
        assert abs(got - exact) <= 1e-12 * max(1.0, abs(exact))


def check_path_loss():
    m = propagation.MultiSlopeModel.dual_slope()
    r1 = m.breakpoints[0]
    lo = m.upsilons[0] * r1 ** (-m.exponents[0])
    hi = m.upsilons[1] * r1 ** (-m.exponents[1])
    assert math.isclose(lo, hi, rel_tol=1e-12)
    assert abs(m.upsilons[1] / 5.2481 - 1.0) < 3e-3


def check_one_ring():
    for spread_deg in (0.0, 5.0, 10.0, 40.0):
        Rm = propagation.one_ring(32, 0.7, 0.4, math.radians(spread_deg))
        E = Rm.entries
        assert np.allclose(E, E.conj().T, atol=1e-12)
        assert np.allclose(E[1:, 1:], E[:-1, :-1], atol=1e-12)
        assert Rm.eigvalsh().min() >= -1e-10 * 0.7 * 32
        assert math.isclose(np.trace(E).real / 32, 0.7, rel_tol=1e-10)


def check_zf_identity():
    rng = np.random.default_rng(7)
    H = (rng.standard_normal((3, 16, 4)) + 1j * rng.standard_normal((3, 16, 4))) / math.sqrt(2)
    V = combining.build_combiner("ZF", H).vectors
    assert np.allclose(np.conj(np.swapaxes(V, -1, -2)) @ H, np.eye(4), atol=1e-8)


def check_mmmse_optimality():
    rng = np.random.default_rng(11)
    for _ in range(10):
        inst = small_instance(rng)
        sinrs = scheme_sinrs(inst)
        best = sinrs["MMMSE"]
        for s, v in sinrs.items():
            assert np.all(best >= v * (1 - 1e-9)), s


def check_moment_monotonicity():
    m = propagation.MultiSlopeModel.dual_slope()
    grid = (1, 2, 5, 10, 20, 50, 100, 200, 500)
    for kappa in (1, 2):
        vals = [analytic.mu_kappa(m, lam, kappa) for lam in grid]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def check_zeta_stationarity():
    mu2, K, tau_c = 0.5, 10, 300.0
    z = analytic.optimal_zeta_from_mu2(mu2, K, tau_c)
    h = 1e-4
    d = (analytic.rate_limit(mu2, z + h, K, tau_c) - analytic.rate_limit(mu2, z - h, K, tau_c)) / (2 * h)
    assert abs(d) <= 1e-6


def check_ase_identity():
    from .montecarlo import Scenario, simulate

    sc = Scenario(lam=10.0, M=8, K=2, zeta=2, delta_deg=10.0, trials=2, fading_redraws=4, master_seed=3)
    for rec in simulate(sc, ("MR", "MMMSE")).values():
        assert rec.ase == sc.lam * sc.K * rec.se


CHECKS = (
    ("incomplete gamma identities", check_incomplete_gamma),
    ("lambert W round trip", check_lambert),
    ("gauss-legendre exactness", check_quadrature),
    ("path loss continuity", check_path_loss),
    ("one-ring hermitian toeplitz psd", check_one_ring),
    ("ZF identity", check_zf_identity),
    ("M-MMSE optimality", check_mmmse_optimality),
    ("moment monotonicity", check_moment_monotonicity),
    ("optimal reuse stationarity", check_zeta_stationarity),
    ("ASE identity", check_ase_identity),
)


def run(stream=None):
    """Run every check; returns the list of failed check names."""
    failed = []
    for name, fn in CHECKS:
        try:
            fn()
            line = f"PASS  {name}"
        except Exception as exc:  # a failing check must not stop the others
            failed.append(name)
            line = f"FAIL  {name}: {type(exc).__name__} {exc}"
        if stream is not None:
            print(line, file=stream)
    return failed
