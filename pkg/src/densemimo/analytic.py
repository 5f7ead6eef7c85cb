"""Closed-form results for uncorrelated fading with Poisson deployments.

Densities are given in BS/km^2 and converted to BS/m^2 internally because
the path loss breakpoints are in meters.
"""

import math
from dataclasses import dataclass

from .propagation import MultiSlopeModel
from .specfun import lambert_w0, upper_incomplete_gamma

PER_KM2_TO_PER_M2 = 1e-6


def _gamma_diff(a, x0, x1):
    return upper_incomplete_gamma(a, x0) - upper_incomplete_gamma(a, x1)


def tail_coefficient(model: MultiSlopeModel, n: int, kappa: int) -> float:
    """``c_n(kappa)`` for slope index ``n`` (1-based), zero for the last slope.

    This is the part of the interference integral beyond r_n, expressed
    relative to slope n; it is always non-positive.
    """
    r = model.radii
    alpha = model.exponents
    ups = model.upsilons
    N = model.n_slopes
    if n == N:
        return 0.0
    ka = kappa * alpha[n - 1]
    c = -r[n] ** (2 - ka) / (ka - 2)
    for i in range(n + 1, N + 1):
        ki = kappa * alpha[i - 1]
        hi = 0.0 if math.isinf(r[i]) else r[i] ** (2 - ki)
        c += (ups[i - 1] / ups[n - 1]) ** kappa * (r[i - 1] ** (2 - ki) - hi) / (ki - 2)
    return c


def mu_kappa(model: MultiSlopeModel, lam: float, kappa: int) -> float:
    """Interference moment ``E{sum_{l != j} (beta^j_l / beta^l_l)^kappa}``."""
    if kappa not in (1, 2):
        raise ValueError("kappa must be 1 or 2")
    if not lam > 0:
        raise ValueError("density must be positive")
    for a in model.exponents:
        if abs(kappa * a - 2.0) < 1e-12:
            raise ValueError(f"pole: kappa*alpha = 2 for alpha = {a}; perturb the exponent")
    lam_m = lam * PER_KM2_TO_PER_M2
    pl = math.pi * lam_m
    r = model.radii
    total = 0.0
    for n in range(1, model.n_slopes + 1):
        ka = kappa * model.exponents[n - 1]
        t0 = pl * r[n - 1] ** 2
        t1 = math.inf if math.isinf(r[n]) else pl * r[n] ** 2
        total += 2.0 * _gamma_diff(2.0, t0, t1) / (ka - 2.0)
        c = tail_coefficient(model, n, kappa)
        if c != 0.0:
            total += 2.0 * c / pl ** (ka / 2.0 - 1.0) * _gamma_diff(1.0 + ka / 2.0, t0, t1)
    return total


@dataclass(frozen=True)
class MomentPair:
    mu1: float
    mu2: float
    lam: float
    model: MultiSlopeModel

    @classmethod
    def compute(cls, model, lam):
        return cls(mu_kappa(model, lam, 1), mu_kappa(model, lam, 2), lam, model)


def a_factor(mu1, zeta, tau_p, snr_tr):
    return 1.0 + mu1 / zeta + 1.0 / (tau_p * snr_tr)


def nmse_upper_bound(model, lam, zeta, tau_p, snr_tr):
    """Jensen upper bound ``1 - 1/A(mu1)`` on the uncorrelated-fading NMSE (linear ``snr_tr``)."""
    mu1 = mu_kappa(model, lam, 1)
    return 1.0 - 1.0 / a_factor(mu1, zeta, tau_p, snr_tr)


@dataclass(frozen=True)
class UatfInputs:
    M: float
    K: int
    zeta: float
    snr0: float  # linear
    snr_tr: float  # linear
    tau_c: float
    moments: MomentPair

    def __post_init__(self):
        if self.zeta * self.K > self.tau_c:
            raise ValueError("zeta*K must not exceed tau_c")

    @property
    def tau_p(self):
        return self.zeta * self.K

    @property
    def A(self):
        return a_factor(self.moments.mu1, self.zeta, self.tau_p, self.snr_tr)


def uatf_terms(scheme, inp: UatfInputs):
    """Denominator terms (noise, intra, inter, pilot contamination) of 1/SINR."""
    A = inp.A
    mu1, mu2 = inp.moments.mu1, inp.moments.mu2
    M, K, zeta = inp.M, inp.K, inp.zeta
    pilot = mu2 / zeta
    if scheme == "MR":
        return {
            "noise": A / (M * inp.snr0),
            "intra": K / M * A,
            "inter": K / M * (A * mu1 + mu2 / zeta),
            "pilot": pilot,
        }
    if scheme == "ZF":
        if M <= K:
            raise ValueError("ZF needs M > K")
        dof = M - K
        return {
            "noise": A / (dof * inp.snr0),
            "intra": K / dof * (A - 1.0),
            "inter": K / dof * A * mu1,
            "pilot": pilot,
        }
    raise ValueError(f"closed forms exist for MR and ZF only, not {scheme!r}")


def uatf_sinr(scheme, inp: UatfInputs) -> float:
    return 1.0 / sum(uatf_terms(scheme, inp).values())


def prelog(zeta, K, tau_c):
    return max(0.0, 1.0 - zeta * K / tau_c)


def uatf_se(scheme, inp: UatfInputs) -> float:
    pre = prelog(inp.zeta, inp.K, inp.tau_c)
    if pre == 0.0:
        return 0.0
    return pre * math.log2(1.0 + uatf_sinr(scheme, inp))


def rate_limit(mu2, zeta, K, tau_c):
    """Rate with infinitely many antennas given ``mu2``."""
    return prelog(zeta, K, tau_c) * math.log2(1.0 + zeta / mu2)


def asymptotic_rate(model, lam, zeta, K, tau_c):
    return rate_limit(mu_kappa(model, lam, 2), zeta, K, tau_c)


def optimal_zeta_from_mu2(mu2, K, tau_c):
    nu = 1.0 + tau_c / (mu2 * K)
    return mu2 * (nu / lambert_w0(nu * math.e) - 1.0)


def optimal_zeta_asymptotic(model, lam, K, tau_c):
    """Pilot reuse factor maximizing the infinite-antenna rate (real valued)."""
    return optimal_zeta_from_mu2(mu_kappa(model, lam, 2), K, tau_c)


def dominance_threshold(scheme, model, lam, zeta, K, tau_p, snr_tr):
    """Smallest M above which pilot contamination exceeds intra + inter-cell interference."""
    mu1 = mu_kappa(model, lam, 1)
    mu2 = mu_kappa(model, lam, 2)
    return dominance_threshold_from_moments(scheme, mu1, mu2, zeta, K, tau_p, snr_tr)


def dominance_threshold_from_moments(scheme, mu1, mu2, zeta, K, tau_p, snr_tr):
    A = a_factor(mu1, zeta, tau_p, snr_tr)
    mr = K * (1.0 + zeta * A * (1.0 + mu1) / mu2)
    if scheme == "MR":
        return mr
    if scheme == "ZF":
        return mr - K * zeta / mu2
    raise ValueError(f"unknown scheme {scheme!r}")


def sinr_reduction_rates(model, lam, M, K, zeta, snr0, snr_tr, tau_c, rel_step=1e-3):
    """Central differences of the MR and ZF closed-form SINRs with respect to density.

    Returns signed derivatives ``(dSINR_MR/dlam, dSINR_ZF/dlam)``; both are
    non-positive in practice, take ``abs`` for the reduction rates.
    """
    h = rel_step * lam

    def sinr(scheme, lv):
        inp = UatfInputs(M, K, zeta, snr0, snr_tr, tau_c, MomentPair.compute(model, lv))
        return uatf_sinr(scheme, inp)

    out = []
    for scheme in ("MR", "ZF"):
        out.append((sinr(scheme, lam + h) - sinr(scheme, lam - h)) / (2.0 * h))
    return tuple(out)


def calibrate_tau_c_for_zeta_switch(model, K, lam_switch=30.0, lam_max=1000.0, target=5.5):
    """Coherence block length at which the rounded asymptotic optimum steps 5 -> 6 just after ``lam_switch``.

    The rounded optimum changes where the real optimum crosses ``target``.
    The admissible interval keeps the optimum below ``target`` at
    ``lam_switch`` and above it at ``lam_switch + 1``; the midpoint is
    returned together with the interval.
    """
    from scipy.optimize import brentq

    mu_lo = mu_kappa(model, lam_switch, 2)
    mu_hi = mu_kappa(model, lam_switch + 1.0, 2)

    def tau_for(mu2):
        return brentq(lambda tc: optimal_zeta_from_mu2(mu2, K, tc) - target, K * 1.01, 1e5)

    # optimum grows with tau_c, so a larger mu2 reaches the target at a smaller tau_c
    hi = tau_for(mu_lo)
    lo = tau_for(mu_hi)
    tau_c = 0.5 * (lo + hi)
    return tau_c, (lo, hi)
