"""Uplink spectral efficiency of dense multicell massive MIMO networks.

Poisson deployments, multi-slope path loss, one-ring correlated Rayleigh
fading, multi-cell MMSE estimation and MR/ZF/S-MMSE/M-MMSE combining, with
closed-form bounds for the uncorrelated case and a Monte Carlo engine for
everything else.
"""

from .analytic import (
    MomentPair,
    UatfInputs,
    asymptotic_rate,
    dominance_threshold,
    mu_kappa,
    nmse_upper_bound,
    optimal_zeta_asymptotic,
    uatf_se,
    uatf_sinr,
)
from .montecarlo import (
    ResultRecord,
    Scenario,
    estimate_se,
    estimate_uatf_se,
    nmse_montecarlo,
    simulate,
    sweep,
)
from .propagation import MultiSlopeModel, one_ring, path_loss, uncorrelated

__version__ = "0.1.0"

__all__ = [
    "MomentPair",
    "MultiSlopeModel",
    "ResultRecord",
    "Scenario",
    "UatfInputs",
    "asymptotic_rate",
    "dominance_threshold",
    "estimate_se",
    "estimate_uatf_se",
    "mu_kappa",
    "nmse_montecarlo",
    "nmse_upper_bound",
    "one_ring",
    "optimal_zeta_asymptotic",
    "path_loss",
    "simulate",
    "sweep",
    "uatf_se",
    "uatf_sinr",
    "uncorrelated",
]
