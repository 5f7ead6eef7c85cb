"""
How densification erodes the uplink rate
========================================

Walks through the closed-form side of the package, starting from the
interference moments mu1 and mu2 and ending with the rate that remains
when antennas are unlimited.  Runs in a second or two.
"""

import numpy as np

from densemimo import analytic
from densemimo.propagation import MultiSlopeModel
from densemimo.uplink import db2lin

# The default model: slope 2.1 up to 100 m, slope 4 beyond.
model = MultiSlopeModel.dual_slope()
print(model.as_dict())

# A single slope gives density-free moments, 2/(kappa*alpha - 2).
single = MultiSlopeModel.single_slope(4.0)
print("single slope:", [analytic.mu_kappa(single, lam, 1) for lam in (1, 100)])

# With two slopes the near field takes over as stations get closer.
lams = np.geomspace(1, 1000, 7)
K, zeta, tau_c = 10, 4, 400.0
snr0, snr_tr = db2lin(5.0), db2lin(15.0)
print(f"\n{'lambda':>8} {'mu1':>7} {'mu2':>7} {'nmse<=':>7}")
for lam in lams:
    mp = analytic.MomentPair.compute(model, lam)
    bound = analytic.nmse_upper_bound(model, lam, zeta, zeta * K, snr_tr)
    print(f"{lam:8.1f} {mp.mu1:7.3f} {mp.mu2:7.3f} {bound:7.3f}")

# UatF SE per user for M/K = 10 and 50.  ZF keeps an edge over MR, but the
# edge shrinks with density because inter-cell interference is not nulled.
print(f"\n{'lambda':>8} {'MR 10':>7} {'ZF 10':>7} {'MR 50':>7} {'ZF 50':>7} {'M=inf':>7}")
for lam in lams:
    mp = analytic.MomentPair.compute(model, lam)
    row = []
    for ratio in (10, 50):
        inp = analytic.UatfInputs(ratio * K, K, zeta, snr0, snr_tr, tau_c, mp)
        row += [analytic.uatf_se("MR", inp), analytic.uatf_se("ZF", inp)]
    row.append(analytic.rate_limit(mp.mu2, zeta, K, tau_c))
    print(f"{lam:8.1f} " + " ".join(f"{v:7.3f}" for v in row))

# Area spectral efficiency still grows: more cells outweigh the per-user loss.
mp = analytic.MomentPair.compute(model, 100.0)
inp = analytic.UatfInputs(100, K, zeta, snr0, snr_tr, tau_c, mp)
print("\nASE at lambda=100, MR:", 100 * K * analytic.uatf_se("MR", inp), "bit/s/Hz/km^2")

# Best reuse factor with unlimited antennas, via Lambert W.  A coherence
# block of about 215 symbols puts the step from 5 to 6 right after
# lambda = 30.
tau_sw, window = analytic.calibrate_tau_c_for_zeta_switch(model, K)
print(f"\ncalibrated tau_c {tau_sw:.1f} (admissible {window[0]:.1f} .. {window[1]:.1f})")
for lam in (1, 10, 30, 31, 100, 1000):
    z = analytic.optimal_zeta_asymptotic(model, lam, K, tau_sw)
    print(f"  lambda {lam:5}: zeta_opt {z:.3f} -> {round(z)}")
