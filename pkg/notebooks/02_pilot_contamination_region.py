"""
Where does pilot contamination dominate?
========================================

For each density, find the antenna-user ratio at which the pilot
contamination term of the UatF SINR equals the intra- plus inter-cell
interference.  Above that ratio contamination is the bottleneck.
"""

import numpy as np

from densemimo import analytic
from densemimo.propagation import MultiSlopeModel
from densemimo.uplink import db2lin

model = MultiSlopeModel.dual_slope()
K, snr_tr = 10, db2lin(15.0)
lams = np.geomspace(1, 1000, 13)

print(f"{'lambda':>8} | {'MR z=1':>7} {'ZF z=1':>7} | {'MR z=4':>7} {'ZF z=4':>7}   (M/K)")
for lam in lams:
    vals = []
    for zeta in (1, 4):
        for scheme in ("MR", "ZF"):
            vals.append(analytic.dominance_threshold(scheme, model, lam, zeta, K, zeta * K, snr_tr) / K)
    print(f"{lam:8.1f} | {vals[0]:7.1f} {vals[1]:7.1f} | {vals[2]:7.1f} {vals[3]:7.1f}")

# ZF always needs fewer antennas than MR, and the gap K*zeta/mu2 narrows
# as mu2 grows.  The thresholds themselves are not monotone: they dip at
# moderate densities before the near-field slope pushes them up again.

# Check the defining equality at one point.
lam, zeta = 50.0, 4
M = analytic.dominance_threshold("MR", model, lam, zeta, K, zeta * K, snr_tr)
mp = analytic.MomentPair.compute(model, lam)
terms = analytic.uatf_terms("MR", analytic.UatfInputs(M, K, zeta, db2lin(5.0), snr_tr, 400.0, mp))
print(f"\nat M = {M:.1f}: pilot {terms['pilot']:.6f}, intra+inter {terms['intra'] + terms['inter']:.6f}")
