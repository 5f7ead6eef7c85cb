"""
Comparing MR, ZF, S-MMSE and M-MMSE
===================================

A reduced version of the four-scheme comparison: a small array and few
deployments, enough to see the ordering and the interference split into
coherent (pilot-sharing) and non-coherent parts.
"""

from densemimo.montecarlo import Scenario, simulate

for delta in (10.0, None):
    sc = Scenario(lam=10.0, M=32, K=4, zeta=2, delta_deg=delta, trials=8, fading_redraws=20, master_seed=1)
    recs = simulate(sc)
    label = "uncorrelated" if delta is None else f"delta {delta:g} deg"
    print(f"\n{label}, M={sc.M}, K={sc.K}, zeta={sc.zeta}")
    print(f"{'scheme':>7} {'SE':>6} {'+-':>5} {'ASE':>7} {'noncoh dB':>9} {'coh dB':>7}")
    for name, r in recs.items():
        print(f"{name:>7} {r.se:6.3f} {r.se_ci:5.3f} {r.ase:7.1f} {r.noncoherent_db:9.2f} {r.coherent_db:7.2f}")

# M-MMSE is the per-realization optimum, so it tops every row.  Spatial
# correlation lets the multi-cell combiner reject much of the coherent
# interference from pilot-sharing users.
