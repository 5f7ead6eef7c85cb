import math
from dataclasses import replace

import numpy as np
import pytest

from densemimo.montecarlo import (
    Scenario,
    SimulationError,
    build_trial,
    estimate_se,
    estimate_uatf_se,
    mean_ci,
    nmse_montecarlo,
    required_antenna_ratio,
    simulate,
    sweep,
    trial_rng,
)

SMALL = Scenario(lam=10.0, M=8, K=2, zeta=2, delta_deg=10.0, trials=4, fading_redraws=10, master_seed=11)


def test_scenario_defaults_and_validation():
    sc = Scenario(lam=10.0, M=100, K=10, zeta=4)
    assert sc.snrtr_db == sc.snr0_db + 10
    assert sc.tau_p == 40
    assert sc.prelog == pytest.approx(0.9)
    assert sc.echo()["model"]["exponents"] == [2.1, 4.0]
    bad = [
        dict(lam=0.0),
        dict(zeta=2.5),
        dict(tau_c=10.0),
        dict(snrtr_db=5.0),
        dict(delta_deg=-1.0),
        dict(pilot_redraws=500),
    ]
    for kw in bad:
        with pytest.raises(ValueError):
            replace(sc, **kw)


def test_mean_ci():
    m, ci = mean_ci([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5
    assert ci == pytest.approx(1.959963984540054 * np.std([1, 2, 3, 4], ddof=1) / 2)
    assert mean_ci([3.0]) == (3.0, math.inf)
    assert all(math.isnan(v) for v in mean_ci([]))


def test_streams_are_independent_and_reproducible():
    a = trial_rng(0, 1, 2, 0).random(4)
    assert np.array_equal(a, trial_rng(0, 1, 2, 0).random(4))
    others = [trial_rng(0, 1, 2, 1), trial_rng(0, 1, 3, 0), trial_rng(0, 2, 2, 0), trial_rng(1, 1, 2, 0), trial_rng(0, 1, 2, 1, 5)]
    for g in others:
        assert not np.array_equal(a, g.random(4))


@pytest.mark.parametrize("delta", [10.0, None])
def test_background_users_enter_pilot_covariance_exactly(delta):
    # folding weak cells into a covariance sum must not change Q
    sc = replace(SMALL, delta_deg=delta, lam=50.0, M=16, zeta=2)
    full = build_trial(replace(sc, gain_floor=0.0), 0, 1)
    folded = build_trial(replace(sc, gain_floor=1e-2), 0, 1)
    assert folded.tracked.size < full.tracked.size
    assert np.allclose(folded.Q, full.Q, rtol=1e-10, atol=1e-10 * np.abs(full.Q).max())
    assert np.array_equal(folded.tracked[: sc.K], full.tracked[: sc.K])


def test_simulate_is_deterministic_across_thread_counts():
    a = simulate(SMALL, threads=1)
    b = simulate(SMALL, threads=2)
    for s in a:
        for field in ("se", "se_ci", "uatf_se", "nmse", "noncoherent_db", "coherent_db"):
            assert getattr(a[s], field) == getattr(b[s], field)


def test_records_and_ase_identity():
    recs = simulate(SMALL)
    assert set(recs) == {"MR", "ZF", "SMMSE", "MMMSE"}
    for r in recs.values():
        assert r.trials_ok == SMALL.trials and not r.error
        assert r.ase == SMALL.lam * SMALL.K * r.se
        assert r.se > 0 and r.se_ci > 0
        assert 0 < r.nmse < 1
        assert math.isfinite(r.coherent_db) and math.isfinite(r.noncoherent_db)
    assert recs["MMMSE"].se >= recs["MR"].se


def test_sweep_matches_direct_call_at_same_index():
    other = replace(SMALL, lam=20.0)
    recs = sweep([other, SMALL], schemes=("MR",))
    assert [r.scenario for r in recs] == [other, SMALL]
    direct = estimate_se(SMALL, "MR", scenario_index=1)
    assert recs[1].se == direct.se
    with pytest.raises(ValueError):
        sweep([])


def test_zero_prelog_gives_zero_se():
    sc = replace(SMALL, tau_c=SMALL.zeta * SMALL.K)
    recs = simulate(sc, ("MR", "MMMSE"))
    assert all(r.se == 0.0 and r.uatf_se == 0.0 for r in recs.values())


def test_unknown_scheme_rejected():
    with pytest.raises(ValueError):
        simulate(SMALL, ("MR", "RZF"))


def test_uatf_estimator_scope():
    with pytest.raises(ValueError):
        estimate_uatf_se(SMALL, "MR")
    sc = replace(SMALL, delta_deg=None)
    with pytest.raises(ValueError):
        estimate_uatf_se(sc, "MMMSE")
    rec = estimate_uatf_se(replace(sc, fading_redraws=20), "ZF", pilot_redraws=4)
    assert rec.scenario.pilot_redraws == 4
    # UatF is a lower bound on the ergodic SE up to Monte Carlo noise
    assert 0 < rec.uatf_se <= rec.se * 1.05


def test_failed_trials_are_reported(monkeypatch):
    import densemimo.montecarlo as mc

    def boom(*args, **kwargs):
        raise np.linalg.LinAlgError("forced")

    monkeypatch.setattr(mc, "_trial_full", boom)
    rec = simulate(SMALL, ("MR",))["MR"]
    assert rec.trials_failed == SMALL.trials and rec.error
    with pytest.raises(SimulationError):
        estimate_se(SMALL, "MR")
    recs = sweep([SMALL], schemes=("MR",))
    assert recs[0].error


def test_nmse_estimate_is_trial_average():
    sc = replace(SMALL, trials=6)
    m, ci = nmse_montecarlo(sc)
    m3, _ = nmse_montecarlo(sc, trials=3)
    assert 0 < m < 1 and ci > 0
    assert m != m3


def test_required_antenna_ratio_bisection(monkeypatch):
    import densemimo.montecarlo as mc

    # SE grows with M; the search must return the first ratio reaching the target
    class Rec:
        def __init__(self, se):
            self.se = se

    monkeypatch.setattr(mc, "estimate_se", lambda sc, scheme, idx, threads: Rec(math.log2(sc.M)))
    sc = replace(SMALL, K=10)
    r = required_antenna_ratio(sc, "MR", target_se=math.log2(123), tol=0.25)
    assert 12.3 <= r <= 12.3 + 0.25 + 0.1
    assert required_antenna_ratio(sc, "MR", target_se=100.0) == math.inf
    assert required_antenna_ratio(sc, "MR", target_se=1.0) == 2.0
