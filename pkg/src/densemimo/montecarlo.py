"""Monte Carlo estimation of SE, UatF SE, NMSE and interference levels.

One trial is one deployment, one pilot draw and ``fading_redraws`` fading
realizations with positions and pilots frozen.  The typical station is the
one whose cell holds the window center; all of its ``K`` users are
evaluated and averaged, which is equivalent in distribution to picking one.

Users far from the typical station are not given explicit channel
estimates.  Every cell whose strongest user reaches the typical station
with a relative gain ``beta^j/beta^l`` of at least ``gain_floor`` is
tracked in full; the remaining users enter the pilot covariances and the
interference through their covariance matrices only, i.e. the receiver
treats them as unestimated noise.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .combining import SCHEMES, build_combiner, zbar_matrix
from .geometry import sample_network
from .propagation import MultiSlopeModel, path_loss, toeplitz_from_column, unit_columns, KM
from .uplink import (
    allocate_pilots,
    estimates_from_observation,
    mmse_estimate,
    observation_from_covariance,
    pilot_covariances,
    power_control,
)

MAX_FAIL_FRACTION = 0.01
Z95 = 1.959963984540054
FADING_BLOCK = 50
UATF_PILOT_REDRAWS = 20


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    lam: float  # BS/km^2
    M: int
    K: int
    zeta: int
    delta_deg: float | None = None  # None: uncorrelated fading
    snr0_db: float = 5.0
    snrtr_db: float | None = None  # default snr0_db + 10
    tau_c: float = 400.0
    model: MultiSlopeModel = field(default_factory=MultiSlopeModel.dual_slope)
    trials: int = 500
    fading_redraws: int = 200
    master_seed: int = 0
    window_side: float | None = None
    gain_floor: float = 1e-2
    sigma2: float = 1.0
    pilot_redraws: int = 1

    def __post_init__(self):
        if self.snrtr_db is None:
            object.__setattr__(self, "snrtr_db", self.snr0_db + 10.0)
        for name in ("lam", "M", "K", "zeta", "tau_c", "trials", "fading_redraws", "pilot_redraws"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.delta_deg is not None and self.delta_deg < 0:
            raise ValueError("angular spread must be non-negative")
        if self.zeta * self.K > self.tau_c:
            raise ValueError("zeta*K must not exceed tau_c")
        if self.pilot_redraws > self.fading_redraws:
            raise ValueError("pilot_redraws must not exceed fading_redraws")
        if int(self.zeta) != self.zeta:
            raise ValueError("simulation needs an integer pilot reuse factor")
        if not self.snrtr_db > self.snr0_db:
            raise ValueError("snrtr_db must exceed snr0_db")

    @property
    def tau_p(self):
        return int(self.zeta * self.K)

    @property
    def spread(self):
        return None if self.delta_deg is None else math.radians(self.delta_deg)

    @property
    def prelog(self):
        return max(0.0, 1.0 - self.zeta * self.K / self.tau_c)

    def echo(self):
        d = asdict(self)
        d["model"] = self.model.as_dict()
        return d


@dataclass
class ResultRecord:
    scenario: Scenario
    scheme: str
    se: float = math.nan
    se_ci: float = math.nan
    uatf_se: float = math.nan
    uatf_se_ci: float = math.nan
    nmse: float = math.nan
    nmse_ci: float = math.nan
    noncoherent_db: float = math.nan  # summed over the typical cell, relative to combiner noise
    coherent_db: float = math.nan
    trials_ok: int = 0
    trials_failed: int = 0
    antenna_ratio: float = math.nan
    wall_time: float = 0.0
    error: str = ""

    @property
    def ase(self):
        return self.scenario.lam * self.scenario.K * self.se

    @property
    def ase_ci(self):
        return self.scenario.lam * self.scenario.K * self.se_ci


def mean_ci(samples):
    """Sample mean and 95% normal-approximation half-width."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), math.inf
    return float(x.mean()), float(Z95 * x.std(ddof=1) / math.sqrt(x.size))


def trial_rng(master_seed, scenario_index, trial_index, stream, sub=0):
    """Counter-based stream: geometry (0), pilots (1, sub = pilot draw) and fading (2)."""
    key = [master_seed, scenario_index, trial_index, stream] + ([sub] if sub else [])
    return np.random.default_rng(np.random.SeedSequence(key))


@dataclass
class Deployment:
    """Pilot-independent part of a trial, seen from the typical station ``j``.

    ``tracked`` lists flat user indices (cell-major) with explicit estimates,
    the ``K`` users of the typical cell first.  ``cols`` holds unit-gain
    correlation columns for every user, or ``None`` when only the typical
    cell's estimates are needed (they are then built per pilot draw).
    """

    net: object
    powers: object
    j: int
    beta_j: np.ndarray  # (L, K)
    rel_gain: np.ndarray  # (L, K) beta^j / beta^own
    tracked: np.ndarray
    cols: np.ndarray | None
    R: np.ndarray  # (T, M, M) for tracked users
    untracked_cov: np.ndarray | None  # sum of p R over untracked users
    other_cells_cov: np.ndarray | None  # sum of p R over all users outside cell j


@dataclass
class TrialSetup:
    dep: Deployment
    alloc: object
    pilots: np.ndarray  # (L, K)
    Q: np.ndarray  # (P, M, M) pilot covariances, all users

    def __getattr__(self, name):
        # expose the deployment fields directly
        return getattr(self.__dict__["dep"], name)


def _toeplitz_sum(weights, cols):
    return toeplitz_from_column(weights @ cols)


def build_deployment(sc: Scenario, scenario_index, trial_index, need_all=True) -> Deployment:
    rng_geo = trial_rng(sc.master_seed, scenario_index, trial_index, 0)
    net = sample_network(sc.lam, sc.K, sc.window_side, rng_geo)
    j = net.typical_bs
    L, K, M = net.n_bs, sc.K, sc.M
    beta_own = path_loss(sc.model, net.serving_distances() * KM)
    beta_j = path_loss(sc.model, net.distances[:, :, j] * KM)
    rel = beta_j / beta_own
    powers = power_control(beta_own, sc.snr0_db, sc.snrtr_db, sc.sigma2)

    cell_on = rel.max(axis=1) >= sc.gain_floor if need_all else np.zeros(L, dtype=bool)
    cell_on[j] = True
    order = [j] + [l for l in np.flatnonzero(cell_on) if l != j]
    tracked = np.concatenate([l * K + np.arange(K) for l in order])
    if not need_all:
        cols = None
        R = beta_j[j][:, None, None] * toeplitz_from_column(unit_columns(M, net.aoas[j, :, j], sc.spread))
        return Deployment(net, powers, j, beta_j, rel, tracked, None, R, None, None)

    cols = unit_columns(M, net.aoas[:, :, j].ravel(), sc.spread)
    R = beta_j.ravel()[tracked, None, None] * toeplitz_from_column(cols[tracked])
    flat_rel = rel.ravel()
    bg = np.ones(L * K, dtype=bool)
    bg[tracked] = False
    untracked_cov = _toeplitz_sum(np.where(bg, powers.rho0 * flat_rel, 0.0), cols)
    others = np.ones(L * K, dtype=bool)
    others[j * K : (j + 1) * K] = False
    other_cov = _toeplitz_sum(np.where(others, powers.rho0 * flat_rel, 0.0), cols)
    return Deployment(net, powers, j, beta_j, rel, tracked, cols, R, untracked_cov, other_cov)


def attach_pilots(sc: Scenario, dep: Deployment, scenario_index, trial_index, pilot_draw=0) -> TrialSetup:
    """Draw a pilot assignment and build the pilot covariances seen at ``j``.

    Untracked users enter ``Q`` through their correlation matrices only.
    """
    rng_pil = trial_rng(sc.master_seed, scenario_index, trial_index, 1, pilot_draw)
    L, K, M = dep.net.n_bs, sc.K, sc.M
    alloc = allocate_pilots(L, K, sc.zeta, rng_pil)
    pilots = alloc.pilot_index()
    tau_p = alloc.tau_p
    flat_pil = pilots.ravel()
    bg = np.ones(L * K, dtype=bool)
    bg[dep.tracked] = False
    if dep.cols is None:
        bg &= np.isin(flat_pil, pilots[dep.j])
        cols = np.zeros((L * K, M), dtype=complex)
        cols[bg] = unit_columns(M, dep.net.aoas[:, :, dep.j].ravel()[bg], sc.spread)
    else:
        cols = dep.cols
    # tau_p * p_pilot * beta^j = tau_p * rho_tr * rel_gain
    w = np.zeros((tau_p, L * K))
    w[flat_pil[bg], np.flatnonzero(bg)] = tau_p * dep.powers.rho_tr * dep.rel_gain.ravel()[bg]
    Q_extra = toeplitz_from_column(w @ cols)
    p_t = dep.powers.p_pilot.ravel()[dep.tracked]
    Q = pilot_covariances(dep.R, p_t, flat_pil[dep.tracked], tau_p, tau_p, sc.sigma2, extra=Q_extra)
    return TrialSetup(dep, alloc, pilots, Q)


def build_trial(sc: Scenario, scenario_index, trial_index, need_all=True, pilot_draw=0) -> TrialSetup:
    dep = build_deployment(sc, scenario_index, trial_index, need_all)
    return attach_pilots(sc, dep, scenario_index, trial_index, pilot_draw)


def _trial_nmse(sc, scenario_index, trial_index):
    ts = build_trial(sc, scenario_index, trial_index, need_all=False)
    own = ts.tracked[: sc.K]
    est = mmse_estimate(None, ts.R, ts.powers.p_pilot.ravel()[own], ts.pilots.ravel()[own], sc.tau_p, sc.sigma2, Q=ts.Q)
    return float(np.mean([est.nmse(u) for u in range(sc.K)]))


def _fading_pass(sc, ts, rng_f, n_draws, schemes):
    """Fading-averaged moments for one frozen deployment and pilot draw."""
    K = sc.K
    tracked = ts.tracked
    p_all = ts.powers.p.ravel()[tracked]
    pp_all = ts.powers.p_pilot.ravel()[tracked]
    pil_all = ts.pilots.ravel()[tracked]
    own = np.arange(K)
    est = mmse_estimate(None, ts.R, pp_all, pil_all, sc.tau_p, sc.sigma2, Q=ts.Q)
    Zerr = np.tensordot(p_all, est.C, axes=1) + ts.untracked_cov
    Z = Zerr + sc.sigma2 * np.eye(sc.M)
    Zbar = zbar_matrix(p_all[own], est.C[own], ts.other_cells_cov, sc.sigma2)
    used = np.unique(pil_all)

    acc = {s: {"log": 0.0, "G": 0.0, "P": 0.0, "Zerr": 0.0, "N": 0.0} for s in schemes}
    failed = set()
    done = 0
    while done < n_draws:
        nb = min(FADING_BLOCK, n_draws - done)
        y = np.zeros((nb, sc.tau_p, sc.M), dtype=complex)
        y[:, used] = observation_from_covariance(ts.Q[used], sc.tau_p, rng_f, nb)
        H = np.swapaxes(estimates_from_observation(est.RQinv, pp_all, pil_all, y), -1, -2)  # (nb, M, T)
        for s in schemes:
            if s in failed:
                continue
            try:
                V = build_combiner(s, H[..., :K], p_own=p_all[own], H_all=H, p_all=p_all, Z=Z, Zbar=Zbar).vectors
            except np.linalg.LinAlgError:
                failed.add(s)
                continue
            G = np.conj(np.swapaxes(V, -1, -2)) @ H  # (nb, K, T)
            P = p_all * np.abs(G) ** 2
            signal = P[:, own, own]
            zerr = np.real(np.sum(np.conj(V) * (Zerr @ V), axis=-2))
            noise = sc.sigma2 * np.sum(np.abs(V) ** 2, axis=-2)
            sinr = signal / (P.sum(axis=-1) - signal + zerr + noise)
            a = acc[s]
            a["log"] += float(np.log2(1.0 + sinr).sum())
            a["G"] = a["G"] + G.sum(axis=0)
            a["P"] = a["P"] + P.sum(axis=0)
            a["Zerr"] = a["Zerr"] + zerr.sum(axis=0)
            a["N"] = a["N"] + noise.sum(axis=0)
        done += nb

    same_pilot = pil_all[None, :] == pil_all[own][:, None]
    same_pilot[own, own] = False
    out = {"nmse": float(np.mean([est.nmse(u) for u in own]))}
    for s in schemes:
        if s in failed:
            out[s] = None
            continue
        a = acc[s]
        Gm = a["G"] / n_draws
        desired = Gm[own, own]
        total = (a["P"] / n_draws).sum(axis=-1) + a["Zerr"] / n_draws
        noise = a["N"] / n_draws
        coherent = (p_all[None, :] * np.abs(Gm) ** 2 * same_pilot).sum(axis=-1)
        noncoherent = total - p_all[own] * np.abs(desired) ** 2 - coherent
        out[s] = {
            "log": a["log"] / (n_draws * K),
            "desired": desired,  # E{v^H h_hat} per own user
            "total": total,
            "noise": noise,
            "coh": float(np.mean(coherent / noise)),
            "noncoh": float(np.mean(noncoherent / noise)),
        }
    return out


def _trial_full(sc, scenario_index, trial_index, schemes):
    """Per-scheme trial statistics; a failed scheme maps to ``None``.

    With ``pilot_redraws > 1`` the deployment stays fixed while the pilot
    assignment is redrawn, and the UatF moments are averaged over both
    fading and pilot draws before forming the SINR.
    """
    rng_f = trial_rng(sc.master_seed, scenario_index, trial_index, 2)
    per_draw = -(-sc.fading_redraws // sc.pilot_redraws)
    passes = []
    dep = build_deployment(sc, scenario_index, trial_index, need_all=True)
    for d in range(sc.pilot_redraws):
        ts = attach_pilots(sc, dep, scenario_index, trial_index, pilot_draw=d)
        passes.append(_fading_pass(sc, ts, rng_f, per_draw, schemes))
    p_own = ts.powers.p.ravel()[ts.tracked[: sc.K]]
    out = {}
    for s in schemes:
        rows = [ps[s] for ps in passes]
        if any(r is None for r in rows):
            out[s] = None
            continue
        desired = np.mean([r["desired"] for r in rows], axis=0)
        total = np.mean([r["total"] for r in rows], axis=0)
        noise = np.mean([r["noise"] for r in rows], axis=0)
        signal = p_own * np.abs(desired) ** 2
        uatf = signal / (total - signal + noise)
        out[s] = {
            "se": float(np.mean([r["log"] for r in rows])),
            "uatf": float(np.mean(np.log2(1.0 + uatf))),
            "noncoh": float(np.mean([r["noncoh"] for r in rows])),
            "coh": float(np.mean([r["coh"] for r in rows])),
            "nmse": float(np.mean([ps["nmse"] for ps in passes])),
        }
    return out


def _run_chunk(args):
    kind, sc, scenario_index, trial_ids, schemes = args
    res = []
    for t in trial_ids:
        try:
            if kind == "nmse":
                res.append(_trial_nmse(sc, scenario_index, t))
            else:
                res.append(_trial_full(sc, scenario_index, t, schemes))
        except np.linalg.LinAlgError:
            res.append(None)
    return res


def _run_trials(kind, sc, scenario_index, schemes, threads):
    trial_ids = list(range(sc.trials))
    if threads is None or threads <= 1:
        return _run_chunk((kind, sc, scenario_index, trial_ids, schemes))
    n_chunks = min(len(trial_ids), 4 * threads)
    chunks = [trial_ids[i::n_chunks] for i in range(n_chunks)]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(_run_chunk, [(kind, sc, scenario_index, c, schemes) for c in chunks]))
    # restore trial order before any reduction
    out = [None] * len(trial_ids)
    for c, part in zip(chunks, parts):
        for t, r in zip(c, part):
            out[t] = r
    return out


def simulate(sc: Scenario, schemes=SCHEMES, scenario_index=0, threads=None):
    """Run all trials once and summarize every scheme; returns ``{scheme: ResultRecord}``."""
    schemes = tuple(schemes)
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
    t0 = time.perf_counter()
    results = _run_trials("full", sc, scenario_index, schemes, threads)
    wall = time.perf_counter() - t0
    records = {}
    for s in schemes:
        rows = [r[s] for r in results if r is not None and r[s] is not None]
        failed = sc.trials - len(rows)
        rec = ResultRecord(sc, s, trials_ok=len(rows), trials_failed=failed, wall_time=wall)
        if failed > MAX_FAIL_FRACTION * sc.trials:
            rec.error = f"{failed} of {sc.trials} trials failed numerically"
            records[s] = rec
            continue
        se_raw, se_ci = mean_ci([r["se"] for r in rows])
        ua_raw, ua_ci = mean_ci([r["uatf"] for r in rows])
        rec.se, rec.se_ci = sc.prelog * se_raw, sc.prelog * se_ci
        rec.uatf_se, rec.uatf_se_ci = sc.prelog * ua_raw, sc.prelog * ua_ci
        rec.nmse, rec.nmse_ci = mean_ci([r["nmse"] for r in rows])
        # summed over the K users of the typical cell, each relative to its combiner noise
        rec.noncoherent_db = _db(sc.K * np.mean([r["noncoh"] for r in rows]))
        rec.coherent_db = _db(sc.K * np.mean([r["coh"] for r in rows]))
        records[s] = rec
    return records


def _db(x):
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def _checked(rec):
    if rec.error:
        raise SimulationError(rec.error)
    return rec


def estimate_se(sc: Scenario, scheme, scenario_index=0, threads=None) -> ResultRecord:
    """Average ergodic SE lower bound of the typical user with the given combiner."""
    return _checked(simulate(sc, (scheme,), scenario_index, threads)[scheme])


def estimate_uatf_se(sc: Scenario, scheme, scenario_index=0, threads=None, pilot_redraws=UATF_PILOT_REDRAWS) -> ResultRecord:
    """UatF SE for uncorrelated fading.

    The UatF expectations run over fading and pilot assignment with the
    positions fixed, so each deployment is paired with ``pilot_redraws``
    pilot draws sharing the ``fading_redraws`` budget.
    """
    if pilot_redraws is not None:
        sc = replace(sc, pilot_redraws=min(pilot_redraws, sc.fading_redraws))
    if sc.delta_deg is not None:
        raise ValueError("the UatF estimator validates the uncorrelated closed forms; use delta_deg=None")
    if scheme not in ("MR", "ZF"):
        raise ValueError("UatF estimation is defined for MR and ZF")
    return _checked(simulate(sc, (scheme,), scenario_index, threads)[scheme])


def estimate_interference(sc: Scenario, scheme, trials=None, scenario_index=0, threads=None) -> ResultRecord:
    if trials is not None:
        sc = replace(sc, trials=trials)
    return _checked(simulate(sc, (scheme,), scenario_index, threads)[scheme])


def nmse_montecarlo(sc: Scenario, trials=None, scenario_index=0, threads=None):
    """Average NMSE over deployments and pilot draws; returns ``(mean, ci_half_width)``.

    The NMSE conditioned on positions and pilots is exact, so no fading is drawn.
    """
    if trials is not None:
        sc = replace(sc, trials=trials)
    vals = [v for v in _run_trials("nmse", sc, scenario_index, (), threads) if v is not None]
    if sc.trials - len(vals) > MAX_FAIL_FRACTION * sc.trials:
        raise SimulationError("too many failed NMSE trials")
    return mean_ci(vals)


QUANTITIES = ("se", "uatf", "nmse", "antenna_ratio")


def _evaluate(sc, idx, schemes, threads, quantity, target_se):
    if quantity == "se":
        recs = simulate(sc, schemes, scenario_index=idx, threads=threads)
        return [recs[s] for s in schemes]
    if quantity == "uatf":
        sc_u = replace(sc, pilot_redraws=min(UATF_PILOT_REDRAWS, sc.fading_redraws))
        recs = simulate(sc_u, schemes, scenario_index=idx, threads=threads)
        return [recs[s] for s in schemes]
    if quantity == "nmse":
        t0 = time.perf_counter()
        mean, ci = nmse_montecarlo(sc, scenario_index=idx, threads=threads)
        return [ResultRecord(sc, "", nmse=mean, nmse_ci=ci, trials_ok=sc.trials, wall_time=time.perf_counter() - t0)]
    if quantity == "antenna_ratio":
        out = []
        for s in schemes:
            t0 = time.perf_counter()
            ratio = required_antenna_ratio(sc, s, target_se, scenario_index=idx, threads=threads)
            out.append(ResultRecord(sc, s, antenna_ratio=ratio, wall_time=time.perf_counter() - t0))
        return out
    raise ValueError(f"unknown quantity {quantity!r}")


def iter_sweep(grid, schemes=SCHEMES, threads=None, quantity="se", target_se=None):
    """Yield records scenario by scenario, in grid order.

    A failing scenario yields records with ``error`` set instead of aborting.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty scenario grid")
    if quantity == "antenna_ratio" and target_se is None:
        raise ValueError("antenna_ratio needs target_se")
    schemes = tuple(schemes)
    for idx, sc in enumerate(grid):
        try:
            recs = _evaluate(sc, idx, schemes, threads, quantity, target_se)
        except (SimulationError, np.linalg.LinAlgError) as exc:
            names = ("",) if quantity == "nmse" else schemes
            recs = [ResultRecord(sc, s, error=str(exc)) for s in names]
        yield from recs


def sweep(grid, schemes=SCHEMES, threads=None, quantity="se", target_se=None):
    """Evaluate every scenario of ``grid`` for every scheme, in grid order."""
    return list(iter_sweep(grid, schemes, threads, quantity, target_se))


def required_antenna_ratio(sc: Scenario, scheme, target_se, ratio_lo=2.0, ratio_hi=40.0, tol=0.5, scenario_index=0, threads=None):
    """Smallest ``M/K`` reaching ``target_se``, by bisection to within ``tol`` (SE assumed increasing in M).

    Returns ``inf`` when even ``ratio_hi`` falls short.
    """

    def se_at(ratio):
        return estimate_se(replace(sc, M=int(round(ratio * sc.K))), scheme, scenario_index, threads).se

    if se_at(ratio_hi) < target_se:
        return math.inf
    if se_at(ratio_lo) >= target_se:
        return ratio_lo
    lo, hi = ratio_lo, ratio_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if se_at(mid) >= target_se:
            hi = mid
        else:
            lo = mid
    return hi
