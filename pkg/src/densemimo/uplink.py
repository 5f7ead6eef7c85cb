"""Pilot reuse, power control, pilot observations and multi-cell MMSE estimation.

Everything here is seen from one receiving base station.  Users are handled
as a flat list ``u = 0..U-1``; ``pilot_of[u]`` names the pilot sequence of
user ``u`` (``group * K + i`` for user ``i`` of a cell in pilot group
``group``).  Observations are the despread pilot signals ``Y^p phi^*`` and
never the full ``M x tau_p`` pilot block.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import solve_hermitian


@dataclass(frozen=True)
class PilotAllocation:
    """Each cell draws one of ``zeta`` disjoint pilot subsets uniformly at random.

    Cells sharing a subset share all ``K`` sequences, so ``share[l', l]`` is a
    Bernoulli(1/zeta) variable for ``l' != l`` and one on the diagonal.
    """

    zeta: int
    k_users: int
    groups: np.ndarray  # (L,)

    @property
    def tau_p(self):
        return self.zeta * self.k_users

    @property
    def share(self):
        return self.groups[:, None] == self.groups[None, :]

    def pilot_index(self):
        """Pilot sequence of every user, shape (L, K)."""
        return self.groups[:, None] * self.k_users + np.arange(self.k_users)[None, :]


def allocate_pilots(n_bs, k_users, zeta, rng) -> PilotAllocation:
    if int(zeta) != zeta or zeta < 1:
        raise ValueError(f"simulation needs an integer pilot reuse factor >= 1, got {zeta!r}")
    zeta = int(zeta)
    groups = rng.integers(zeta, size=n_bs) if zeta > 1 else np.zeros(n_bs, dtype=int)
    return PilotAllocation(zeta, int(k_users), groups)


@dataclass(frozen=True)
class PowerProfile:
    """Statistical channel inversion: ``p * beta_serving = rho0`` (data) and ``rho_tr`` (pilots)."""

    rho0: float
    rho_tr: float
    sigma2: float
    p: np.ndarray
    p_pilot: np.ndarray


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def power_control(beta_serving, snr0_db, snrtr_db, sigma2=1.0) -> PowerProfile:
    rho0 = float(db2lin(snr0_db)) * sigma2
    rho_tr = float(db2lin(snrtr_db)) * sigma2
    if not rho_tr > rho0:
        raise ValueError("pilot power must exceed data power (snr_tr > snr0)")
    beta_serving = np.asarray(beta_serving, dtype=float)
    return PowerProfile(rho0, rho_tr, sigma2, rho0 / beta_serving, rho_tr / beta_serving)


def draw_channels(R, rng, n_draws=1):
    """Correlated Rayleigh channels ``R^{1/2} z``, shape (n_draws, U, M)."""
    from .propagation import psd_sqrt

    R = np.asarray(R)
    sq = psd_sqrt(R)
    U, M = R.shape[0], R.shape[-1]
    z = (rng.standard_normal((n_draws, U, M)) + 1j * rng.standard_normal((n_draws, U, M))) / np.sqrt(2)
    return np.einsum("umn,dun->dum", sq, z)


def synthesize_observation(h, p_pilot, pilot_of, n_pilots, tau_p, sigma2, rng):
    """Despread pilot observations from explicit channels.

    ``h`` has shape (n_draws, U, M).  Returns ``y`` of shape
    (n_draws, n_pilots, M) with
    ``y[p] = sum_{u: pilot_of[u] = p} sqrt(p_pilot[u]) * tau_p * h[u] + n``
    and ``n ~ CN(0, tau_p sigma2 I)``.
    """
    h = np.asarray(h)
    n, U, M = h.shape
    y = np.zeros((n, n_pilots, M), dtype=complex)
    np.add.at(y, (slice(None), np.asarray(pilot_of)), (np.sqrt(p_pilot) * tau_p)[None, :, None] * h)
    noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    y += np.sqrt(tau_p * sigma2 / 2.0) * noise
    return y


def observation_from_covariance(Q, tau_p, rng, n_draws):
    """Draw despread observations directly from ``CN(0, tau_p Q_p)``.

    Statistically identical to :func:`synthesize_observation` when ``Q`` holds
    every user (including those not tracked explicitly).
    """
    Q = np.asarray(Q)
    P, M = Q.shape[0], Q.shape[-1]
    L = np.linalg.cholesky(Q)
    z = (rng.standard_normal((n_draws, P, M)) + 1j * rng.standard_normal((n_draws, P, M))) / np.sqrt(2)
    return np.sqrt(tau_p) * np.swapaxes(L @ np.transpose(z, (1, 2, 0)), 0, 2).swapaxes(1, 2)


def pilot_covariances(R, p_pilot, pilot_of, n_pilots, tau_p, sigma2, extra=None):
    """``Q_p = sum_{u on pilot p} p_pilot[u] tau_p R_u + sigma2 I`` (+ ``extra[p]``)."""
    R = np.asarray(R)
    M = R.shape[-1]
    Q = np.zeros((n_pilots, M, M), dtype=complex)
    np.add.at(Q, np.asarray(pilot_of), (np.asarray(p_pilot) * tau_p)[:, None, None] * R)
    Q += sigma2 * np.eye(M)
    if extra is not None:
        Q += extra
    return Q


@dataclass
class EstimationOutput:
    h_hat: np.ndarray | None  # (n_draws, U, M)
    C: np.ndarray  # (U, M, M) error covariances
    Q: np.ndarray  # (n_pilots, M, M)
    R: np.ndarray
    p_pilot: np.ndarray
    pilot_of: np.ndarray
    tau_p: int
    RQinv: np.ndarray  # (U, M, M) R_u Q_{pilot(u)}^{-1}

    def estimate_covariance(self, u):
        """``p tau_p R Q^{-1} R`` for user ``u``."""
        return self.p_pilot[u] * self.tau_p * self.RQinv[u] @ self.R[u]

    def cross_correlation(self, u, v):
        """``E{h_hat_u h_hat_v^H}``; zero unless the users share a pilot."""
        if self.pilot_of[u] != self.pilot_of[v]:
            return np.zeros_like(self.R[u])
        return np.sqrt(self.p_pilot[u] * self.p_pilot[v]) * self.tau_p * self.RQinv[u] @ self.R[v]

    def nmse(self, u):
        return float(np.real(np.trace(self.C[u])) / np.real(np.trace(self.R[u])))


def mmse_estimate(y, R, p_pilot, pilot_of, tau_p, sigma2, Q=None, cond_limit=1e14) -> EstimationOutput:
    """Multi-cell MMSE estimates ``h_hat_u = sqrt(p_pilot[u]) R_u Q^{-1} y[pilot_of[u]]``.

    ``y`` may be ``None`` to get only the statistics (``C``, ``Q``).  Pass
    ``Q`` when it must include users that are not in ``R``.
    """
    R = np.asarray(R)
    pilot_of = np.asarray(pilot_of)
    p_pilot = np.asarray(p_pilot, dtype=float)
    if Q is None:
        n_pilots = int(pilot_of.max()) + 1 if y is None else y.shape[1]
        Q = pilot_covariances(R, p_pilot, pilot_of, n_pilots, tau_p, sigma2)
    active = np.unique(pilot_of)
    if _all_diagonal(R) and _all_diagonal(Q[active]):
        RQinv, C = _diagonal_statistics(R, Q, p_pilot, pilot_of, tau_p, cond_limit)
    else:
        RQinv, C = _dense_statistics(R, Q, p_pilot, pilot_of, tau_p, active, cond_limit)
    h_hat = None
    if y is not None:
        h_hat = estimates_from_observation(RQinv, p_pilot, pilot_of, y)
    return EstimationOutput(h_hat, C, Q, R, p_pilot, pilot_of, tau_p, RQinv)


def _all_diagonal(A):
    M = A.shape[-1]
    off = A.reshape(A.shape[0], -1)[:, :-1].reshape(A.shape[0], M - 1, M + 1)[:, :, 1:]
    return not np.any(off)


def _check_condition(conds, cond_limit):
    if np.any(conds > cond_limit):
        raise np.linalg.LinAlgError(f"pilot covariance condition number {np.max(conds):.3g} exceeds {cond_limit:g}")


def _diagonal_statistics(R, Q, p_pilot, pilot_of, tau_p, cond_limit):
    """Uncorrelated fading: every matrix is diagonal, so all solves are elementwise."""
    dQ = np.real(np.diagonal(Q, axis1=-2, axis2=-1))[np.unique(pilot_of)]
    _check_condition(dQ.max(axis=-1) / dQ.min(axis=-1), cond_limit)
    dR = np.diagonal(R, axis1=-2, axis2=-1)
    ratio = dR / np.real(np.diagonal(Q, axis1=-2, axis2=-1))[pilot_of]
    U, M = dR.shape
    idx = np.arange(M)
    RQinv = np.zeros_like(R)
    RQinv[:, idx, idx] = ratio
    C = np.zeros_like(R)
    C[:, idx, idx] = np.real(dR - (p_pilot * tau_p)[:, None] * ratio * dR)
    return RQinv, C


def _dense_statistics(R, Q, p_pilot, pilot_of, tau_p, active, cond_limit):
    ev = np.linalg.eigvalsh(Q[active])
    _check_condition(ev[..., -1] / ev[..., 0], cond_limit)
    M = R.shape[-1]
    # R_u Q^{-1} = (Q^{-1} R_u)^H because both are Hermitian
    RQinv = np.empty_like(R)
    for p in active:
        members = np.flatnonzero(pilot_of == p)
        rhs = np.concatenate([R[u] for u in members], axis=1)
        sol = solve_hermitian(Q[p], rhs)
        for n_, u in enumerate(members):
            RQinv[u] = sol[:, n_ * M : (n_ + 1) * M].conj().T
    C = R - (p_pilot * tau_p)[:, None, None] * (RQinv @ R)
    C = 0.5 * (C + np.conj(np.swapaxes(C, -1, -2)))
    return RQinv, C


def estimates_from_observation(RQinv, p_pilot, pilot_of, y):
    """``sqrt(p_pilot[u]) R_u Q^{-1} y[:, pilot_of[u]]`` for every user, shape (n_draws, U, M).

    Users sharing a pilot are stacked into one matrix product.
    """
    U, M = RQinv.shape[0], RQinv.shape[-1]
    out = np.empty((y.shape[0], U, M), dtype=complex)
    scaled = np.sqrt(p_pilot)[:, None, None] * RQinv
    for p in np.unique(pilot_of):
        members = np.flatnonzero(pilot_of == p)
        stacked = scaled[members].reshape(-1, M)  # (|members| M, M)
        prod = stacked @ y[:, p, :].T  # (|members| M, n_draws)
        out[:, members, :] = prod.reshape(len(members), M, -1).transpose(2, 0, 1)
    return out


def nmse_given(R_u, p_pilot_u, Q_p, tau_p):
    """``tr(C)/tr(R)`` for one user with correlation ``R_u`` on pilot covariance ``Q_p``."""
    X = solve_hermitian(Q_p, R_u)
    gain = p_pilot_u * tau_p * np.real(np.trace(R_u @ X))
    return 1.0 - gain / np.real(np.trace(R_u))


def gamma_uncorrelated(beta_jj, rel_gains_sharing, tau_p, snr_tr):
    """Estimate variance of the own-cell user in uncorrelated fading.

    ``rel_gains_sharing`` are ``beta^j_{lk}/beta^l_{lk}`` of the pilot-sharing
    users of other cells.
    """
    return beta_jj / (1.0 + np.sum(rel_gains_sharing) + 1.0 / (tau_p * snr_tr))
