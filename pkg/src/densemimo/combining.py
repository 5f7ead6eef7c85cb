"""Receive combiners and the instantaneous SINR of the typical user.

Arrays follow the column convention: estimates are ``H`` of shape
``(..., M, U)`` (one column per user at the receiving station) and
combiners ``V`` of shape ``(..., M, K)``.  Leading axes are fading draws.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import solve_hermitian

SCHEMES = ("MR", "ZF", "SMMSE", "MMMSE")


class RankDeficientError(np.linalg.LinAlgError):
    pass


@dataclass
class CombinerSet:
    scheme: str
    vectors: np.ndarray  # (..., M, K)


@dataclass
class SinrSample:
    signal: float
    intra: float
    inter: float
    coherent: float
    noise_term: float  # v^H Z v

    @property
    def interference(self):
        return self.intra + self.inter

    @property
    def sinr(self):
        return self.signal / (self.interference + self.noise_term)


def _herm(a):
    return np.conj(np.swapaxes(a, -1, -2))


def build_combiner(scheme, H_own, p_own=None, H_all=None, p_all=None, Z=None, Zbar=None, rcond=1e-10) -> CombinerSet:
    """Combining matrix of the serving station for its ``K`` users.

    MR and ZF only need ``H_own``.  M-MMSE needs every tracked estimate
    ``H_all`` with powers ``p_all`` and ``Z`` (estimation error plus
    untracked users plus noise); S-MMSE needs ``p_own`` and ``Zbar``.
    """
    if scheme == "MR":
        V = H_own
    elif scheme == "ZF":
        gram = _herm(H_own) @ H_own
        s = np.linalg.svd(H_own, compute_uv=False)
        if np.any(s[..., -1] <= rcond * s[..., 0]) or H_own.shape[-1] > H_own.shape[-2]:
            raise RankDeficientError("ZF needs linearly independent own-cell estimates")
        V = H_own @ np.linalg.inv(gram)
    elif scheme == "MMMSE":
        A = (H_all * p_all[..., None, :]) @ _herm(H_all) + Z
        V = solve_hermitian(A, H_own * p_own[..., None, :])
    elif scheme == "SMMSE":
        A = (H_own * p_own[..., None, :]) @ _herm(H_own) + Zbar
        V = solve_hermitian(A, H_own * p_own[..., None, :])
    else:
        raise ValueError(f"unknown combining scheme {scheme!r}")
    if not np.all(np.isfinite(V)):
        raise np.linalg.LinAlgError(f"{scheme} combiner is not finite")
    return CombinerSet(scheme, V)


def instantaneous_sinr(v, H_all, p_all, desired, Z, cell_of=None, pilot_of=None) -> SinrSample:
    """SINR of one combiner ``v`` for user column ``desired`` of ``H_all``.

    ``cell_of`` splits the interference into intra- and inter-cell parts
    (default: everything counts as inter-cell); ``pilot_of`` flags the
    pilot-sharing share of the interference as ``coherent``.
    """
    v = np.asarray(v)
    if not np.any(v):
        raise ValueError("combiner must be nonzero")
    g = p_all * np.abs(np.conj(v) @ H_all) ** 2
    signal = float(g[desired])
    others = np.ones(g.shape, dtype=bool)
    others[desired] = False
    if cell_of is not None:
        same = np.asarray(cell_of) == cell_of[desired]
        intra = float(g[others & same].sum())
        inter = float(g[others & ~same].sum())
    else:
        intra, inter = 0.0, float(g[others].sum())
    coherent = 0.0
    if pilot_of is not None:
        coherent = float(g[others & (np.asarray(pilot_of) == pilot_of[desired])].sum())
    zterm = float(np.real(np.conj(v) @ Z @ v))
    return SinrSample(signal, intra, inter, coherent, zterm)


def sinr_batch(V, H_all, p_all, own, Z):
    """SINR of every column of ``V`` (shape (..., M, K)); ``own[k]`` is the column of user k in ``H_all``."""
    G = _herm(V) @ H_all  # (..., K, U)
    P = p_all * np.abs(G) ** 2
    k = np.arange(V.shape[-1])
    signal = P[..., k, own]
    interf = P.sum(axis=-1) - signal
    zterm = np.real(np.sum(np.conj(V) * (Z @ V), axis=-2))
    return signal / (interf + zterm)


def z_matrix(p, C, sigma2, untracked=None):
    """``sum_u p_u C_u + sigma2 I`` plus the covariance of untracked users."""
    M = C.shape[-1]
    Z = np.tensordot(p, C, axes=1) + sigma2 * np.eye(M)
    if untracked is not None:
        Z = Z + untracked
    return Z


def zbar_matrix(p_own, C_own, other_cells_cov, sigma2):
    """S-MMSE regularizer: own-cell error covariances plus full covariance of other cells."""
    M = C_own.shape[-1]
    return np.tensordot(p_own, C_own, axes=1) + other_cells_cov + sigma2 * np.eye(M)


def interference_decomposition(scheme, scenario, trials=None):
    """Average non-coherent and coherent interference (dB relative to the combiner noise).

    Thin wrapper over the Monte Carlo engine; see
    :func:`densemimo.montecarlo.estimate_interference`.
    """
    from .montecarlo import estimate_interference

    rec = estimate_interference(scenario, scheme, trials=trials)
    return rec.noncoherent_db, rec.coherent_db
