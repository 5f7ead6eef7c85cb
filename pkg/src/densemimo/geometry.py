"""Poisson base station deployments on a wrap-around (torus) window.

Positions are in kilometres.  Users are dropped uniformly inside the
Poisson-Voronoi cell of their base station by rejection: uniform points in
the window are assigned to the nearest base station until every station has
``k_users`` of them.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

D_MIN_KM = 1e-3
MIN_EXPECTED_BS = 50
MAX_RESAMPLES = 100


def default_window_side(lam):
    """Window side in km: at least 1 km, and about 200 expected base stations."""
    return max(1.0, float(np.sqrt(200.0 / lam)))


@dataclass(frozen=True)
class NetworkRealization:
    bs_positions: np.ndarray  # (L, 2)
    ue_positions: np.ndarray  # (L, K, 2); ue_positions[l] are the users of cell l
    serving_index: np.ndarray  # (L, K) serving station of every user (== l)
    distances: np.ndarray  # (L, K, L) distance of user (l, i) to station j, km
    aoas: np.ndarray  # (L, K, L) angle of arrival at station j, radians
    window_side: float
    typical_bs: int

    @property
    def n_bs(self):
        return self.bs_positions.shape[0]

    @property
    def k_users(self):
        return self.ue_positions.shape[1]

    def serving_distances(self):
        """Distance of every user to its own station, shape (L, K)."""
        ell = np.arange(self.n_bs)
        return self.distances[ell, :, ell]

    def to_csv(self, bs_path, ue_path):
        with open(bs_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bs_id", "x", "y"])
            for l, (x, y) in enumerate(self.bs_positions):
                w.writerow([l, repr(float(x)), repr(float(y))])
        with open(ue_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ue_id", "bs_id", "x", "y"])
            uid = 0
            for l in range(self.n_bs):
                for x, y in self.ue_positions[l]:
                    w.writerow([uid, l, repr(float(x)), repr(float(y))])
                    uid += 1


def torus_delta(a, b, side):
    """Shortest displacement ``b - a`` on a square torus of the given side."""
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return d - side * np.round(d / side)


def pairwise_geometry(bs_positions, ue_positions, window_side):
    """Distances (km, clamped at 1 m) and angles of arrival of every user at every station.

    The array broadside points along +x, so a user due east of a station
    arrives at angle 0.
    """
    ue = np.asarray(ue_positions, dtype=float)
    bs = np.asarray(bs_positions, dtype=float)
    delta = torus_delta(bs[None, None, :, :], ue[:, :, None, :], window_side)
    dist = np.maximum(np.hypot(delta[..., 0], delta[..., 1]), D_MIN_KM)
    aoa = np.arctan2(delta[..., 1], delta[..., 0])
    aoa = np.where(aoa <= -np.pi, aoa + 2 * np.pi, aoa)
    return dist, aoa


def _drop_users(tree, n_bs, k_users, side, rng):
    users = np.empty((n_bs, k_users, 2))
    have = np.zeros(n_bs, dtype=int)
    batch = max(4 * n_bs * k_users, 1024)
    while True:
        missing = k_users - have
        if not missing.any():
            return users
        pts = rng.uniform(0.0, side, size=(batch, 2))
        _, owner = tree.query(pts)
        order = np.argsort(owner, kind="stable")
        owner_sorted = owner[order]
        first = np.searchsorted(owner_sorted, owner_sorted, side="left")
        rank = np.arange(owner_sorted.size) - first
        keep = rank < missing[owner_sorted]
        sel_owner = owner_sorted[keep]
        slot = have[sel_owner] + rank[keep]
        users[sel_owner, slot] = pts[order[keep]]
        np.add.at(have, sel_owner, 1)


def sample_network(lam: float, k_users: int, window_side: float | None = None, rng_seed=0) -> NetworkRealization:
    """Draw a Poisson deployment of density ``lam`` (BS/km^2) with ``k_users`` per cell.

    ``rng_seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if not lam > 0:
        raise ValueError(f"density must be positive, got {lam!r}")
    if k_users < 1:
        raise ValueError("need at least one user per cell")
    side = default_window_side(lam) if window_side is None else float(window_side)
    if lam * side**2 < MIN_EXPECTED_BS:
        raise ValueError(
            f"window of side {side} km holds only {lam * side ** 2:.1f} expected stations "
            f"(need >= {MIN_EXPECTED_BS})"
        )
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    for _ in range(MAX_RESAMPLES):
        n_bs = rng.poisson(lam * side**2)
        if n_bs >= 2:
            break
    else:
        raise RuntimeError("fewer than 2 base stations after repeated resampling")
    bs = rng.uniform(0.0, side, size=(n_bs, 2))
    tree = cKDTree(bs, boxsize=side)
    users = _drop_users(tree, n_bs, k_users, side, rng)
    dist, aoa = pairwise_geometry(bs, users, side)
    center = np.full(2, side / 2.0)
    typical = int(tree.query(center)[1])
    serving = np.repeat(np.arange(n_bs)[:, None], k_users, axis=1)
    return NetworkRealization(bs, users, serving, dist, aoa, side, typical)
