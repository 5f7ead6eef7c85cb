"""Multi-slope path loss and one-ring spatial correlation.

Distances are in meters throughout this module (the dual-slope coefficients
are meter based).  Geometry hands over kilometres; convert with ``KM``.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import toeplitz

from .specfun import gauss_legendre, integrate_oscillatory

KM = 1000.0
D_MIN = 1.0  # meters


@dataclass(frozen=True)
class MultiSlopeModel:
    """Path loss ``beta(d) = upsilon_n * d**-alpha_n`` on ``[r_{n-1}, r_n)``.

    Only the first coefficient is a free parameter; the others are derived so
    that the gain is continuous at every breakpoint.
    """

    breakpoints: tuple  # interior breakpoints r_1..r_{N-1} in meters
    exponents: tuple  # alpha_1..alpha_N
    upsilon1: float
    upsilons: tuple = field(init=False)

    def __post_init__(self):
        r = tuple(float(v) for v in self.breakpoints)
        a = tuple(float(v) for v in self.exponents)
        if len(a) != len(r) + 1:
            raise ValueError("need exactly one more exponent than interior breakpoints")
        if any(x >= y for x, y in zip(r, r[1:])) or any(v <= 0 for v in r):
            raise ValueError("breakpoints must be positive and strictly increasing")
        if any(x > y for x, y in zip(a, a[1:])):
            raise ValueError("exponents must be non-decreasing")
        if not self.upsilon1 > 0:
            raise ValueError("upsilon1 must be positive")
        ups = [float(self.upsilon1)]
        for n, rn in enumerate(r):
            ups.append(ups[-1] * rn ** (a[n + 1] - a[n]))
        object.__setattr__(self, "breakpoints", r)
        object.__setattr__(self, "exponents", a)
        object.__setattr__(self, "upsilons", tuple(ups))

    @property
    def n_slopes(self):
        return len(self.exponents)

    @property
    def radii(self):
        """Full breakpoint list ``r_0 = 0, ..., r_N = inf``."""
        return (0.0,) + self.breakpoints + (np.inf,)

    @classmethod
    def dual_slope(cls):
        """Dual-slope urban micro model: r1 = 100 m, alpha = (2.1, 4)."""
        return cls(breakpoints=(100.0,), exponents=(2.1, 4.0), upsilon1=8.3e-4)

    @classmethod
    def single_slope(cls, alpha, upsilon=1.0):
        return cls(breakpoints=(), exponents=(alpha,), upsilon1=upsilon)

    def as_dict(self):
        return {
            "breakpoints_m": list(self.breakpoints),
            "exponents": list(self.exponents),
            "upsilon1": self.upsilon1,
        }


def path_loss(model: MultiSlopeModel, d):
    """Average channel gain at distance ``d`` (meters, scalar or array)."""
    d = np.asarray(d, dtype=float)
    if np.any(~(d >= D_MIN)):
        raise ValueError(f"distance below d_min = {D_MIN} m")
    seg = np.searchsorted(np.asarray(model.breakpoints), d, side="right")
    ups = np.asarray(model.upsilons)[seg]
    alp = np.asarray(model.exponents)[seg]
    out = ups * d ** (-alp)
    return out if out.ndim else float(out)


@dataclass
class CorrelationMatrix:
    entries: np.ndarray
    beta: float
    m_antennas: int
    angular_spread: float | None
    aoa: float | None

    def eigvalsh(self):
        return np.linalg.eigvalsh(self.entries)

    def sqrtm(self):
        """Hermitian square root with tiny negative eigenvalues clipped."""
        return psd_sqrt(self.entries)


def psd_sqrt(a):
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)[..., None, :]) @ np.swapaxes(v, -1, -2).conj()


def _quad_order(m_antennas, spread, order):
    # phase of the widest lag changes by at most pi*(M-1)*2*sin(spread) over the interval
    span = np.pi * max(m_antennas - 1, 1) * 2.0 * min(np.sin(min(spread, np.pi / 2)), 1.0)
    need = int(np.ceil(0.8 * span + 40))
    return max(order, need)


def one_ring_columns(m_antennas, aoas, spread, order=64):
    """First Toeplitz columns of unit-gain one-ring matrices, shape (n, M).

    Column entry m is ``(1/(2 spread)) * int_{-spread}^{spread} exp(j pi m sin(aoa + t)) dt``.
    The quadrature order grows with the array size so that the widest lag
    stays resolved.
    """
    aoas = np.atleast_1d(np.asarray(aoas, dtype=float))
    lags = np.arange(m_antennas)
    if spread == 0:
        return np.exp(1j * np.pi * np.outer(np.sin(aoas), lags))
    rule = gauss_legendre(_quad_order(m_antennas, spread, order))
    t, w = rule.mapped(-spread, spread)
    out = np.empty((aoas.size, m_antennas), dtype=complex)
    # chunk to bound memory at (chunk, nodes, M)
    chunk = max(1, 2_000_000 // (t.size * m_antennas))
    for s in range(0, aoas.size, chunk):
        z = np.exp(1j * np.pi * np.sin(aoas[s : s + chunk, None] + t[None, :]))
        powers = np.empty(z.shape + (m_antennas,), dtype=complex)
        powers[..., 0] = 1.0
        powers[..., 1:] = z[..., None]
        np.cumprod(powers, axis=-1, out=powers)
        out[s : s + chunk] = (w @ powers) / (2.0 * spread)
    return out


def toeplitz_from_column(col):
    """Hermitian Toeplitz matrix (or stack) from first column(s)."""
    col = np.asarray(col)
    if col.ndim == 1:
        return toeplitz(col)
    m = col.shape[-1]
    idx = np.arange(m)[:, None] - np.arange(m)[None, :]
    full = np.where(idx[None] >= 0, col[:, np.abs(idx)], np.conj(col[:, np.abs(idx)]))
    # fancy indexing leaves the stack axis innermost; BLAS-backed matmul wants C order
    return np.ascontiguousarray(full)


@lru_cache(maxsize=4096)
def _cached_unit_column(m_antennas, aoa, spread, order):
    col = one_ring_columns(m_antennas, [aoa], spread, order)[0]
    col.setflags(write=False)
    return col


def one_ring(m_antennas: int, beta: float, aoa: float, spread: float, order: int = 64) -> CorrelationMatrix:
    """One-ring correlation matrix of a half-wavelength ULA.

    ``spread = 0`` gives the rank-one matrix ``beta * a a^H``.
    """
    if m_antennas < 1:
        raise ValueError("need at least one antenna")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    if spread < 0:
        raise ValueError(f"angular spread must be non-negative, got {spread!r}")
    col = _cached_unit_column(int(m_antennas), float(aoa), float(spread), int(order))
    r = beta * toeplitz(col)
    return CorrelationMatrix(r, float(beta), int(m_antennas), float(spread), float(aoa))


def one_ring_entry(m1, m2, beta, aoa, spread, rule=None):
    """Single entry by direct quadrature (reference path for tests)."""
    lag = m1 - m2
    val = integrate_oscillatory(
        lambda t: np.exp(1j * np.pi * lag * np.sin(aoa + t)), -spread, spread, rule
    )
    return beta * val / (2.0 * spread)


def uncorrelated(m_antennas: int, beta: float) -> CorrelationMatrix:
    if m_antennas < 1:
        raise ValueError("need at least one antenna")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    return CorrelationMatrix(beta * np.eye(m_antennas, dtype=complex), float(beta), int(m_antennas), None, None)


def unit_columns(m_antennas, aoas, spread, order=64):
    """Unit-gain first columns for either the one-ring model or ``spread=None`` (identity)."""
    aoas = np.atleast_1d(aoas)
    if spread is None:
        col = np.zeros((aoas.size, m_antennas), dtype=complex)
        col[:, 0] = 1.0
        return col
    return one_ring_columns(m_antennas, aoas, spread, order)
