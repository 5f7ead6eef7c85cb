"""Special functions and quadrature used by the analytic formulas.

The incomplete gamma function follows the classic split between the power
series of the lower function and a Lentz continued fraction for the upper
one.  The Lambert W function uses Halley's iteration.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

__all__ = [
    "QuadratureRule",
    "gauss_legendre",
    "integrate_oscillatory",
    "upper_incomplete_gamma",
    "lambert_w0",
]

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _check_gamma_args(a, x):
    if not (math.isfinite(a) and a > 0):
        raise ValueError(f"upper_incomplete_gamma needs finite a > 0, got a={a!r}")
    if math.isnan(x) or x < 0:
        raise ValueError(f"upper_incomplete_gamma needs x >= 0, got x={x!r}")


def _lower_series(a, x):
    # gamma(a, x) = e^{-x} x^a sum_n x^n / (a (a+1) ... (a+n))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise ArithmeticError(f"lower gamma series did not converge (a={a}, x={x})")
    return math.exp(-x + a * math.log(x)) * total


def _upper_continued_fraction(a, x):
    # modified Lentz evaluation of the continued fraction for Gamma(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b if b != 0 else 1.0 / _TINY
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"upper gamma fraction did not converge (a={a}, x={x})")
    log_val = -x + a * math.log(x) + math.log(h)
    return math.exp(log_val) if log_val > -745.0 else 0.0


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Upper incomplete gamma function Gamma(a, x) (not regularized).

    ``x = inf`` is accepted and returns 0.
    """
    a = float(a)
    x = float(x)
    _check_gamma_args(a, x)
    if x == 0.0:
        return math.gamma(a)
    if math.isinf(x):
        return 0.0
    if x > a + 1.0:
        return _upper_continued_fraction(a, x)
    return math.gamma(a) - _lower_series(a, x)


def lambert_w0(v: float) -> float:
    """Principal branch of the Lambert W function for real ``v >= -1/e``."""
    v = float(v)
    branch_point = -1.0 / math.e
    if math.isnan(v) or v < branch_point:
        # allow round-off right at the branch point
        if not (v < branch_point and branch_point - v < 1e-15):
            raise ValueError(f"lambert_w0 is defined for v >= -1/e, got {v!r}")
        v = branch_point
    if v == 0.0:
        return 0.0
    if v == branch_point:
        return -1.0
    if math.isinf(v):
        return math.inf

    # starting point
    if v < -0.25:
        p = math.sqrt(2.0 * (math.e * v + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    elif v < 3.0:
        w = math.log1p(v)
        w = w * (1.0 - math.log1p(w) / (2.0 + w)) if v > 0 else w
    else:
        lv = math.log(v)
        llv = math.log(lv)
        w = lv - llv + llv / lv

    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - v
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= 4e-16 * (1.0 + abs(w)):
            break
    return w


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on the reference interval [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def mapped(self, lo, hi):
        """Nodes and weights transported to ``[lo, hi]``."""
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        return mid + half * self.nodes, half * self.weights


@lru_cache(maxsize=64)
def gauss_legendre(order: int = 64) -> QuadratureRule:
    if order < 1:
        raise ValueError("quadrature order must be a positive integer")
    nodes, weights = roots_legendre(int(order))
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights, order=int(order))


def integrate_oscillatory(f, lo: float, hi: float, rule: QuadratureRule | None = None) -> complex:
    """Fixed-order Gauss-Legendre estimate of the integral of ``f`` on [lo, hi].

    ``f`` must accept a numpy array of abscissae.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    rule = rule or gauss_legendre(64)
    x, w = rule.mapped(lo, hi)
    vals = np.asarray(f(x))
    if vals.shape == ():
        vals = np.full(x.shape, vals)
    return complex(np.dot(w, vals))
