"""Hermitian solves: Cholesky first, pivoted LDL^H as the fallback."""

import numpy as np
import scipy.linalg as sla


def solve_hermitian(A, B):
    """Solve ``A X = B`` for Hermitian ``A`` (single matrix or a stack)."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim == 2:
        return _solve_one(A, B)
    out = np.empty(np.broadcast_shapes(A.shape[:-2], B.shape[:-2]) + B.shape[-2:], dtype=np.result_type(A, B))
    A_b = np.broadcast_to(A, out.shape[:-2] + A.shape[-2:])
    B_b = np.broadcast_to(B, out.shape)
    for idx in np.ndindex(out.shape[:-2]):
        out[idx] = _solve_one(A_b[idx], B_b[idx])
    return out


def _solve_one(A, B):
    try:
        c = sla.cho_factor(A, lower=True, check_finite=False)
        return sla.cho_solve(c, B, check_finite=False)
    except np.linalg.LinAlgError:
        return sla.solve(A, B, assume_a="her", check_finite=False)
