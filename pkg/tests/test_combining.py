import numpy as np
import pytest

from densemimo.combining import (
    SCHEMES,
    RankDeficientError,
    build_combiner,
    instantaneous_sinr,
    sinr_batch,
    z_matrix,
)
from densemimo.selftest import scheme_sinrs, small_instance


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def test_zf_inverts_estimates():
    rng = np.random.default_rng(0)
    H = crandn(rng, 4, 20, 6)
    V = build_combiner("ZF", H).vectors
    assert np.allclose(np.conj(np.swapaxes(V, -1, -2)) @ H, np.eye(6), atol=1e-8)


def test_zf_rank_deficiency():
    rng = np.random.default_rng(1)
    H = crandn(rng, 8, 3)
    H[:, 2] = 2 * H[:, 0]
    with pytest.raises(RankDeficientError):
        build_combiner("ZF", H)
    with pytest.raises(RankDeficientError):
        build_combiner("ZF", crandn(rng, 3, 5))


def test_unknown_scheme():
    with pytest.raises(ValueError):
        build_combiner("LMMSE", np.ones((4, 1)))


def test_single_user_white_noise_combiners_are_collinear():
    rng = np.random.default_rng(2)
    M = 12
    h = crandn(rng, M, 1)
    p = np.array([3.0])
    Z = 0.7 * np.eye(M)
    sinrs = []
    for s in SCHEMES:
        v = build_combiner(s, h, p_own=p, H_all=h, p_all=p, Z=Z, Zbar=Z).vectors[:, 0]
        cos = abs(np.vdot(v, h[:, 0])) / (np.linalg.norm(v) * np.linalg.norm(h))
        assert cos == pytest.approx(1.0, abs=1e-12)
        sinrs.append(instantaneous_sinr(v, h, p, 0, Z).sinr)
    assert np.allclose(sinrs, sinrs[0], rtol=1e-12)
    assert sinrs[0] == pytest.approx(3.0 * np.linalg.norm(h) ** 2 / 0.7, rel=1e-12)


def test_orthogonal_combiner_sees_only_noise():
    rng = np.random.default_rng(3)
    M = 6
    H = crandn(rng, M, 3)
    # v orthogonal to the interferers (columns 1, 2)
    q, _ = np.linalg.qr(H[:, 1:], mode="complete")
    v = q[:, 2] * 1.7
    p = np.array([2.0, 5.0, 1.0])
    s = instantaneous_sinr(v, H, p, 0, 0.5 * np.eye(M))
    assert s.interference == pytest.approx(0.0, abs=1e-12)
    assert s.sinr == pytest.approx(2.0 * abs(np.vdot(v, H[:, 0])) ** 2 / (0.5 * np.linalg.norm(v) ** 2), rel=1e-12)


def test_sinr_is_scale_invariant():
    rng = np.random.default_rng(4)
    H = crandn(rng, 10, 7)
    p = rng.uniform(0.5, 2, 7)
    Z = z_matrix(np.ones(2), np.stack([np.eye(10), np.eye(10)]), 1.0)
    v = crandn(rng, 10)
    base = instantaneous_sinr(v, H, p, 3, Z).sinr
    for c in (1e-6, -2.5, 3j, 1e5 * (1 - 1j)):
        assert instantaneous_sinr(c * v, H, p, 3, Z).sinr == pytest.approx(base, rel=1e-12)
    with pytest.raises(ValueError):
        instantaneous_sinr(np.zeros(10), H, p, 3, Z)


def test_decomposition_bookkeeping():
    rng = np.random.default_rng(5)
    H = crandn(rng, 8, 6)
    p = rng.uniform(0.5, 2, 6)
    cell_of = np.array([0, 0, 1, 1, 2, 2])
    pilot_of = np.array([0, 1, 0, 1, 2, 3])
    v = crandn(rng, 8)
    s = instantaneous_sinr(v, H, p, 0, np.eye(8), cell_of, pilot_of)
    g = p * np.abs(np.conj(v) @ H) ** 2
    assert s.signal == pytest.approx(g[0])
    assert s.intra == pytest.approx(g[1])
    assert s.inter == pytest.approx(g[2:].sum())
    assert s.coherent == pytest.approx(g[2])
    assert min(s.signal, s.intra, s.inter, s.coherent, s.noise_term) >= 0
    assert s.sinr == s.signal / (s.intra + s.inter + s.noise_term)
    single = instantaneous_sinr(v, H[:, :2], p[:2], 0, np.eye(8), cell_of[:2], pilot_of[:2])
    assert single.coherent == 0.0


def test_batch_matches_scalar_path():
    rng = np.random.default_rng(6)
    inst = small_instance(rng, n_draws=3)
    K = inst.K
    for d in range(3):
        H = inst.H_all[d]
        V = build_combiner("MMMSE", H[:, :K], inst.p[:K], H, inst.p, inst.Z).vectors
        batch = sinr_batch(V, H, inst.p, np.arange(K), inst.Z)
        for k in range(K):
            assert batch[k] == pytest.approx(instantaneous_sinr(V[:, k], H, inst.p, k, inst.Z).sinr, rel=1e-12)


def test_mmmse_equals_generalized_rayleigh_optimum():
    rng = np.random.default_rng(7)
    for _ in range(20):
        inst = small_instance(rng)
        H, p, K = inst.H_all[0], inst.p, inst.K
        B = (H * p) @ H.conj().T + inst.Z
        got = scheme_sinrs(inst)["MMMSE"]
        for k in range(K):
            h = H[:, k]
            opt = p[k] * np.real(np.vdot(h, np.linalg.solve(B - p[k] * np.outer(h, h.conj()), h)))
            assert got[k] == pytest.approx(opt, rel=1e-8)


def test_mmmse_beats_probes_and_schemes():
    rng = np.random.default_rng(8)
    for _ in range(10):
        inst = small_instance(rng)
        H, p, K = inst.H_all[0], inst.p, inst.K
        sinrs = scheme_sinrs(inst)
        best = sinrs["MMMSE"]
        for s in SCHEMES:
            assert np.all(best >= sinrs[s] * (1 - 1e-9))
        probes = crandn(rng, 100, H.shape[0])
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        for k in range(K):
            vals = [instantaneous_sinr(v, H, p, k, inst.Z).sinr for v in probes]
            assert best[k] >= max(vals) * (1 - 1e-9)
