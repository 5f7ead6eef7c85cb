import numpy as np
import pytest
from scipy.spatial.distance import cdist

from densemimo.geometry import D_MIN_KM, default_window_side, pairwise_geometry, sample_network, torus_delta


def brute_torus_dist(a, b, side):
    # distance to the nearest of the nine periodic images
    shifts = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)]) * side
    return np.min([cdist(a, b + s) for s in shifts], axis=0)


def test_bs_count_is_poisson():
    counts = np.array([sample_network(100.0, 1, window_side=1.0, rng_seed=s).n_bs for s in range(1000)])
    se = np.sqrt(100.0 / counts.size)
    assert abs(counts.mean() - 100.0) < 3 * se
    # variance of the sample variance of Poisson(100) is about 2*100^2/n
    assert abs(counts.var(ddof=1) - 100.0) < 3 * np.sqrt(2 * 100.0**2 / counts.size)


def test_nearest_station_association():
    net = sample_network(20.0, 5, rng_seed=4)
    dist = net.distances
    nearest = dist.argmin(axis=-1)
    assert np.array_equal(nearest, net.serving_index)
    serving = net.serving_distances()
    assert np.allclose(serving, dist.min(axis=-1))


def test_distances_match_brute_force_torus():
    net = sample_network(5.0, 3, rng_seed=9)
    ue = net.ue_positions.reshape(-1, 2)
    ref = brute_torus_dist(ue, net.bs_positions, net.window_side)
    assert np.allclose(net.distances.reshape(ue.shape[0], -1), np.maximum(ref, D_MIN_KM), atol=1e-12)


def test_uniform_users_see_rayleigh_nearest_distance():
    # users uniform over the plane: nearest-station distance is Rayleigh with mean 1/(2 sqrt(lam))
    lam = 10.0
    rng = np.random.default_rng(0)
    d = []
    for s in range(5):
        net = sample_network(lam, 1, rng_seed=s)
        pts = rng.uniform(0, net.window_side, size=(2000, 1, 2))
        dist, _ = pairwise_geometry(net.bs_positions, pts, net.window_side)
        d.append(dist.min(axis=-1).ravel())
    d = np.concatenate(d)
    assert d.size == 10_000
    assert d.mean() == pytest.approx(1 / (2 * np.sqrt(lam)), rel=0.05)


def test_k_users_per_cell_follow_typical_cell_distance():
    # a fixed K per cell over-weights small cells; the typical-cell distance is
    # close to Rayleigh with density 1.25 lam
    lam = 10.0
    d = np.concatenate([sample_network(lam, 10, rng_seed=s).serving_distances().ravel() for s in range(5)])
    assert d.size >= 8000
    assert d.mean() == pytest.approx(1 / (2 * np.sqrt(1.25 * lam)), rel=0.05)
    assert d.mean() < 1 / (2 * np.sqrt(lam))


def test_typical_station_owns_window_center():
    net = sample_network(10.0, 2, rng_seed=1)
    c = np.full((1, 2), net.window_side / 2)
    d = brute_torus_dist(c, net.bs_positions, net.window_side)[0]
    assert net.typical_bs == int(d.argmin())


def test_relabelling_permutes_association():
    net = sample_network(10.0, 3, rng_seed=2)
    perm = np.random.default_rng(0).permutation(net.n_bs)
    bs = net.bs_positions[perm]
    ue = net.ue_positions[perm]
    dist, _ = pairwise_geometry(bs, ue, net.window_side)
    assert np.array_equal(dist.argmin(axis=-1), np.repeat(np.arange(net.n_bs)[:, None], 3, axis=1))


def test_geometry_examples():
    bs = np.array([[0.5, 0.5], [0.01, 0.5]])
    ue = np.array([[[0.5, 0.5], [0.6, 0.5]], [[0.99, 0.5], [0.5, 0.6]]])
    dist, aoa = pairwise_geometry(bs, ue, 1.0)
    assert dist[0, 0, 0] == D_MIN_KM
    assert dist[0, 1, 0] == pytest.approx(0.1, abs=1e-12)
    assert aoa[0, 1, 0] == pytest.approx(0.0, abs=1e-12)
    assert dist[1, 0, 1] == pytest.approx(0.02, abs=1e-12)
    assert aoa[1, 1, 0] == pytest.approx(np.pi / 2)
    # the wrapped neighbour sits to the west, so it arrives from angle pi
    assert aoa[1, 0, 1] == pytest.approx(np.pi)
    assert np.allclose(torus_delta([0.01, 0.5], [0.99, 0.5], 1.0), [-0.02, 0.0])


def test_deterministic_given_seed():
    a = sample_network(10.0, 4, rng_seed=np.random.SeedSequence(77))
    b = sample_network(10.0, 4, rng_seed=np.random.SeedSequence(77))
    assert np.array_equal(a.ue_positions, b.ue_positions)
    assert np.array_equal(a.bs_positions, b.bs_positions)


def test_window_defaults_and_errors():
    assert default_window_side(1.0) == pytest.approx(np.sqrt(200))
    assert default_window_side(1000.0) == 1.0
    with pytest.raises(ValueError):
        sample_network(10.0, 1, window_side=1.0)
    with pytest.raises(ValueError):
        sample_network(0.0, 1)
    with pytest.raises(ValueError):
        sample_network(10.0, 0)


def test_csv_dump(tmp_path):
    net = sample_network(10.0, 2, rng_seed=3)
    net.to_csv(tmp_path / "bs.csv", tmp_path / "ue.csv")
    bs = np.loadtxt(tmp_path / "bs.csv", delimiter=",", skiprows=1)
    ue = np.loadtxt(tmp_path / "ue.csv", delimiter=",", skiprows=1)
    assert bs.shape == (net.n_bs, 3)
    assert ue.shape == (net.n_bs * 2, 4)
    assert np.allclose(ue[:, 2:], net.ue_positions.reshape(-1, 2))
