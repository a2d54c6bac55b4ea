import json

import numpy as np
import pytest

from randproj.errors import DomainError
from randproj.metrics import w1_1d
from randproj.projection import (ReplicatedProjectionSample, project, read_csv, read_raw,
                                 sample_directions, sample_pn, sample_q, sample_q_sqrt, sample_qn,
                                 write_csv, write_raw)
from randproj.rs_algebra import KronCovariance, rs_build
from randproj.sources import isotropic_gaussian, point_mass, spiked_gaussian


def _cov_within(samples, target, z=4.0):
    """Entrywise empirical covariance vs ``target`` within ``z`` standard errors."""
    X = samples - samples.mean(axis=0)
    n = X.shape[0]
    prods = X[:, :, None] * X[:, None, :]
    est = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / np.sqrt(n)
    return np.all(np.abs(est - target) <= z * se + 1e-12)


def test_directions_statistics():
    rng = np.random.default_rng(0)
    T = sample_directions(1000, 3, rng, size=10_000)
    sq = np.einsum("snk,snk->sk", T, T)
    assert np.all(np.abs(sq.mean(axis=0) - 1) < 4 * sq.std(axis=0) / 100)
    cross = np.einsum("sn,sn->s", T[:, :, 0], T[:, :, 1])
    assert abs(cross.mean()) < 4 * cross.std() / 100
    a = sample_directions(50, 2, np.random.default_rng(7))
    b = sample_directions(50, 2, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        sample_directions(3, 3, rng)


def test_project():
    theta = np.random.default_rng(1).standard_normal((6, 2))
    np.testing.assert_array_equal(project(theta, np.zeros(6)), 0)
    e1 = np.zeros((4, 1))
    e1[0, 0] = 1.0
    assert project(e1, np.array([5.0, 1, 2, 3]))[0] == 5.0
    x = np.random.default_rng(2).standard_normal(6)
    naive = [sum(theta[i, j] * x[i] for i in range(6)) for j in range(2)]
    np.testing.assert_allclose(project(theta, x), naive, atol=1e-12)


def test_pn_point_mass():
    mu = np.linspace(-1, 1, 30)
    s = sample_pn(point_mass(mu), 1, 3, np.random.default_rng(3))
    assert s.values.shape == (1, 2, 3)
    np.testing.assert_array_equal(s.values[0, 0], s.values[0, 1])


def test_pn_shape_and_fixed_theta():
    rng = np.random.default_rng(4)
    src = isotropic_gaussian(20)
    s = sample_pn(src, 2, 3, rng, size=5)
    assert s.values.shape == (5, 4, 3) and s.flat().shape == (5, 12)
    theta = sample_directions(20, 3, rng)
    s = sample_pn(src, 1, 3, rng, theta=theta, size=2)
    assert s.meta["theta_mode"] == "fixed"


def test_pn_isotropic_covariance():
    s = sample_pn(isotropic_gaussian(64), 1, 2, np.random.default_rng(5), size=100_000)
    target = KronCovariance(rs_build(2, 1.0, 0.0), 2).dense()
    assert _cov_within(s.flat(), target)


def test_pn_conditional_gaussian_law():
    # x ~ N(mu, diag(lam)) and fixed Theta: Theta^T x ~ N(Theta^T mu, Theta^T diag(lam) Theta)
    N, k = 200, 2
    rng = np.random.default_rng(6)
    lam = rng.uniform(0.5, 1.5, N)
    mu = rng.standard_normal(N) * 0.3
    src = spiked_gaussian(N, lam, mu)
    theta = sample_directions(N, k, rng)
    s = sample_pn(src, 1, k, rng, theta=theta, size=50_000).values[:, 0, :]
    m_se = s.std(axis=0) / np.sqrt(s.shape[0])
    assert np.all(np.abs(s.mean(axis=0) - theta.T @ mu) < 4 * m_se)
    assert _cov_within(s, theta.T @ (lam[:, None] * theta))


def test_pn_deterministic_equals_common_shift():
    q = 0.36
    src = point_mass(np.full(40, np.sqrt(q)))
    rng = np.random.default_rng(7)
    theta = sample_directions(40, 2, rng)
    s = sample_pn(src, 2, 2, rng, theta=theta)
    np.testing.assert_allclose(s.values[0], np.broadcast_to(theta.T @ src.mean, (4, 2)))


def test_qn_laws():
    rng = np.random.default_rng(8)
    s = sample_qn(np.zeros(30), 1.0, 0.3, 1, 2, rng, size=50_000)
    assert _cov_within(s.flat(), 0.7 * np.eye(4))
    s = sample_qn(np.full(30, 2.0), 1.0, 0.3, 1, 2, rng, size=50_000)
    diff = s.values[:, 0] - s.values[:, 1]
    assert _cov_within(diff, 1.4 * np.eye(2))
    q = 0.25
    s = sample_qn(np.full(50, np.sqrt(q)), 1.0, q, 1, 2, rng, size=100_000)
    assert _cov_within(s.flat(), KronCovariance(rs_build(2, 1.0, q), 2).dense())
    with pytest.raises(DomainError):
        sample_qn(np.zeros(3), 1.0, 1.0, 1, 1, rng)


def test_q_two_samplers_agree():
    rng = np.random.default_rng(9)
    target = KronCovariance(rs_build(4, 1.0, 0.4), 2).dense()
    a = sample_q(1.0, 0.4, 2, 2, rng, size=100_000).flat()
    b = sample_q_sqrt(1.0, 0.4, 2, 2, rng, size=100_000).flat()
    assert _cov_within(a, target) and _cov_within(b, target)
    # coordinatewise two-sample W1 against its own sampling noise
    ref = sample_q(1.0, 0.4, 2, 2, rng, size=100_000).flat()
    for j in range(a.shape[1]):
        assert w1_1d(a[:, j], b[:, j]) < 4 * max(w1_1d(a[:, j], ref[:, j]), 0.01)


def test_q_zero_overlap_is_iid():
    s = sample_q(2.0, 0.0, 1, 1, np.random.default_rng(10), size=50_000)
    assert _cov_within(s.flat(), 2.0 * np.eye(2))


def test_csv_roundtrip(tmp_path):
    s = sample_q(1.0, 0.3, 1, 3, np.random.default_rng(11), size=4)
    path = tmp_path / "s.csv"
    write_csv(path, s)
    lines = path.read_text().splitlines()
    assert lines[0] == "replica,coord_1,coord_2,coord_3"
    assert len(lines) == 1 + 8
    back = read_csv(path)
    np.testing.assert_array_equal(back.values, s.values)


def test_raw_roundtrip(tmp_path):
    s = sample_q(1.0, 0.3, 2, 2, np.random.default_rng(12), size=3)
    path = tmp_path / "s.bin"
    sidecar = write_raw(path, s, seed=42)
    meta = json.loads(sidecar.read_text())
    assert meta["shape"] == [3, 4, 2] and meta["seed"] == 42
    back, _ = read_raw(path)
    np.testing.assert_array_equal(back.values, s.values)


def test_sample_shape_validation():
    with pytest.raises(ValueError):
        ReplicatedProjectionSample(np.zeros((2, 3, 1)), "x")
