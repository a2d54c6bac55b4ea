import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randproj.errors import UnsupportedPattern
from randproj.haar import (drift_check, haar_moment_oracle, minor_covariance_oracle, moment_suite,
                           rotate_random_plane, sample_haar, sample_haar_batch)


def test_sample_is_orthogonal():
    rng = np.random.default_rng(1)
    for n in (2, 4, 9):
        U = sample_haar(n, rng)
        np.testing.assert_allclose(U.T @ U, np.eye(n), atol=1e-10)
        assert abs(abs(np.linalg.det(U)) - 1) < 1e-8


def test_batch_shapes_and_orthonormal_columns():
    rng = np.random.default_rng(2)
    K = sample_haar_batch(7, 5, rng, cols=2)
    assert K.shape == (5, 7, 2)
    np.testing.assert_allclose(K.transpose(0, 2, 1) @ K, np.broadcast_to(np.eye(2), (5, 2, 2)), atol=1e-12)


def test_sign_correction_matters():
    # Without the sign fix LAPACK makes R's diagonal negative-biased and
    # E u11 drifts away from 0; with it the mean is 0.
    rng = np.random.default_rng(3)
    U = sample_haar_batch(6, 100_000, rng)
    u = U[:, 0, 0]
    assert abs(u.mean()) < 4 * u.std() / np.sqrt(u.size)
    assert abs((u**2).mean() - 1 / 6) < 4 * (u**2).std() / np.sqrt(u.size)
    G = np.random.default_rng(3).standard_normal((100_000, 6, 6))
    Q, _ = np.linalg.qr(G)
    raw = Q[:, 0, 0]
    assert abs(raw.mean()) > 10 * raw.std() / np.sqrt(raw.size)


def test_oracle_closed_form_values():
    assert haar_moment_oracle(4, [(1, 1), (1, 1)]) == 0.25
    assert haar_moment_oracle(4, [(1, 1), (1, 1), (1, 2), (1, 2)]) == pytest.approx(1 / 24)
    assert haar_moment_oracle(4, [(1, 1), (1, 2), (2, 1), (2, 2)]) == pytest.approx(-1 / 72)
    assert haar_moment_oracle(4, [(1, 1), (1, 1), (1, 1), (2, 1)]) == 0.0
    assert haar_moment_oracle(4, [(1, 1), (1, 1), (2, 2), (2, 2)]) == pytest.approx(5 / 72)
    assert haar_moment_oracle(5, [(2, 3)]) == 0.0


def test_oracle_unsupported():
    with pytest.raises(UnsupportedPattern):
        haar_moment_oracle(4, [(1, 1)] * 3)
    with pytest.raises(UnsupportedPattern):
        haar_moment_oracle(4, [(1, 1)] * 6)


def test_oracle_index_range():
    with pytest.raises(IndexError):
        haar_moment_oracle(3, [(1, 4), (1, 4)])


def test_minor_oracle():
    assert minor_covariance_oracle(5, 1, 2, 1, 2) == pytest.approx(0.1)
    assert minor_covariance_oracle(5, 1, 2, 2, 1) == pytest.approx(-0.1)
    assert minor_covariance_oracle(5, 1, 2, 3, 4) == 0.0
    assert minor_covariance_oracle(5, 1, 2, 1, 2, independent=True) == 0.0
    with pytest.raises(IndexError):
        minor_covariance_oracle(5, 1, 6, 1, 2)


def test_row_sum_identity():
    # sum_j u_1j^2 = 1 forces n E u11^2 = 1 and
    # E u11^4 + (n-1) E u11^2 u12^2 = E u11^2
    for n in (3, 4, 10):
        a = haar_moment_oracle(n, [(1, 1)] * 4)
        b = haar_moment_oracle(n, [(1, 1), (1, 1), (1, 2), (1, 2)])
        assert a + (n - 1) * b == pytest.approx(1 / n, rel=1e-14)
        # orthogonality of rows 1, 2: sum_j u_1j u_2j = 0, squared and averaged
        c = haar_moment_oracle(n, [(1, 1), (1, 1), (2, 1), (2, 1)])
        d = haar_moment_oracle(n, [(1, 1), (1, 2), (2, 1), (2, 2)])
        assert n * c + n * (n - 1) * d == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.floats(1e-3, 0.99), st.integers(0, 2**32))
def test_rotation_preserves_norm(n, eps, seed):
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal(n)
    out = rotate_random_plane(theta, eps, rng)
    assert abs(np.linalg.norm(out) - np.linalg.norm(theta)) <= 1e-10 * max(1, np.linalg.norm(theta))


def test_rotation_small_epsilon_limit():
    rng = np.random.default_rng(4)
    theta = rng.standard_normal(12)
    out = rotate_random_plane(theta, 1e-8, rng)
    assert np.linalg.norm(out - theta) <= 1e-6 * np.linalg.norm(theta)


def test_rotation_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        rotate_random_plane(np.ones(3), 0.0, np.random.default_rng(0))


def test_drift_n50():
    rep = drift_check(50, 0.05, 100_000, np.random.default_rng(5))
    assert rep.max_z <= 5


def test_drift_small_example_and_determinism():
    a = drift_check(20, 0.02, 50_000, np.random.default_rng(6))
    b = drift_check(20, 0.02, 50_000, np.random.default_rng(6))
    assert a.to_dict() == b.to_dict()
    assert a.max_z <= 5 and not a.bias_flag


def test_drift_flags_large_epsilon():
    rep = drift_check(20, 0.5, 200_000, np.random.default_rng(7))
    # exact radial drift factor is 2 (1 - sqrt(1 - eps^2)) / eps^2
    assert rep.radial_mean == pytest.approx(-2 * (1 - np.sqrt(0.75)) / 0.25, rel=5e-3)
    assert rep.bias_flag


def test_moment_suite_small():
    res = moment_suite(4, 100_000, seed=11)
    assert max(abs(m.z) for m in res) <= 4.5
    names = {m.name for m in res}
    assert "independent minor(1,2;1,2)" in names and "E u11^4 - E u23^4" in names


def test_moment_suite_thread_invariance():
    a = moment_suite(5, 60_000, seed=3, threads=1, chunk=20_000)
    b = moment_suite(5, 60_000, seed=3, threads=4, chunk=20_000)
    assert [(m.mean, m.se) for m in a] == [(m.mean, m.se) for m in b]
