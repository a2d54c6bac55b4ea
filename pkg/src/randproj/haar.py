"""Haar-distributed orthogonal matrices, their low-order entry moments, and
the small random rotation used to build an infinitesimal exchangeable pair.

Indices in moment patterns are 1-based, matching the usual ``u_ij``
notation.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDraw, UnsupportedPattern
from .seeding import derive_seed, pmap, tree_sum

__all__ = [
    "sample_haar",
    "sample_haar_batch",
    "haar_moment_oracle",
    "minor_covariance_oracle",
    "rotate_random_plane",
    "drift_check",
    "DriftReport",
    "moment_suite",
    "MomentCheck",
]

_MAX_RETRIES = 3


def _sign_fix(Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    d = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    return Q * d[..., None, :]


def sample_haar(n: int, rng: np.random.Generator) -> np.ndarray:
    """One ``n x n`` orthogonal matrix from Haar measure.

    QR of an iid Gaussian matrix, with columns flipped so that ``R`` has a
    positive diagonal.  Without the flip the law depends on the LAPACK sign
    convention and is not Haar.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    for _ in range(_MAX_RETRIES):
        G = rng.standard_normal((n, n))
        Q, R = np.linalg.qr(G)
        if np.min(np.abs(np.diag(R))) > 1e-12 * max(1.0, np.abs(R).max()):
            return _sign_fix(Q, R)
    raise DegenerateDraw(f"Gaussian matrix rank-deficient in {_MAX_RETRIES} draws")


def sample_haar_batch(n: int, size: int, rng: np.random.Generator, cols: int | None = None) -> np.ndarray:
    """``size`` independent Haar matrices, shape ``(size, n, cols)``.

    With ``cols < n`` only the first ``cols`` columns are produced; these
    have exactly the law of the leading columns of a Haar matrix.
    Rank-deficient draws have probability zero and are not retried here.
    """
    cols = n if cols is None else cols
    G = rng.standard_normal((size, n, cols))
    Q, R = np.linalg.qr(G)
    return _sign_fix(Q, R)


def _parity_ok(pattern) -> bool:
    rows = Counter(i for i, _ in pattern)
    cols = Counter(j for _, j in pattern)
    return all(c % 2 == 0 for c in rows.values()) and all(c % 2 == 0 for c in cols.values())


def haar_moment_oracle(n: int, pattern) -> float:
    """Exact ``E[prod u_ij]`` over ``pattern`` (list of 1-based ``(i, j)``).

    Supported: single entries, pairs, and degree-4 products.  Any pattern
    with an odd count in some row or column has mean zero.
    """
    pattern = [(int(i), int(j)) for i, j in pattern]
    if len(pattern) not in (1, 2, 4):
        raise UnsupportedPattern(f"pattern length must be 1, 2 or 4, got {len(pattern)}")
    for i, j in pattern:
        if not (1 <= i <= n and 1 <= j <= n):
            raise IndexError(f"index ({i}, {j}) outside [1, {n}]")
    if not _parity_ok(pattern):
        return 0.0
    counts = Counter(pattern)
    if len(pattern) == 2:
        return 1.0 / n
    shape = sorted(counts.values())
    if shape == [4]:
        return 3.0 / (n * (n + 2))
    if shape == [2, 2]:
        (i1, j1), (i2, j2) = counts
        if i1 == i2 or j1 == j2:
            return 1.0 / (n * (n + 2))
        return (n + 1) / ((n - 1) * n * (n + 2))
    if shape == [1, 1, 1, 1]:
        rows = {i for i, _ in counts}
        cols = {j for _, j in counts}
        if len(rows) == 2 and len(cols) == 2:
            return -1.0 / ((n - 1) * n * (n + 2))
    raise UnsupportedPattern(f"unclassified degree-4 pattern {pattern}")


def minor_covariance_oracle(n: int, i: int, k: int, j: int, l: int, independent: bool = False) -> float:
    """``E[(u_i1 u_k2 - u_i2 u_k1)(u_j1 u_l2 - u_j2 u_l1)]`` for ``i != k``, ``j != l``.

    With ``independent=True`` the two minors come from independent Haar
    matrices and the expectation vanishes.
    """
    for idx in (i, k, j, l):
        if not 1 <= idx <= n:
            raise IndexError(f"index {idx} outside [1, {n}]")
    if i == k or j == l:
        raise ValueError("need i != k and j != l")
    if independent:
        return 0.0
    delta = float(i == j and k == l) - float(i == l and k == j)
    return 2.0 / (n * (n - 1)) * delta


def _plane_rotation(epsilon: float) -> np.ndarray:
    c = np.sqrt(1.0 - epsilon * epsilon)
    return np.array([[c, epsilon], [-epsilon, c]])


def rotate_random_plane(theta, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Return ``U A_eps U^T theta`` for a fresh Haar ``U``.

    ``A_eps`` rotates the first two coordinates clockwise by ``arcsin(eps)``
    and fixes the rest, so only the first two columns ``K`` of ``U`` enter:
    ``theta + K (A_2 - I) K^T theta``.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    theta = np.asarray(theta, dtype=float)
    K = sample_haar_batch(theta.shape[0], 1, rng, cols=2)[0]
    return theta + K @ ((_plane_rotation(epsilon) - np.eye(2)) @ (K.T @ theta))


@dataclass
class DriftReport:
    n: int
    epsilon: float
    n_samples: int
    theta: np.ndarray
    estimate: np.ndarray
    se: np.ndarray
    z: np.ndarray
    max_z: float
    radial_mean: float
    radial_se: float
    radial_z: float
    bias_flag: bool

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "n_samples": self.n_samples,
            "max_z": self.max_z,
            "radial_mean": self.radial_mean,
            "radial_se": self.radial_se,
            "radial_z": self.radial_z,
            "bias_flag": self.bias_flag,
        }


def drift_check(n: int, epsilon: float, n_samples: int, rng: np.random.Generator,
                theta=None, chunk: int = 50_000, bias_gate: float = 3.0) -> DriftReport:
    """Monte Carlo check that ``(n/eps^2) E[theta^eps - theta | theta] = -theta``.

    ``theta`` defaults to a draw from ``N(0, I/n)``.  Besides componentwise
    z-scores, the drift is projected on ``theta`` itself: the first-order
    rotation term is orthogonal to ``theta`` there, so that projection has
    small variance and exposes the ``(1 - sqrt(1 - eps^2))`` bias that
    appears once ``eps`` is not small (the estimate is then flagged).
    Keep ``eps <= 0.05`` for the componentwise comparison to be meaningful.
    """
    if theta is None:
        theta = rng.standard_normal(n) / np.sqrt(n)
    theta = np.asarray(theta, dtype=float)
    step = _plane_rotation(epsilon) - np.eye(2)
    scale = n / epsilon**2
    tn2 = float(theta @ theta)

    s1 = np.zeros(n)
    s2 = np.zeros(n)
    r1 = r2 = 0.0
    done = 0
    while done < n_samples:
        b = min(chunk, n_samples - done)
        K = sample_haar_batch(n, b, rng, cols=2)
        c = K.transpose(0, 2, 1) @ theta
        delta = scale * np.einsum("bij,bj->bi", K, c @ step.T)
        s1 += delta.sum(axis=0)
        s2 += (delta * delta).sum(axis=0)
        rad = delta @ theta / tn2
        r1 += rad.sum()
        r2 += (rad * rad).sum()
        done += b

    m = n_samples
    est = s1 / m
    var = np.maximum(s2 / m - est**2, 0.0) * m / (m - 1)
    se = np.sqrt(var / m)
    z = (est + theta) / se
    rmean = r1 / m
    rse = float(np.sqrt(max(r2 / m - rmean**2, 0.0) / (m - 1)))
    rz = (rmean + 1.0) / rse
    return DriftReport(
        n=n, epsilon=epsilon, n_samples=n_samples, theta=theta, estimate=est,
        se=se, z=z, max_z=float(np.max(np.abs(z))), radial_mean=float(rmean),
        radial_se=rse, radial_z=float(rz), bias_flag=bool(abs(rz) > bias_gate),
    )


# ---------------------------------------------------------------------------
# Monte Carlo moment suite


@dataclass
class MomentCheck:
    name: str
    n: int
    oracle: float
    mean: float
    se: float
    z: float
    draws: int
    meta: dict = field(default_factory=dict)


def _suite_stats(n: int):
    """(name, oracle, function of (U1, U2) -> per-draw values)."""
    def entry(i, j):
        return lambda U: U[:, i - 1, j - 1]

    def prod(pattern):
        def f(U):
            out = np.ones(U.shape[0])
            for i, j in pattern:
                out = out * U[:, i - 1, j - 1]
            return out
        return f

    def minor(U, a, b):
        return U[:, a - 1, 0] * U[:, b - 1, 1] - U[:, a - 1, 1] * U[:, b - 1, 0]

    stats = []
    patterns = {
        "E u11": [(1, 1)],
        "E u23": [(2, 3)],
        "E u11^2": [(1, 1), (1, 1)],
        "E u11 u12": [(1, 1), (1, 2)],
        "E u11^2 u12^2": [(1, 1), (1, 1), (1, 2), (1, 2)],
        "E u11^2 u21^2": [(1, 1), (1, 1), (2, 1), (2, 1)],
        "E u11^2 u22^2": [(1, 1), (1, 1), (2, 2), (2, 2)],
        "E u11 u12 u21 u22": [(1, 1), (1, 2), (2, 1), (2, 2)],
        "E u11^3 u21": [(1, 1), (1, 1), (1, 1), (2, 1)],
        "E u11 u12 u21 u33": [(1, 1), (1, 2), (2, 1), (3, 3)],
        "E u11^4": [(1, 1)] * 4,
    }
    for name, pat in patterns.items():
        f = prod(pat)
        stats.append((name, haar_moment_oracle(n, pat), lambda U1, U2, f=f: f(U1)))
    minors = [(1, 2, 1, 2), (1, 2, 2, 1), (1, 3, 1, 3), (1, 2, 1, 3)]
    if n >= 4:
        minors.append((1, 2, 3, 4))
    for (i, k, j, l) in minors:
        stats.append((
            f"minor({i},{k};{j},{l})",
            minor_covariance_oracle(n, i, k, j, l),
            lambda U1, U2, i=i, k=k, j=j, l=l: minor(U1, i, k) * minor(U1, j, l),
        ))
    stats.append((
        "independent minor(1,2;1,2)",
        minor_covariance_oracle(n, 1, 2, 1, 2, independent=True),
        lambda U1, U2: minor(U1, 1, 2) * minor(U2, 1, 2),
    ))
    # identical distribution of entries: moments of u11 - moments of u23 vanish
    for r in (1, 2, 3, 4):
        stats.append((
            f"E u11^{r} - E u23^{r}",
            0.0,
            lambda U1, U2, r=r: U1[:, 0, 0] ** r - U1[:, 1, 2] ** r,
        ))
    return stats


def moment_suite(n: int, n_draws: int, seed: int, threads: int = 1, chunk: int = 50_000) -> list[MomentCheck]:
    """Compare every closed-form moment against Monte Carlo over ``n_draws``.

    Draws are split in chunks seeded from ``seed``; each chunk pairs its
    matrices ``(U1, U2)`` so that the independent-matrix statistic uses
    ``n_draws`` disjoint pairs drawn alongside the primary sample.
    """
    stats = _suite_stats(n)
    sizes = [min(chunk, n_draws - s) for s in range(0, n_draws, chunk)]

    def work(item):
        idx, b = item
        rng = np.random.default_rng(derive_seed(seed, [("haar", n), ("chunk", idx)]))
        U = sample_haar_batch(n, 2 * b, rng)
        U1, U2 = U[:b], U[b:]
        vals = np.stack([f(U1, U2) for _, _, f in stats])
        return np.stack([vals.sum(axis=1), (vals * vals).sum(axis=1)])

    parts = pmap(work, list(enumerate(sizes)), threads)
    S = tree_sum(parts)
    m = n_draws
    mean = S[0] / m
    var = np.maximum(S[1] / m - mean**2, 0.0) * m / (m - 1)
    se = np.sqrt(var / m)
    out = []
    for (name, oracle, _), mu, s in zip(stats, mean, se):
        z = (mu - oracle) / s if s > 0 else (0.0 if mu == oracle else np.inf)
        out.append(MomentCheck(name, n, float(oracle), float(mu), float(s), float(z), m))
    return out
