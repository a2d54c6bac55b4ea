"""Gaussian projection directions and samplers for the replicated laws.

For a source ``x`` in R^N and directions ``Theta`` (N x k, iid N(0, 1/N)):

* ``P_N``: the joint law of ``(Theta^T x^1, ..., Theta^T x^{2p})`` for 2p
  replicas sharing one ``Theta``;
* ``Q_N``: ``Theta^T <x> + sqrt(rho - q) xi^l`` with iid standard ``xi^l``;
* ``Q``: ``N(0, R^{2p}_{rho,q} (x) I_k)``, sampled as ``sqrt(q) z +
  sqrt(rho - q) xi^l`` with a shared ``z``.

Replicated samples are arrays of shape ``(2p, k)``, or ``(size, 2p, k)``
for batches.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError
from .rs_algebra import KronCovariance, rs_build, sigma_sqrt

__all__ = [
    "ReplicatedProjectionSample",
    "sample_directions",
    "project",
    "sample_pn",
    "sample_qn",
    "sample_q",
    "sample_q_sqrt",
    "write_csv",
    "read_csv",
    "write_raw",
    "read_raw",
]


def _check_rq(rho, q):
    if not 0 <= q < rho:
        raise DomainError(f"need 0 <= q < rho, got rho={rho}, q={q}")


@dataclass
class ReplicatedProjectionSample:
    """A batch of replicated projections, ``values.shape == (size, 2p, k)``."""

    values: np.ndarray
    law: str
    mean_is_exact: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[None]
        if v.ndim != 3 or v.shape[1] % 2:
            raise ValueError(f"expected shape (size, 2p, k), got {v.shape}")
        self.values = v

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1] // 2

    @property
    def k(self) -> int:
        return self.values.shape[2]

    def flat(self) -> np.ndarray:
        """Shape ``(size, 2pk)``, replica-major."""
        return self.values.reshape(self.size, -1)


def sample_directions(N: int, k: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """``N x k`` matrix with iid ``N(0, 1/N)`` entries (or a batch of them)."""
    if not 1 <= k < N:
        raise ValueError(f"need 1 <= k < N, got k={k}, N={N}")
    shape = (N, k) if size is None else (size, N, k)
    return rng.standard_normal(shape) / np.sqrt(N)


def project(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``Theta^T x``; ``x`` may be a single vector or rows of vectors."""
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != theta.shape[0]:
        raise ValueError(f"x has length {x.shape[-1]}, directions expect {theta.shape[0]}")
    return x @ theta


def sample_pn(source, p: int, k: int, rng: np.random.Generator, theta=None,
              size: int | None = None) -> ReplicatedProjectionSample:
    """Draws from ``P_N``.

    With ``theta=None`` every draw gets a fresh ``Theta``; passing a matrix
    fixes it (the quenched, conditional-on-``Theta`` law).
    """
    n = 1 if size is None else size
    N = source.N
    if theta is None:
        thetas = sample_directions(N, k, rng, size=n)
    else:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (N, k):
            raise ValueError(f"theta must be {N} x {k}")
        thetas = np.broadcast_to(theta, (n, N, k))
    x = source.sample(rng, n * 2 * p).reshape(n, 2 * p, N)
    values = np.einsum("srn,snk->srk", x, thetas)
    return ReplicatedProjectionSample(
        values, "P_N", meta={"theta_mode": "fresh" if theta is None else "fixed"}
    )


def sample_qn(mean_vec, rho: float, q: float, p: int, k: int, rng: np.random.Generator,
              size: int | None = None, mean_is_exact: bool = True) -> ReplicatedProjectionSample:
    """Draws from ``Q_N``: common shift ``Theta^T <x>`` plus independent noise."""
    _check_rq(rho, q)
    mean_vec = np.asarray(mean_vec, dtype=float)
    n = 1 if size is None else size
    thetas = sample_directions(mean_vec.shape[0], k, rng, size=n)
    shift = np.einsum("n,snk->sk", mean_vec, thetas)
    noise = rng.standard_normal((n, 2 * p, k))
    values = shift[:, None, :] + np.sqrt(rho - q) * noise
    return ReplicatedProjectionSample(values, "Q_N", mean_is_exact=mean_is_exact)


def sample_q(rho: float, q: float, p: int, k: int, rng: np.random.Generator,
             size: int | None = None) -> ReplicatedProjectionSample:
    """Draws from ``Q = N(0, R^{2p}_{rho,q} (x) I_k)`` via a shared ``z``."""
    _check_rq(rho, q)
    n = 1 if size is None else size
    z = rng.standard_normal((n, 1, k))
    xi = rng.standard_normal((n, 2 * p, k))
    return ReplicatedProjectionSample(np.sqrt(q) * z + np.sqrt(rho - q) * xi, "Q")


def sample_q_sqrt(rho: float, q: float, p: int, k: int, rng: np.random.Generator,
                  size: int | None = None) -> ReplicatedProjectionSample:
    """Same law as ``sample_q``, built as ``Sigma^{1/2} g`` with ``g`` standard."""
    _check_rq(rho, q)
    n = 1 if size is None else size
    A = sigma_sqrt(KronCovariance(rs_build(2 * p, rho, q), k))
    g = rng.standard_normal((n, 2 * p * k))
    return ReplicatedProjectionSample((g @ A).reshape(n, 2 * p, k), "Q")


# ---------------------------------------------------------------------------
# persistence


def write_csv(path, sample: ReplicatedProjectionSample) -> None:
    """One row per (draw, replica): ``replica,coord_1..coord_k``.

    Replica indices are 1-based and restart for each draw.  Values are
    printed with 17 significant digits.
    """
    k = sample.k
    lines = [",".join(["replica"] + [f"coord_{j + 1}" for j in range(k)])]
    for draw in sample.values:
        for r, row in enumerate(draw, start=1):
            lines.append(",".join([str(r)] + [f"{v:.17g}" for v in row]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> ReplicatedProjectionSample:
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    rep = raw[:, 0].astype(int)
    twop = int(rep.max())
    return ReplicatedProjectionSample(raw[:, 1:].reshape(-1, twop, raw.shape[1] - 1), "csv")


def write_raw(path, sample: ReplicatedProjectionSample, seed: int | None = None) -> Path:
    """Little-endian doubles plus a ``.json`` sidecar with shape and seed."""
    path = Path(path)
    path.write_bytes(np.ascontiguousarray(sample.values, dtype="<f8").tobytes())
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps({
        "shape": list(sample.values.shape),
        "dtype": "<f8",
        "order": "C",
        "law": sample.law,
        "seed": seed,
    }, indent=2))
    return sidecar


def read_raw(path) -> tuple[ReplicatedProjectionSample, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    values = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(meta["shape"])
    return ReplicatedProjectionSample(values.astype(float), meta["law"]), meta
