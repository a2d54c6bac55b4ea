"""Random vectors in R^N with replica and disorder semantics.

A source is an immutable description of a law; drawing from it always
takes an explicit ``numpy.random.Generator``.  Rows returned by
``sample(rng, size)`` are independent replicas from that law.

The Sherrington-Kirkpatrick source is conditional on a fixed disorder
(an ``SkModel``); replicas are independent heat-bath chains on the same
couplings.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .errors import DomainError, MissingMean, NonConvergence

__all__ = [
    "VectorSource",
    "ProductSource",
    "GaussianSource",
    "SkModel",
    "SkSource",
    "subgaussian_product",
    "spiked_gaussian",
    "isotropic_gaussian",
    "point_mass",
    "sk_glauber",
    "glauber_chains",
    "sk_fixed_point",
    "gh_expectation",
    "write_disorder",
    "read_disorder",
]


class VectorSource:
    """Common interface; subclasses fill in ``sample``."""

    N: int
    rho: float | None = None
    q: float | None = None
    mean_is_exact: bool = True

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def mean_vector(self, rng: np.random.Generator | None = None) -> np.ndarray:
        raise MissingMean(f"{type(self).__name__} has no mean vector")

    def covariance_spectrum(self) -> np.ndarray | None:
        return None

    def describe(self) -> dict:
        return {"type": type(self).__name__, "N": self.N, "rho": self.rho, "q": self.q}


_BASES = {
    "gaussian": "gaussian",
    "rademacher": "rademacher",
    "rademacher-shifted": "rademacher",
    "uniform": "uniform",
    "uniform-shifted": "uniform",
}


@dataclass(frozen=True)
class ProductSource(VectorSource):
    """iid coordinates with mean ``sqrt(q)`` and variance ``rho - q``."""

    N: int
    rho: float
    q: float
    base: str = "gaussian"

    def __post_init__(self):
        if not 0 <= self.q < self.rho:
            raise DomainError(f"need 0 <= q < rho, got rho={self.rho}, q={self.q}")
        if self.base not in _BASES:
            raise ValueError(f"unknown base {self.base!r}; choose from {sorted(_BASES)}")

    def _standardized(self, rng, shape):
        kind = _BASES[self.base]
        if kind == "gaussian":
            return rng.standard_normal(shape)
        if kind == "rademacher":
            return rng.integers(0, 2, size=shape, dtype=np.int8).astype(float) * 2.0 - 1.0
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=shape)

    def sample(self, rng, size):
        w = self._standardized(rng, (size, self.N))
        return np.sqrt(self.q) + np.sqrt(self.rho - self.q) * w

    def mean_vector(self, rng=None):
        return np.full(self.N, np.sqrt(self.q))

    def covariance_spectrum(self):
        return np.full(self.N, self.rho - self.q)

    def describe(self):
        return {**super().describe(), "base": self.base}


@dataclass(frozen=True)
class GaussianSource(VectorSource):
    """Gaussian with diagonal covariance ``diag(spectrum)`` and mean ``mean``.

    ``rho`` and ``q`` are the exact finite-N values
    ``(sum(spectrum) + |mean|^2)/N`` and ``|mean|^2/N``.
    """

    spectrum: np.ndarray
    mean: np.ndarray
    N: int = field(init=False)
    rho: float = field(init=False)
    q: float = field(init=False)

    def __post_init__(self):
        spec = np.asarray(self.spectrum, dtype=float)
        mu = np.asarray(self.mean, dtype=float)
        if spec.ndim != 1 or mu.shape != spec.shape:
            raise ValueError("spectrum and mean must be vectors of equal length")
        if np.any(spec < 0):
            raise DomainError("spectrum entries must be nonnegative")
        n = spec.shape[0]
        object.__setattr__(self, "spectrum", spec)
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "N", n)
        object.__setattr__(self, "q", float(mu @ mu) / n)
        object.__setattr__(self, "rho", float(spec.sum() + mu @ mu) / n)

    def sample(self, rng, size):
        return self.mean + np.sqrt(self.spectrum) * rng.standard_normal((size, self.N))

    def mean_vector(self, rng=None):
        return self.mean.copy()

    def covariance_spectrum(self):
        return self.spectrum.copy()


def subgaussian_product(N: int, rho: float, q: float, base: str = "gaussian") -> ProductSource:
    return ProductSource(int(N), float(rho), float(q), base)


def spiked_gaussian(N: int, spectrum, mean=None) -> GaussianSource:
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.shape != (N,):
        raise ValueError(f"spectrum must have length {N}")
    mean = np.zeros(N) if mean is None else np.asarray(mean, dtype=float)
    return GaussianSource(spectrum, mean)


def isotropic_gaussian(N: int, variance: float = 1.0) -> GaussianSource:
    return GaussianSource(np.full(N, float(variance)), np.zeros(N))


def point_mass(mu) -> GaussianSource:
    mu = np.asarray(mu, dtype=float)
    return GaussianSource(np.zeros_like(mu), mu)


# ---------------------------------------------------------------------------
# Sherrington-Kirkpatrick


_MAGIC = b"SKDZ"


@dataclass(frozen=True, eq=False)
class SkModel:
    """One disorder sample of the SK model.

    ``-H(x) = beta/sqrt(N) sum_{i<j} g_ij x_i x_j + h sum_i x_i``; the
    couplings are stored as the symmetric zero-diagonal matrix with
    ``couplings[i, j] = g_ij`` for ``i < j``.
    """

    N: int
    beta: float
    h: float
    couplings: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if self.beta < 0:
            raise DomainError("beta must be >= 0")
        J = np.asarray(self.couplings, dtype=float)
        if J.shape != (self.N, self.N):
            raise ValueError("couplings must be N x N")
        J.setflags(write=False)
        object.__setattr__(self, "couplings", J)

    @classmethod
    def from_upper(cls, N, beta, h, upper, seed=None):
        upper = np.asarray(upper, dtype=float)
        if upper.shape != (N * (N - 1) // 2,):
            raise ValueError("wrong number of upper-triangular couplings")
        J = np.zeros((N, N))
        J[np.triu_indices(N, 1)] = upper
        return cls(N, float(beta), float(h), J + J.T, seed)

    @classmethod
    def from_seed(cls, N: int, beta: float, h: float, seed: int):
        """Draw the disorder from ``seed`` (row-major strict upper triangle)."""
        rng = np.random.default_rng(seed)
        return cls.from_upper(N, beta, h, rng.standard_normal(N * (N - 1) // 2), int(seed))

    def resample(self, seed: int) -> "SkModel":
        return SkModel.from_seed(self.N, self.beta, self.h, seed)

    def upper(self) -> np.ndarray:
        return self.couplings[np.triu_indices(self.N, 1)]

    def minus_hamiltonian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        quad = 0.5 * np.einsum("...i,ij,...j->...", x, self.couplings, x)
        return self.beta / np.sqrt(self.N) * quad + self.h * x.sum(axis=-1)


def write_disorder(path, model: SkModel) -> None:
    """Binary disorder file: ``SKDZ``, u32 N, u64 seed, then ``<f8`` couplings."""
    seed = 0 if model.seed is None else int(model.seed)
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<IQ", model.N, seed))
        fh.write(model.upper().astype("<f8").tobytes())


def read_disorder(path, beta: float, h: float) -> SkModel:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC or len(raw) < 16:
        raise ValueError(f"{path}: not a disorder file")
    N, seed = struct.unpack("<IQ", raw[4:16])
    upper = np.frombuffer(raw[16:], dtype="<f8")
    return SkModel.from_upper(N, beta, h, upper.astype(float), seed)


def glauber_chains(model: SkModel, n_chains: int, burnin: int, thin: int, n_keep: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Run ``n_chains`` independent heat-bath chains on one disorder.

    Each sweep updates sites ``0..N-1`` in order; site ``i`` is set to +1
    with probability ``(1 + tanh(f_i))/2`` where ``f_i`` is its local
    field.  Returns snapshots of shape ``(n_keep, n_chains, N)``, the first
    after ``burnin`` sweeps and then every ``thin`` sweeps.
    """
    N = model.N
    J = model.couplings
    scale = model.beta / np.sqrt(N)
    X = np.where(rng.random((N, n_chains)) < 0.5, 1.0, -1.0)
    out = np.empty((n_keep, n_chains, N))

    def sweep():
        U = rng.random((N, n_chains))
        for i in range(N):
            f = scale * (J[i] @ X) + model.h
            X[i] = np.where(U[i] < 0.5 * (1.0 + np.tanh(f)), 1.0, -1.0)

    for _ in range(burnin):
        sweep()
    for t in range(n_keep):
        if t:
            for _ in range(thin):
                sweep()
        out[t] = X.T
    return out


@dataclass(frozen=True, eq=False)
class SkSource(VectorSource):
    """Gibbs measure of one SK disorder, sampled by heat-bath chains.

    Mixing within ``burnin`` sweeps is assumed (high temperature), not
    checked.  ``mean_vector`` is a chain-average estimate.
    """

    model: SkModel
    burnin: int = 200
    thin: int = 10
    mean_samples: int = 10_000
    mean_chains: int = 64
    rho: float = 1.0
    q: float | None = None
    mean_is_exact: bool = False

    @property
    def N(self) -> int:
        return self.model.N

    def sample(self, rng, size, per_chain: int = 1):
        """``size`` configurations; ``per_chain > 1`` keeps several snapshots
        per chain, ``thin`` sweeps apart, ordered snapshot-major so that
        consecutive rows come from different chains."""
        chains = -(-size // per_chain)
        snaps = glauber_chains(self.model, chains, self.burnin, self.thin, per_chain, rng)
        return snaps.reshape(-1, self.N)[:size]

    def mean_vector(self, rng=None):
        if rng is None:
            raise MissingMean("SK mean vector must be estimated; pass a generator")
        keep = -(-self.mean_samples // self.mean_chains)
        snaps = glauber_chains(self.model, self.mean_chains, self.burnin, self.thin, keep, rng)
        return snaps.reshape(-1, self.N).mean(axis=0)

    def describe(self):
        return {**super().describe(), "beta": self.model.beta, "h": self.model.h,
                "disorder_seed": self.model.seed}


def sk_glauber(model: SkModel, burnin: int = 200, thin: int = 10, q: float | None = None) -> SkSource:
    if burnin < 1 or thin < 1:
        raise ValueError("burnin and thin must be >= 1")
    return SkSource(model, int(burnin), int(thin), q=q)


def gh_expectation(f, nodes: int = 64) -> float:
    """``E f(z)`` for standard normal ``z`` by Gauss-Hermite quadrature."""
    x, w = hermgauss(nodes)
    return float(np.sum(w * f(np.sqrt(2.0) * x)) / np.sqrt(np.pi))


def sk_fixed_point(beta: float, h: float, alpha: float = 0.5, nodes: int = 64,
                   tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Solve ``q = E tanh^2(beta sqrt(q) z + h)`` by damped iteration from 0."""
    if beta < 0:
        raise DomainError("beta must be >= 0")
    x, w = hermgauss(nodes)
    z = np.sqrt(2.0) * x
    w = w / np.sqrt(np.pi)
    q = 0.0
    for _ in range(max_iter):
        new = (1 - alpha) * q + alpha * float(w @ np.tanh(beta * np.sqrt(q) * z + h) ** 2)
        if abs(new - q) < tol:
            return new
        q = new
    raise NonConvergence(f"no fixed point within {max_iter} iterations (beta={beta}, h={h})")
