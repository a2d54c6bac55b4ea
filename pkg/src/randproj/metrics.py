"""Distances between equal-size sample clouds.

* ``w1_1d``: exact Wasserstein-1 on the line via order statistics.
* ``w1_exact_kd``: exact Wasserstein-1 in R^k as a minimum-cost perfect
  matching under Euclidean cost (the optimal plan between two uniform
  empirical measures of equal size is a permutation).
* ``bl_sup``: largest mean difference over a finite catalog of bounded
  Lipschitz test functions; a lower bound on the bounded-Lipschitz
  distance.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import LengthMismatch, SizeLimit

__all__ = [
    "TestFunction",
    "TestCatalog",
    "build_catalog",
    "w1_1d",
    "w1_exact_kd",
    "bl_sup",
    "lipschitz_product_check",
    "DistanceReport",
    "MAX_ASSIGNMENT",
]

MAX_ASSIGNMENT = 2048


@dataclass(frozen=True)
class TestFunction:
    """A map ``R^k -> R`` with declared Lipschitz constant ``L`` and bound ``M``.

    ``fn`` takes an array of shape ``(n, k)`` and returns shape ``(n,)``.
    """

    __test__ = False  # not a pytest class

    fn: Callable[[np.ndarray], np.ndarray]
    L: float
    M: float
    ident: str
    k: int

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        return self.fn(x)

    def validate(self, rng: np.random.Generator, n_pairs: int = 10_000, scale: float = 3.0) -> float:
        """Check the declared constants on random pairs; return the worst quotient.

        Half the pairs are far apart, half are close (where derivatives
        dominate).  Raises ``AssertionError`` on a violation.
        """
        half = n_pairs // 2
        x = scale * rng.standard_normal((n_pairs, self.k))
        y = np.empty_like(x)
        y[:half] = scale * rng.standard_normal((half, self.k))
        y[half:] = x[half:] + 1e-3 * rng.standard_normal((n_pairs - half, self.k))
        gx, gy = self(x), self(y)
        bound = self.M * (1 + 1e-12)
        if np.max(np.abs(gx)) > bound or np.max(np.abs(gy)) > bound:
            raise AssertionError(f"{self.ident}: |g| exceeds M={self.M}")
        dist = np.linalg.norm(x - y, axis=1)
        ok = dist > 0
        quot = np.abs(gx - gy)[ok] / dist[ok]
        worst = float(quot.max(initial=0.0))
        if worst > self.L * (1 + 1e-9):
            raise AssertionError(f"{self.ident}: Lipschitz quotient {worst} exceeds L={self.L}")
        return worst


@dataclass(frozen=True)
class TestCatalog:
    __test__ = False

    functions: tuple
    seed: int
    L: float
    M: float
    k: int

    def __len__(self):
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def __getitem__(self, i):
        return self.functions[i]

    def head(self, n: int) -> "TestCatalog":
        return TestCatalog(self.functions[:n], self.seed, self.L, self.M, self.k)

    def evaluate(self, x) -> np.ndarray:
        """Shape ``(len(catalog), n)``."""
        x = np.asarray(x, dtype=float)
        return np.stack([g(x) for g in self.functions])

    def validate(self, rng: np.random.Generator, n_pairs: int = 10_000) -> None:
        for g in self.functions:
            g.validate(rng, n_pairs)


def _coordinate(j, L, M):
    return lambda x: np.clip(L * x[:, j], -M, M)


def _ridge(w, b, M):
    return lambda x: M * np.tanh(x @ w + b)


def _product(f1, f2, M):
    return lambda x: f1(x) * f2(x) / (2.0 * M)


def build_catalog(k: int, L: float = 1.0, M: float = 1.0, seed: int = 0,
                  n_ridge: int = 64, n_products: int = 16) -> TestCatalog:
    """Deterministic catalog of functions with ``Lip <= L`` and ``|g| <= M``.

    Order: ``k`` clamped coordinates ``clip(L x_j, -M, M)``, then ``n_ridge``
    ridges ``M tanh(w.x + b)`` with ``|w| <= L/M``, then ``n_products``
    products of two earlier members divided by ``2M`` (a product of two
    such functions has Lipschitz constant at most ``2LM`` and bound ``M^2``).
    """
    if L < 0 or M <= 0:
        raise ValueError("need L >= 0 and M > 0")
    rng = np.random.default_rng(seed)
    funcs = [TestFunction(_coordinate(j, L, M), L, M, f"coord[{j}]", k) for j in range(k)]
    for i in range(n_ridge):
        w = rng.standard_normal(k)
        w *= (L / M) * rng.uniform(0.5, 1.0) / np.linalg.norm(w)
        b = float(rng.uniform(-1.0, 1.0))
        funcs.append(TestFunction(_ridge(w, b, M), L, M, f"ridge[{i}]", k))
    base = list(funcs)
    for i in range(n_products):
        a, c = rng.choice(len(base), size=2, replace=False)
        f1, f2 = base[a], base[c]
        funcs.append(TestFunction(_product(f1.fn, f2.fn, M), L, M / 2.0,
                                  f"prod[{f1.ident}*{f2.ident}]", k))
    return TestCatalog(tuple(funcs), int(seed), float(L), float(M), int(k))


def _as_cloud(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def w1_1d(a, b) -> float:
    """Exact W1 between two empirical measures on the line with equal counts."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.shape != b.shape:
        raise LengthMismatch(f"sample counts differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise LengthMismatch("empty samples")
    return float(np.mean(np.abs(a - b)))


def w1_exact_kd(a, b) -> float:
    """Exact W1 in R^k by optimal assignment under Euclidean cost."""
    a, b = _as_cloud(a), _as_cloud(b)
    if a.shape != b.shape:
        raise LengthMismatch(f"cloud shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] > MAX_ASSIGNMENT:
        raise SizeLimit(f"n={a.shape[0]} exceeds the exact-assignment limit {MAX_ASSIGNMENT}")
    C = cdist(a, b)
    rows, cols = linear_sum_assignment(C)
    return float(C[rows, cols].sum() / a.shape[0])


def bl_sup(a, b, catalog) -> dict:
    """``max_g |mean_a g - mean_b g|`` over the catalog, with the maximizer."""
    a, b = _as_cloud(a), _as_cloud(b)
    funcs = list(catalog)
    diffs = np.array([abs(float(np.mean(g(a)) - np.mean(g(b)))) for g in funcs])
    i = int(np.argmax(diffs))
    return {"value": float(diffs[i]), "id": funcs[i].ident, "index": i, "all": diffs}


def lipschitz_product_check(g: TestFunction, r: int, trials: int, rng: np.random.Generator,
                            scale: float = 2.0) -> dict:
    """Check ``Lip(g(x_1) ... g(x_r)) <= r L M^(r-1)`` on random pairs in R^(kr)."""
    if r < 1:
        raise ValueError("r must be >= 1")
    k = g.k

    def F(z):
        out = np.ones(z.shape[0])
        for i in range(r):
            out = out * g(z[:, i * k:(i + 1) * k])
        return out

    half = trials // 2
    x = scale * rng.standard_normal((trials, k * r))
    y = np.empty_like(x)
    y[:half] = scale * rng.standard_normal((half, k * r))
    y[half:] = x[half:] + 1e-2 * rng.standard_normal((trials - half, k * r))
    dist = np.linalg.norm(x - y, axis=1)
    quot = np.abs(F(x) - F(y)) / dist
    bound = r * g.L * g.M ** (r - 1)
    worst = float(quot.max(initial=0.0))
    return {
        "r": r,
        "bound": float(bound),
        "max_quotient": worst,
        "trials": int(trials),
        "violations": int(np.sum(quot > bound * (1 + 1e-9))),
        "ok": bool(worst <= bound * (1 + 1e-9)),
    }


@dataclass
class DistanceReport:
    estimator: str
    n: int
    k: int
    value: float
    seed: int | None = None

    def to_json(self) -> str:
        return json.dumps({"estimator": self.estimator, "n": self.n, "k": self.k,
                           "value": self.value, "seed": self.seed})

    @classmethod
    def from_json(cls, text: str) -> "DistanceReport":
        return cls(**json.loads(text))
