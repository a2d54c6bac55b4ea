"""Independent oracles and the algebra/metrics self-test suites.

The oracles here deliberately take a different route from the code they
check: transport costs by linear programming, the SK fixed point by
bisection with adaptive quadrature, matrix functions by dense
eigendecomposition.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, optimize

from .metrics import (TestFunction, build_catalog, lipschitz_product_check, w1_1d,
                      w1_exact_kd)
from .rs_algebra import (KronCovariance, rs_build, rs_eigvals, rs_inverse,
                         sigma_inv_sqrt_opnorm)
from .seeding import make_rng

__all__ = [
    "Check",
    "lp_transport_oracle",
    "fixed_point_bisection",
    "dense_inv_sqrt_opnorm",
    "algebra_selftest",
    "metrics_selftest",
]


@dataclass
class Check:
    name: str
    value: float
    gate: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def lp_transport_oracle(a, b) -> float:
    """W1 between equal-size empirical measures via the transport LP."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    n = a.shape[0]
    C = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    A_eq = np.zeros((2 * n, n * n))
    for i in range(n):
        A_eq[i, i * n:(i + 1) * n] = 1.0
        A_eq[n + i, i::n] = 1.0
    res = optimize.linprog(C.ravel(), A_eq=A_eq, b_eq=np.full(2 * n, 1.0 / n),
                           bounds=(0, None), method="highs-ds")
    if not res.success:
        raise RuntimeError(res.message)
    return float(res.fun)


def fixed_point_bisection(beta: float, h: float, tol: float = 1e-14) -> float:
    """Root of ``E tanh^2(beta sqrt(q) z + h) - q`` on ``[0, 1]``.

    The Gaussian expectation uses adaptive quadrature.  At ``h = 0`` the
    root ``q = 0`` is returned directly, since bisection would land on a
    nonzero root whenever one exists.
    """
    if h == 0:
        return 0.0

    def f(q):
        def integrand(z):
            return np.tanh(beta * np.sqrt(q) * z + h) ** 2 * np.exp(-z * z / 2) / np.sqrt(2 * np.pi)
        val, _ = integrate.quad(integrand, -40.0, 40.0, epsabs=1e-14, epsrel=1e-12, limit=400)
        return val - q

    return float(optimize.bisect(f, 0.0, 1.0, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200))


def dense_inv_sqrt_opnorm(rho: float, q: float, p: int, k: int) -> float:
    S = KronCovariance(rs_build(2 * p, rho, q), k).dense()
    w, V = np.linalg.eigh(S)
    inv_sqrt = (V / np.sqrt(w)) @ V.T
    return float(np.linalg.norm(inv_sqrt, 2))


def _random_pd(rng):
    m = int(rng.integers(1, 17))
    rho = float(rng.uniform(0.2, 5.0))
    lo = -rho / max(m - 1, 1) * 0.9 if m > 1 else -rho
    q = float(rng.uniform(lo, 0.95 * rho))
    return rs_build(m, rho, q)


def algebra_selftest(seed: int, instances: int = 200) -> list[Check]:
    rng = make_rng(seed, ["algebra"])
    worst_inv = worst_eig = 0.0
    for _ in range(instances):
        R = _random_pd(rng)
        D = R.dense()
        worst_inv = max(worst_inv, float(np.abs(rs_inverse(R).dense() @ D - np.eye(R.m)).max()))
        ev = rs_eigvals(R)
        analytic = np.sort([ev["top"][0]] + [ev["rest"][0]] * ev["rest"][1])
        worst_eig = max(worst_eig, float(np.abs(analytic - np.linalg.eigvalsh(D)).max()))
    worst_op = 0.0
    for _ in range(20):
        rho = float(rng.uniform(0.5, 3.0))
        q = float(rng.uniform(0.0, 0.95 * rho))
        for p in (1, 2, 3):
            for k in (1, 2, 3):
                worst_op = max(worst_op, abs(sigma_inv_sqrt_opnorm(rho, q)
                                             - dense_inv_sqrt_opnorm(rho, q, p, k)))
    return [
        Check("rs_inverse * R = I", worst_inv, "<= 1e-12", worst_inv <= 1e-12,
              {"instances": instances}),
        Check("rs_eigvals vs eigvalsh", worst_eig, "<= 1e-12", worst_eig <= 1e-12,
              {"instances": instances}),
        Check("opnorm of Sigma^-1/2", worst_op, "<= 1e-10", worst_op <= 1e-10,
              {"p": [1, 2, 3], "k": [1, 2, 3]}),
    ]


def metrics_selftest(seed: int) -> list[Check]:
    checks = []

    rng = make_rng(seed, ["w1_lp"])
    worst = 0.0
    for _ in range(50):
        a, b = rng.standard_normal(6), rng.standard_normal(6) * 2 + 0.3
        worst = max(worst, abs(w1_1d(a, b) - lp_transport_oracle(a, b)))
    checks.append(Check("w1_1d vs LP oracle (50 x n=6)", worst, "<= 1e-12", worst <= 1e-12))

    rng = make_rng(seed, ["translation"])
    worst = 0.0
    for _ in range(20):
        k = int(rng.integers(1, 5))
        a = rng.standard_normal((64, k))
        v = rng.standard_normal(k)
        worst = max(worst, abs(w1_exact_kd(a, a + v) - np.linalg.norm(v)))
    checks.append(Check("w1_exact_kd translation", worst, "<= 1e-10", worst <= 1e-10))

    rng = make_rng(seed, ["marginal"])
    worst = -np.inf
    for _ in range(100):
        n, k = int(rng.integers(4, 40)), int(rng.integers(2, 5))
        a = rng.standard_normal((n, k))
        b = rng.standard_normal((n, k)) * rng.uniform(0.5, 2.0) + rng.uniform(-1, 1)
        full = w1_exact_kd(a, b)
        size = int(rng.integers(1, k))
        idx = np.sort(rng.choice(k, size=size, replace=False))
        worst = max(worst, w1_exact_kd(a[:, idx], b[:, idx]) - full)
    checks.append(Check("marginal monotonicity (100 clouds)", float(worst), "<= 1e-10",
                        worst <= 1e-10))

    rng = make_rng(seed, ["lipschitz"])
    clamp = TestFunction(lambda x: np.clip(x[:, 0], -1.0, 1.0), 1.0, 1.0, "clamp", 1)
    members = [clamp] + list(build_catalog(2, 1.0, 1.0, seed=seed).head(16))
    violations = 0
    ratio = 0.0
    for g in members:
        for r in (1, 2, 3, 4):
            rep = lipschitz_product_check(g, r, 10_000, rng)
            violations += rep["violations"]
            ratio = max(ratio, rep["max_quotient"] / rep["bound"])
    checks.append(Check("Lipschitz product bound r <= 4", float(violations), "== 0",
                        violations == 0, {"max_quotient_over_bound": ratio}))
    return checks
