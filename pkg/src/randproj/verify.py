"""Executable versions of the quantitative claims.

The central piece is an unbiased estimator of

    E_Theta [ ( <g(Theta^T x)> - E_xi g(c + sqrt(rho - q) xi) )^{2p} ]

for a reference centre ``c`` (``Theta^T <x>`` for the partial variant,
``sqrt(q) z`` for the full one).  Expanding the power binomially turns it
into a signed sum of products of ``r`` replica averages and ``2p - r``
reference averages; each product of ``r`` copies of a mean is estimated
without bias by the U-statistic ``e_r(v_1..v_m) / C(m, r)`` over ``m``
inner replicas, ``e_r`` being the elementary symmetric polynomial.
Subtracting ``g(c)`` from both sides first leaves the estimand unchanged
and keeps the cancellation in the signed sum small.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np

from .errors import DomainError, MissingMean
from .metrics import TestCatalog, TestFunction
from .projection import sample_directions
from .seeding import derive_seed, pmap, tree_sum

__all__ = [
    "ConcentrationReport",
    "TheoremLhsEstimate",
    "ScalingResult",
    "concentration_report",
    "rates",
    "overlap_covariance_bound",
    "lemma_pn_q_bound",
    "lemma_pn_qn_bound",
    "binomial_identity_holds",
    "elementary_symmetric",
    "lhs_moment_partial",
    "lhs_moment_full",
    "lhs_moment_catalog",
    "scaling_check",
    "converse_cosh",
    "converse_laplace",
    "converse_cosh_gaussian_oracle",
    "converse_laplace_gaussian_oracle",
]


# ---------------------------------------------------------------------------
# concentration diagnostics


def rates(c1: float, c2: float, N: int, rho: float, q: float) -> dict:
    """``d1(c1)`` and ``d2(c2)``, with ``d(y) = sqrt(3 N^2 y + 4 N a sqrt(y) + 2 N a^2)``
    and ``a = rho`` resp. ``a = q``."""
    if c1 < 0 or c2 < 0:
        raise DomainError("concentration arguments must be nonnegative")

    def d(y, a):
        return float(np.sqrt(3 * N * N * y + 4 * N * a * np.sqrt(y) + 2 * N * a * a))

    return {"d1": d(c1, rho), "d2": d(c2, q)}


def overlap_covariance_bound(spectrum, q_N: float) -> float:
    """``|lambda|^2 / N^2 + (2/N) max(lambda) q_N``: bound on the overlap variance."""
    lam = np.asarray(spectrum, dtype=float)
    N = lam.shape[0]
    return float(lam @ lam / N**2 + 2.0 / N * lam.max() * q_N)


def lemma_pn_q_bound(p: int, k: int, N: int, rho: float, q: float, c1: float, c2: float) -> float:
    """Upper bound on ``W1(P_N, Q)``: ``32 p^2 k / sqrt(rho-q) / (N-1) (d1 + d2)``."""
    r = rates(c1, c2, N, rho, q)
    return 32.0 * p * p * k / np.sqrt(rho - q) / (N - 1) * (r["d1"] + r["d2"])


def lemma_pn_qn_bound(p: int, k: int, N: int, rho: float, q: float, c1: float, c2: float) -> float:
    """Upper bound on ``W1(P_N, Q_N)``; the ``q = 0`` branch uses ``N c2^(1/4)``."""
    r = rates(c1, c2, N, rho, q)
    tail = (1 + np.sqrt(q)) / np.sqrt(q) * r["d2"] if q > 0 else N * c2**0.25
    return 34.0 * p * p * k / np.sqrt(rho - q) / (N - 1) * (r["d1"] + tail)


@dataclass
class ConcentrationReport:
    N: int
    rho_hat: float
    q_hat: float
    c1_hat: float
    c2_hat: float
    d1: float
    d2: float
    n_pairs: int
    rho_se: float
    q_se: float
    c1_se: float
    c2_se: float
    rho_target: float
    q_target: float
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _jk_mean_sq(v: np.ndarray, target):
    """Mean of ``(v - t)^2`` and its jackknife SE.

    With ``target=None`` the centre is the sample mean, recomputed in
    every leave-one-out replicate.
    """
    n = v.shape[0]
    if target is not None:
        d2 = (v - target) ** 2
        return float(d2.mean()), float(d2.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    s1, s2 = v.sum(), (v * v).sum()
    full = s2 / n - (s1 / n) ** 2
    loo_mean = (s1 - v) / (n - 1)
    loo = (s2 - v * v) / (n - 1) - loo_mean**2
    se = np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return float(max(full, 0.0)), float(se)


def concentration_report(source, n_pairs: int, rng: np.random.Generator,
                         rho_target: float | None = None,
                         q_target: float | None = None) -> ConcentrationReport:
    """Thin-shell and overlap moments from ``n_pairs`` independent replica pairs.

    ``c1_hat`` averages over both members of each pair.  When a target is
    absent the empirical mean stands in for it.
    """
    if n_pairs < 2:
        raise ValueError("n_pairs must be >= 2")
    N = source.N
    x = source.sample(rng, 2 * n_pairs)
    x1, x2 = x[0::2], x[1::2]
    norms = np.einsum("ij,ij->i", x, x) / N
    ov = np.einsum("ij,ij->i", x1, x2) / N
    rho_hat, q_hat = float(norms.mean()), float(ov.mean())
    rho_se = float(norms.std(ddof=1) / np.sqrt(norms.size))
    q_se = float(ov.std(ddof=1) / np.sqrt(ov.size))
    c1, c1_se = _jk_mean_sq(norms, rho_target)
    c2, c2_se = _jk_mean_sq(ov, q_target)
    rho_t = rho_hat if rho_target is None else float(rho_target)
    q_t = q_hat if q_target is None else float(q_target)
    r = rates(c1, c2, N, rho_t, max(q_t, 0.0))
    return ConcentrationReport(
        N=N, rho_hat=rho_hat, q_hat=q_hat, c1_hat=c1, c2_hat=c2, d1=r["d1"], d2=r["d2"],
        n_pairs=n_pairs, rho_se=rho_se, q_se=q_se, c1_se=c1_se, c2_se=c2_se,
        rho_target=rho_t, q_target=q_t,
    )


# ---------------------------------------------------------------------------
# replica-expansion estimator


def binomial_identity_holds(n: int) -> bool:
    """``sum_{r=1}^{n} (-1)^(r+1) C(n, r) == C(n, 0)``, i.e. ``(1 - 1)^n = 0``."""
    return sum((-1) ** (r + 1) * comb(n, r) for r in range(1, n + 1)) == comb(n, 0)


def elementary_symmetric(values: np.ndarray, r: int) -> np.ndarray:
    """``e_0..e_r`` of ``values`` along axis 0 (shape ``(r + 1, ...)``).

    Computed from power sums by Newton's identities; for the small ``r``
    used here and centred inputs the cancellation is harmless.
    """
    v = np.asarray(values, dtype=float)
    power = [None] + [np.sum(v**i, axis=0) for i in range(1, r + 1)]
    e = [np.ones(v.shape[1:])]
    for n in range(1, r + 1):
        acc = np.zeros(v.shape[1:])
        for i in range(1, n + 1):
            acc = acc + (-1) ** (i - 1) * e[n - i] * power[i]
        e.append(acc / n)
    return np.stack(e)


def _u_powers(values: np.ndarray, r: int) -> np.ndarray:
    """Unbiased estimates of ``mean^j``, ``j = 0..r``, from iid ``values``."""
    m = values.shape[0]
    if m < r:
        raise ValueError(f"need at least {r} inner replicas, got {m}")
    e = elementary_symmetric(values, r)
    return np.stack([e[j] / comb(m, j) for j in range(r + 1)])


def _binomial_weights(p: int) -> np.ndarray:
    n = 2 * p
    for size in {2, 4, 6, 8, n}:
        if not binomial_identity_holds(size):
            raise AssertionError(f"binomial identity failed for n={size}")
    return np.array([comb(n, r) * (-1) ** (n - r) for r in range(n + 1)], dtype=float)


@dataclass
class TheoremLhsEstimate:
    variant: str
    p: int
    k: int
    g_id: str
    value: float
    se: float
    outer_draws: int
    inner: int
    N: int
    z_mode: str | None = None
    mean_is_exact: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def _functions(g):
    if isinstance(g, TestFunction):
        return [g]
    if isinstance(g, TestCatalog):
        return list(g)
    return list(g)


def _lhs_outer_values(source, funcs, p, k, outer_draws, rng, inner, variant, z_mode,
                      rho, q, threads, mean_vec):
    """Per-outer-draw unbiased estimates, shape ``(outer_draws, len(funcs))``."""
    N = source.N
    weights = _binomial_weights(p)
    sd = np.sqrt(rho - q)
    norm_mu = None if mean_vec is None else float(mean_vec @ mean_vec) / N
    master = int(rng.integers(0, 2**63))

    def gvals(y):
        return np.stack([f(y) for f in funcs])

    def one(t):
        r = np.random.default_rng(derive_seed(master, [("outer", t)]))
        theta = sample_directions(N, k, r)
        y = source.sample(r, inner) @ theta
        xi = r.standard_normal((inner, k))
        if variant == "partial":
            centre = mean_vec @ theta
        elif z_mode == "independent" or norm_mu is None or norm_mu == 0.0:
            centre = np.sqrt(q) * r.standard_normal(k)
        else:
            # z = Theta^T <x> / sqrt(|<x>|^2/N) is exactly standard normal
            centre = np.sqrt(q) * (mean_vec @ theta) / np.sqrt(norm_mu)
        c0 = gvals(centre[None, :])[:, 0]
        a = gvals(y).T - c0
        b = gvals(centre + sd * xi).T - c0
        A = _u_powers(a, 2 * p)
        B = _u_powers(b, 2 * p)
        return np.einsum("r,rg,rg->g", weights, A, B[::-1])

    return np.stack(pmap(one, range(outer_draws), threads))


def lhs_moment_catalog(source, g, p: int, k: int, outer_draws: int, rng: np.random.Generator,
                       inner: int = 4096, variant: str = "full", z_mode: str = "coupled",
                       rho: float | None = None, q: float | None = None,
                       threads: int = 1) -> list[TheoremLhsEstimate]:
    """Estimate the ``2p``-th moment for every function in ``g``.

    ``variant="partial"`` centres the reference at ``Theta^T <x>``;
    ``variant="full"`` centres it at ``sqrt(q) z``.  With
    ``z_mode="coupled"`` (default) ``z`` is the normalised projection of
    the mean, which is standard Gaussian and is the only coupling under
    which the full-variant moment can vanish as ``N`` grows; with
    ``z_mode="independent"`` ``z`` is drawn afresh, and the moment then
    tends to ``2 Var_z(E_xi g(sqrt(q) z + sqrt(rho - q) xi))`` rather than 0.
    """
    if variant not in ("partial", "full"):
        raise ValueError("variant must be 'partial' or 'full'")
    if z_mode not in ("coupled", "independent"):
        raise ValueError("z_mode must be 'coupled' or 'independent'")
    rho = source.rho if rho is None else float(rho)
    q = source.q if q is None else float(q)
    if rho is None or q is None:
        raise DomainError("rho and q must be declared")
    if not 0 <= q < rho:
        raise DomainError(f"need 0 <= q < rho, got rho={rho}, q={q}")
    if outer_draws < 2:
        raise ValueError("outer_draws must be >= 2")
    mean_vec = None
    needs_mean = variant == "partial" or z_mode == "coupled"
    if needs_mean:
        try:
            mean_vec = np.asarray(source.mean_vector(rng), dtype=float)
        except MissingMean:
            if variant == "partial":
                raise
    funcs = _functions(g)
    vals = _lhs_outer_values(source, funcs, p, k, outer_draws, rng, inner, variant,
                             z_mode, rho, q, threads, mean_vec)
    mean = tree_sum(list(vals)) / outer_draws
    se = vals.std(axis=0, ddof=1) / np.sqrt(outer_draws)
    exact = getattr(source, "mean_is_exact", True)
    return [
        TheoremLhsEstimate(variant, p, k, f.ident, float(mu), float(s), outer_draws, inner,
                           source.N, z_mode if variant == "full" else None, exact)
        for f, mu, s in zip(funcs, mean, se)
    ]


def lhs_moment_partial(source, g: TestFunction, p: int, k: int, outer_draws: int,
                       rng: np.random.Generator, inner: int = 4096, **kw) -> TheoremLhsEstimate:
    """Replica-expansion estimate of the moment centred at ``Theta^T <x>``."""
    return lhs_moment_catalog(source, g, p, k, outer_draws, rng, inner, "partial", **kw)[0]


def lhs_moment_full(source, g: TestFunction, p: int, k: int, outer_draws: int,
                    rng: np.random.Generator, inner: int = 4096, z_mode: str = "coupled",
                    **kw) -> TheoremLhsEstimate:
    """Replica-expansion estimate of the moment centred at ``sqrt(q) z``."""
    return lhs_moment_catalog(source, g, p, k, outer_draws, rng, inner, "full", z_mode, **kw)[0]


@dataclass
class ScalingResult:
    slope: float
    N: list
    estimates: list
    ses: list
    g_ids: list
    monotone: bool
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def fit_slope(N_list, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(N)``; NaN if any value <= 0."""
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(N_list, dtype=float)), np.log(v), 1)[0])


def monotone_within(values, ses, slack: float = 2.0) -> bool:
    """Each value is at most the previous one plus ``slack`` combined SEs."""
    v, s = np.asarray(values), np.asarray(ses)
    return bool(all(v[i + 1] <= v[i] + slack * np.hypot(s[i], s[i + 1]) for i in range(len(v) - 1)))


def scaling_check(family, N_list, g, p: int, k: int, outer_draws: int, rng: np.random.Generator,
                  inner: int = 4096, variant: str = "full", threads: int = 1,
                  seed: int | None = None) -> ScalingResult:
    """Decay order of the moment estimate in ``N``.

    ``family`` maps ``N`` to a source.  With a catalog, the per-``N``
    estimate is the largest catalog value (a surrogate for the sup over
    the bounded-Lipschitz ball) and its SE is that of the maximiser.
    """
    N_list = list(N_list)
    if len(N_list) < 3 or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list needs at least 3 increasing entries")
    t0 = time.perf_counter()
    master = int(rng.integers(0, 2**63)) if seed is None else int(seed)
    est, ses, ids = [], [], []
    for i, N in enumerate(N_list):
        r = np.random.default_rng(derive_seed(master, [("N", N)]))
        res = lhs_moment_catalog(family(N), g, p, k, outer_draws, r, inner, variant,
                                 threads=threads)
        best = max(res, key=lambda e: e.value)
        est.append(best.value)
        ses.append(best.se)
        ids.append(best.g_id)
    return ScalingResult(fit_slope(N_list, est), N_list, est, ses, ids,
                         monotone_within(est, ses), time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# converse identities


def converse_cosh(source, q_target: float, n_pairs: int, rng: np.random.Generator) -> dict:
    """``2 E[exp(-|x1|^2/N - |x2|^2/N) (cosh(2 x1.x2/N - 2q) - 1)]`` over replica pairs."""
    if n_pairs < 2:
        raise ValueError("n_pairs must be >= 2")
    N = source.N
    x = source.sample(rng, 2 * n_pairs)
    x1, x2 = x[0::2], x[1::2]
    n1 = np.einsum("ij,ij->i", x1, x1) / N
    n2 = np.einsum("ij,ij->i", x2, x2) / N
    ov = np.einsum("ij,ij->i", x1, x2) / N
    v = 2.0 * np.exp(-n1 - n2) * (np.cosh(2 * ov - 2 * q_target) - 1.0)
    return {"value": float(v.mean()), "se": float(v.std(ddof=1) / np.sqrt(n_pairs)),
            "n_pairs": n_pairs, "N": N}


def converse_laplace(source, rho_target: float, lambda_list, n_samples: int,
                     rng: np.random.Generator) -> list[dict]:
    """``E exp(-lambda |x|^2/N)`` against ``exp(-lambda rho)`` for each lambda."""
    lams = [float(v) for v in lambda_list]
    if any(v < 0 for v in lams):
        raise DomainError("lambda must be >= 0")
    x = source.sample(rng, n_samples)
    s = np.einsum("ij,ij->i", x, x) / source.N
    out = []
    for lam in lams:
        e = np.exp(-lam * s)
        lhs = float(e.mean())
        rhs = float(np.exp(-lam * rho_target))
        se = float(e.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
        out.append({"lambda": lam, "lhs": lhs, "rhs": rhs, "gap": lhs - rhs, "se": se})
    return out


def converse_cosh_gaussian_oracle(N: int, q_target: float = 0.0) -> float:
    """Exact value of ``converse_cosh`` for a standard Gaussian in R^N.

    Per coordinate the pair ``(u, v)`` contributes ``(1 + 4/N)^(-1/2)`` to
    ``E exp(-(u^2 + v^2)/N +- 2uv/N)``, so the functional equals
    ``2 [cosh(2q) (1 + 4/N)^(-N/2) - (1 + 2/N)^(-N)]``.
    """
    return 2.0 * (np.cosh(2 * q_target) * (1 + 4.0 / N) ** (-N / 2) - (1 + 2.0 / N) ** (-N))


def converse_laplace_gaussian_oracle(N: int, lam: float, rho: float = 1.0) -> float:
    """Exact ``E exp(-lam |x|^2/N) - exp(-lam rho)`` for ``x ~ N(0, rho I_N)``."""
    return (1 + 2.0 * lam * rho / N) ** (-N / 2) - np.exp(-lam * rho)
