"""Experiment pipelines, one per configuration kind.

Each pipeline returns its gate checks and a set of CSV tables.  All
randomness is derived from the master seed through ``derive_seed`` with a
path naming the work item, so tables do not depend on the thread count.
"""
from __future__ import annotations

import numpy as np

from .config import ExperimentConfig
from .haar import drift_check, moment_suite
from .metrics import build_catalog, w1_1d, w1_exact_kd
from .projection import sample_pn, sample_q
from .selftest import Check, algebra_selftest, fixed_point_bisection, metrics_selftest
from .seeding import derive_seed, make_rng, pmap
from .sources import (SkModel, glauber_chains, isotropic_gaussian, point_mass, sk_fixed_point,
                      spiked_gaussian, subgaussian_product)
from .verify import (concentration_report, converse_cosh, converse_cosh_gaussian_oracle,
                     converse_laplace, converse_laplace_gaussian_oracle, lemma_pn_q_bound,
                     overlap_covariance_bound, rates, scaling_check)

__all__ = ["PIPELINES", "build_source", "Table", "sk_disorder_stats"]


class Table:
    """A CSV table with a fixed header; floats print with 17 significant digits."""

    def __init__(self, header):
        self.header = list(header)
        self.rows = []

    def add(self, *row):
        if len(row) != len(self.header):
            raise ValueError("row length does not match header")
        self.rows.append(row)

    @staticmethod
    def _cell(v) -> str:
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.17g}"
        return str(v)

    def render(self) -> str:
        lines = [",".join(self.header)]
        lines += [",".join(self._cell(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def build_source(spec: dict, N: int):
    kind = spec["type"]
    if kind == "subgaussian":
        return subgaussian_product(N, spec.get("rho", 1.0), spec.get("q", 0.0),
                                   spec.get("base", "gaussian"))
    if kind == "isotropic":
        return isotropic_gaussian(N, spec.get("variance", 1.0))
    if kind == "spiked":
        spectrum = np.ones(N)
        spectrum[0] = np.sqrt(N) * spec.get("spike", 1.0)
        return spiked_gaussian(N, spectrum)
    if kind == "point":
        return point_mass(np.full(N, np.sqrt(spec.get("q", 1.0))))
    raise ValueError(f"source type {kind!r} needs a disorder; use the SK pipelines")


def _gate_slope(cfg):
    return min(cfg.slope_gate, -0.45) if cfg.profile == "full" else cfg.slope_gate


# ---------------------------------------------------------------------------
# SK helpers


def _sk_params(cfg):
    src = cfg.source
    return float(src.get("beta", 0.3)), float(src.get("h", 0.3))


def sk_disorder_stats(cfg: ExperimentConfig, N: int, d: int, q_star: float) -> dict:
    """Gibbs statistics for one disorder sample.

    ``chains`` independent heat-bath chains are run and ``kept_snapshots``
    snapshots of each retained.  Overlaps pair chain ``2i`` with chain
    ``2i + 1`` in the same snapshot.  The cavity-field cloud is ``theta^T x``
    over all retained configurations for a fresh ``theta``; its reference
    is ``sqrt(q) z + sqrt(1 - q) xi`` with ``z`` the normalised projection
    of the estimated mean.
    """
    beta, h = _sk_params(cfg)
    model = SkModel.from_seed(N, beta, h, derive_seed(cfg.seed, [("N", N), ("disorder", d), "couplings"]))
    rng = make_rng(cfg.seed, [("N", N), ("disorder", d), "gibbs"])
    kept = cfg.kept_snapshots if cfg.profile == "quick" else max(cfg.kept_snapshots, -(-10_000 // cfg.chains))
    snaps = glauber_chains(model, cfg.chains, cfg.burnin, cfg.thin, kept, rng)
    flat = snaps.reshape(-1, N)
    norms = np.einsum("ij,ij->i", flat, flat) / N
    c1 = float(np.mean((norms - 1.0) ** 2))
    ov = np.einsum("tcn,tcn->tc", snaps[:, 0::2], snaps[:, 1::2]) / N
    c2 = float(np.mean((ov - q_star) ** 2))
    mean = flat.mean(axis=0)
    theta = rng.standard_normal(N) / np.sqrt(N)
    cloud = flat @ theta
    nm = float(mean @ mean) / N
    z = float(theta @ mean) / np.sqrt(nm) if nm > 0 else float(rng.standard_normal())
    ref = np.sqrt(q_star) * z + np.sqrt(1.0 - q_star) * rng.standard_normal(cloud.size)
    return {
        "c1": c1,
        "c2": c2,
        "q_hat": float(ov.mean()),
        "magnetization": float(flat.mean()),
        "w1": w1_1d(cloud, ref),
        "samples": int(flat.shape[0]),
        "model": model,
    }


def _sk_sweep(cfg, threads):
    beta, h = _sk_params(cfg)
    q_star = sk_fixed_point(beta, h)
    per_N = {}
    for N in cfg.N_list:
        per_N[N] = pmap(lambda d, N=N: sk_disorder_stats(cfg, N, d, q_star), range(cfg.disorders), threads)
    return q_star, per_N


def _agg(values):
    v = np.asarray(values, dtype=float)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0


# ---------------------------------------------------------------------------
# pipelines


def run_concentration(cfg: ExperimentConfig, threads: int = 1):
    checks, tables = [], {}
    t = Table(["N", "rho_hat", "q_hat", "c1_hat", "c2_hat", "c1_se", "c2_se", "d1", "d2", "N_c2"])
    if cfg.source["type"] == "sk":
        q_star, per_N = _sk_sweep(cfg, threads)
        nc2 = []
        all_c1_zero = True
        for N in cfg.N_list:
            stats = per_N[N]
            c1s = [s["c1"] for s in stats]
            all_c1_zero &= all(c == 0.0 for c in c1s)
            c2, c2_se = _agg([s["c2"] for s in stats])
            qh, _ = _agg([s["q_hat"] for s in stats])
            nc2.append(N * c2)
            r = rates(0.0, c2, N, 1.0, q_star)
            t.add(N, 1.0, qh, float(np.mean(c1s)), c2, 0.0, c2_se, r["d1"], r["d2"], N * c2)
        checks.append(Check("SK c1_hat == 0 exactly", 0.0 if all_c1_zero else 1.0, "== 0", all_c1_zero))
        ratio = max(nc2) / min(nc2)
        checks.append(Check("SK N*c2 max/min", ratio, "<= 3", ratio <= 3.0, {"q_star": q_star}))
    else:
        for N in cfg.N_list:
            src = build_source(cfg.source, N)
            rng = make_rng(cfg.seed, [("N", N), "concentration"])
            rep = concentration_report(src, cfg.n_pairs, rng, rho_target=src.rho, q_target=src.q)
            t.add(N, rep.rho_hat, rep.q_hat, rep.c1_hat, rep.c2_hat, rep.c1_se, rep.c2_se,
                  rep.d1, rep.d2, N * rep.c2_hat)
            spec = src.covariance_spectrum()
            if spec is not None:
                bound = overlap_covariance_bound(spec, src.q)
                ok = rep.c2_hat <= bound + cfg.z_gate * rep.c2_se
                checks.append(Check(f"N={N} c2_hat <= covariance bound", rep.c2_hat,
                                    f"<= {bound:.6g} + {cfg.z_gate} SE", bool(ok)))
    tables["concentration.csv"] = t
    return checks, tables


def _w1_bound_rows(cfg, threads):
    src_spec = cfg.source
    rows = []
    for N in cfg.N_list:
        src = build_source(src_spec, N)
        rho, q = src.rho, src.q
        rep = concentration_report(src, cfg.n_pairs, make_rng(cfg.seed, [("N", N), "w1-conc"]),
                                   rho_target=rho, q_target=q)
        bound = lemma_pn_q_bound(1, 1, N, rho, q, rep.c1_hat, rep.c2_hat)

        def one(r, N=N, src=src, rho=rho, q=q):
            rng = make_rng(cfg.seed, [("N", N), ("w1-repeat", r)])
            P = sample_pn(src, 1, 1, rng, size=cfg.w1_samples).flat()
            Q = sample_q(rho, q, 1, 1, rng, size=cfg.w1_samples).flat()
            return w1_exact_kd(P, Q)

        w, se = _agg(pmap(one, range(cfg.w1_repeats), threads))
        rows.append((N, w, se, bound, rep.c1_hat, rep.c2_hat))
    return rows


def run_theorem_scaling(cfg: ExperimentConfig, threads: int = 1):
    checks, tables = [], {}
    cat = cfg.catalog
    catalog = build_catalog(cfg.k, cat["L"], cat["M"], seed=cat["seed"]).head(cat["size"])
    family = lambda N: build_source(cfg.source, N)  # noqa: E731
    res = scaling_check(family, cfg.N_list, catalog, cfg.p, cfg.k, cfg.outer_draws,
                        np.random.default_rng(0), inner=cfg.inner_draws, variant="full",
                        threads=threads, seed=derive_seed(cfg.seed, ["scaling"]))
    t = Table(["N", "estimate", "se", "g_id"])
    for row in zip(res.N, res.estimates, res.ses, res.g_ids):
        t.add(*row)
    tables["scaling.csv"] = t
    gate = _gate_slope(cfg)
    checks.append(Check("log-log slope of the moment estimate", res.slope, f"<= {gate}",
                        bool(res.slope <= gate)))
    checks.append(Check("estimates nonincreasing up to 2 SE", float(res.monotone), "== 1",
                        res.monotone))

    t = Table(["N", "w1", "w1_se", "bound", "c1_hat", "c2_hat"])
    ok = True
    for row in _w1_bound_rows(cfg, threads):
        t.add(*row)
        ok &= row[1] <= row[3] + 4 * row[2]
    tables["w1_bound.csv"] = t
    checks.append(Check("W1(P_N, Q) <= bound + 4 SE at every N", float(ok), "== 1", bool(ok)))
    return checks, tables


def run_sk_cavity(cfg: ExperimentConfig, threads: int = 1):
    checks, tables = [], {}
    beta, h = _sk_params(cfg)
    q_star, per_N = _sk_sweep(cfg, threads)
    q_bis = fixed_point_bisection(beta, h)
    diff = abs(q_star - q_bis)
    checks.append(Check("fixed point vs bisection", diff, "<= 1e-10", diff <= 1e-10,
                        {"q": q_star, "bisection": q_bis}))
    t = Table(["N", "c1_hat", "c2_hat", "c2_se", "N_c2", "w1", "w1_se", "q_hat", "magnetization"])
    nc2, w1 = [], []
    c1_zero = True
    for N in cfg.N_list:
        stats = per_N[N]
        c1_zero &= all(s["c1"] == 0.0 for s in stats)
        c2, c2_se = _agg([s["c2"] for s in stats])
        w, w_se = _agg([s["w1"] for s in stats])
        qh, _ = _agg([s["q_hat"] for s in stats])
        mag, _ = _agg([s["magnetization"] for s in stats])
        nc2.append(N * c2)
        w1.append((w, w_se))
        t.add(N, float(np.mean([s["c1"] for s in stats])), c2, c2_se, N * c2, w, w_se, qh, mag)
    tables["sk_cavity.csv"] = t
    checks.append(Check("c1_hat == 0 exactly", 0.0 if c1_zero else 1.0, "== 0", c1_zero))
    ratio = max(nc2) / min(nc2)
    checks.append(Check("N*c2 max/min across N", ratio, "<= 3", ratio <= 3.0))
    (w0, s0), (w1_, s1) = w1[0], w1[-1]
    ok = w1_ <= w0 + 2 * np.hypot(s0, s1)
    checks.append(Check(f"cavity W1 at N={cfg.N_list[-1]} vs N={cfg.N_list[0]}", w1_ - w0,
                        "<= 2 SE", bool(ok), {"first": w0, "last": w1_}))
    return checks, tables


def run_converse(cfg: ExperimentConfig, threads: int = 1):
    checks, tables = [], {}
    t = Table(["N", "q_target", "value", "se", "oracle", "expansion"])
    values = []
    for N in cfg.N_list:
        src = isotropic_gaussian(N)
        rng = make_rng(cfg.seed, [("N", N), "cosh"])
        r = converse_cosh(src, 0.0, cfg.n_pairs, rng)
        oracle = converse_cosh_gaussian_oracle(N)
        expansion = 2.0 * (1 + 4.0 / N) ** (-N / 2) * 2.0 / N
        values.append(r)
        t.add(N, 0.0, r["value"], r["se"], oracle, expansion)
    dec = all(b["value"] < a["value"] for a, b in zip(values, values[1:]))
    checks.append(Check("converse cosh decreases in N", float(dec), "== 1", dec))
    last = values[-1]
    N = cfg.N_list[-1]
    z = (last["value"] - converse_cosh_gaussian_oracle(N)) / last["se"]
    checks.append(Check(f"converse cosh at N={N} vs oracle (z)", z, f"|z| <= {cfg.z_gate}",
                        abs(z) <= cfg.z_gate))

    rng = make_rng(cfg.seed, [("N", N), "wrong-q"])
    wq = converse_cosh(isotropic_gaussian(N), cfg.wrong_q, cfg.n_pairs, rng)
    lower = np.exp(-2.0) * (np.cosh(2 * cfg.wrong_q) - 1.0) / 2.0
    t.add(N, cfg.wrong_q, wq["value"], wq["se"], converse_cosh_gaussian_oracle(N, cfg.wrong_q), lower)
    checks.append(Check("wrong-q probe bounded away from 0", wq["value"], f">= {lower / 2:.6g}",
                        wq["value"] >= lower / 2))
    tables["converse_cosh.csv"] = t

    t = Table(["N", "lambda", "lhs", "rhs", "gap", "se", "oracle_gap", "z"])
    NL = 400
    rng = make_rng(cfg.seed, [("N", NL), "laplace"])
    worst = 0.0
    for r in converse_laplace(isotropic_gaussian(NL), 1.0, cfg.lambdas, cfg.n_pairs, rng):
        o = converse_laplace_gaussian_oracle(NL, r["lambda"])
        z = (r["gap"] - o) / r["se"] if r["se"] > 0 else (0.0 if r["gap"] == o else np.inf)
        worst = max(worst, abs(z))
        t.add(NL, r["lambda"], r["lhs"], r["rhs"], r["gap"], r["se"], o, z)
    tables["converse_laplace.csv"] = t
    checks.append(Check("Laplace gap vs chi-square oracle (max |z|)", worst,
                        f"<= {cfg.z_gate}", worst <= cfg.z_gate))
    return checks, tables


def run_haar_moments(cfg: ExperimentConfig, threads: int = 1):
    checks, tables = [], {}
    t = Table(["n", "statistic", "oracle", "mean", "se", "z", "draws"])
    for n in cfg.haar_n:
        res = moment_suite(n, cfg.haar_draws, derive_seed(cfg.seed, [("haar", n)]), threads=threads)
        worst = max(abs(m.z) for m in res)
        for m in res:
            t.add(n, m.name, m.oracle, m.mean, m.se, m.z, m.draws)
        checks.append(Check(f"n={n} moment suite max |z|", worst, f"<= {cfg.z_gate}",
                            worst <= cfg.z_gate))
    tables["haar_moments.csv"] = t

    d = cfg.drift
    rng = make_rng(cfg.seed, ["drift"])
    rep = drift_check(int(d["n"]), float(d["epsilon"]), int(d["samples"]), rng)
    t = Table(["component", "theta", "estimate", "se", "z"])
    for i in range(rep.n):
        t.add(i + 1, rep.theta[i], rep.estimate[i], rep.se[i], rep.z[i])
    tables["drift.csv"] = t
    checks.append(Check("drift max componentwise |z|", rep.max_z, "<= 5", rep.max_z <= 5.0,
                        {"radial_z": rep.radial_z}))
    return checks, tables


def run_metrics_selftest(cfg: ExperimentConfig, threads: int = 1):
    checks = metrics_selftest(cfg.seed) + algebra_selftest(cfg.seed)
    t = Table(["check", "value", "gate", "passed"])
    for c in checks:
        t.add(c.name, c.value, c.gate, c.passed)
    return checks, {"selftest.csv": t}


PIPELINES = {
    "concentration": run_concentration,
    "theorem-scaling": run_theorem_scaling,
    "sk-cavity": run_sk_cavity,
    "converse": run_converse,
    "haar-moments": run_haar_moments,
    "metrics-selftest": run_metrics_selftest,
}
