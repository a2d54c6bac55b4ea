"""Acceptance suite: criteria 1-9, run from the shipped configs.

Each pipeline runs once per session at 4 threads.  Every criterion prints
one PASS/FAIL line, repeated in the terminal summary.  Expect roughly five
minutes on four cores.
"""
from pathlib import Path

import pytest

from randproj.cli import run
from randproj.config import ExperimentConfig
from randproj.selftest import algebra_selftest

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
THREADS = 4


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    cache = {}

    def get(name):
        if name not in cache:
            cfg = ExperimentConfig.load(CONFIGS / f"{name}.json")
            out = tmp_path_factory.mktemp(name)
            cache[name] = (cfg, out, run(cfg, out, threads=THREADS))
        return cache[name]
    return get


def _checks(report, *prefixes):
    found = [c for c in report.checks if any(c["name"].startswith(p) for p in prefixes)]
    assert found, f"no checks matching {prefixes}"
    return found


def _fmt(checks):
    return "; ".join(f"{c['name']}={c['value']:.4g}" for c in checks)


def test_criterion_1_rs_algebra(verdict):
    checks = algebra_selftest(seed=20240601, instances=200)
    ok = all(c.passed for c in checks)
    verdict(1, ok, "; ".join(f"{c.name}={c.value:.3g}" for c in checks))
    assert ok


def test_criterion_2_haar_moments(runs, verdict):
    cfg, _, report = runs("haar-moments")
    assert cfg.haar_n == [4, 6, 10] and cfg.haar_draws == 10**6 and cfg.z_gate == 4.0
    checks = _checks(report, "n=")
    ok = all(c["passed"] for c in checks)
    verdict(2, ok, _fmt(checks))
    assert ok


def test_criterion_3_drift(runs, verdict):
    cfg, _, report = runs("haar-moments")
    assert cfg.drift == {"n": 20, "epsilon": 0.02, "samples": 200_000}
    checks = _checks(report, "drift")
    ok = all(c["passed"] for c in checks)
    verdict(3, ok, _fmt(checks))
    assert ok


def test_criterion_4_metrics(runs, verdict):
    _, _, report = runs("metrics-selftest")
    checks = _checks(report, "w1_", "marginal", "Lipschitz")
    ok = len(checks) == 4 and all(c["passed"] for c in checks)
    verdict(4, ok, _fmt(checks))
    assert ok


def test_criterion_5_decay_order(runs, verdict):
    cfg, _, report = runs("theorem-scaling")
    assert cfg.N_list == [64, 128, 256, 512, 1024] and cfg.outer_draws == 256
    checks = _checks(report, "log-log slope", "estimates nonincreasing")
    ok = len(checks) == 2 and all(c["passed"] for c in checks)
    verdict(5, ok, _fmt(checks))
    assert ok


def test_criterion_6_upper_bound(runs, verdict):
    _, out, report = runs("theorem-scaling")
    checks = _checks(report, "W1(P_N, Q)")
    ok = all(c["passed"] for c in checks)
    verdict(6, ok, _fmt(checks) + f" (rows in {out.name}/w1_bound.csv)")
    assert ok


def test_criterion_7_sk_cavity(runs, verdict):
    cfg, _, report = runs("sk-cavity")
    assert cfg.disorders == 32 and cfg.N_list == [64, 128, 256]
    checks = _checks(report, "fixed point", "c1_hat", "N*c2", "cavity W1")
    ok = len(checks) == 4 and all(c["passed"] for c in checks)
    verdict(7, ok, _fmt(checks))
    assert ok


def test_criterion_8_converse(runs, verdict):
    cfg, _, report = runs("converse")
    assert cfg.N_list == [50, 200, 800] and cfg.lambdas == [0.5, 1.0, 2.0]
    checks = _checks(report, "converse cosh", "Laplace", "wrong-q")
    ok = len(checks) == 4 and all(c["passed"] for c in checks)
    verdict(8, ok, _fmt(checks))
    assert ok


# Reduced sizes for the heavy kinds; the cheap kinds rerun at full size.
REDUCED = {
    "haar-moments": {"haar_draws": 100_000, "drift": {"n": 20, "epsilon": 0.02, "samples": 20_000}},
    "theorem-scaling": {"N_list": [64, 128, 256], "outer_draws": 16, "inner_draws": 1024,
                        "n_pairs": 512, "w1_samples": 128, "w1_repeats": 2},
    "sk-cavity": {"N_list": [64, 128], "disorders": 4, "chains": 16, "burnin": 50,
                  "kept_snapshots": 8},
    "concentration-sk": {"disorders": 2, "chains": 16, "burnin": 50},
}


def test_criterion_9_reproducibility(runs, tmp_path, verdict):
    compared = []
    mismatched = []
    for name in ("converse", "metrics-selftest"):
        cfg, out4, rep4 = runs(name)
        run(cfg, tmp_path / name, threads=1)
        for f in rep4.files:
            if f.endswith(".csv"):
                compared.append(f"{name}/{f}")
                if (out4 / f).read_bytes() != (tmp_path / name / f).read_bytes():
                    mismatched.append(f"{name}/{f}")
    for name, overrides in REDUCED.items():
        data = ExperimentConfig.load(CONFIGS / f"{name}.json").to_dict()
        data.update(overrides)
        cfg = ExperimentConfig.from_dict(data)
        r1 = run(cfg, tmp_path / f"{name}-t1", threads=1)
        run(cfg, tmp_path / f"{name}-t4", threads=4)
        for f in r1.files:
            if f.endswith(".csv"):
                compared.append(f"{name}/{f}")
                a = (tmp_path / f"{name}-t1" / f).read_bytes()
                b = (tmp_path / f"{name}-t4" / f).read_bytes()
                if a != b:
                    mismatched.append(f"{name}/{f}")
    ok = not mismatched and len(compared) >= 9
    verdict(9, ok, f"{len(compared)} CSVs byte-identical at threads 1 and 4"
            if ok else f"mismatch: {', '.join(mismatched)}")
    assert ok
