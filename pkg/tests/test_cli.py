import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randproj.cli import EXIT_ERROR, EXIT_GATE, EXIT_OK, RunReport, main, run
from randproj.config import ExperimentConfig
from randproj.errors import ConfigError
from randproj.seeding import derive_seed, make_rng, pmap, tree_sum


# -- seeding ----------------------------------------------------------------

def test_derive_seed_examples():
    assert derive_seed(1, [("a", 1)]) == derive_seed(1, [("a", 1)])
    assert derive_seed(1, [("a", 0), ("b", 0)]) != derive_seed(1, [("b", 0), ("a", 0)])
    assert derive_seed(1, ["a"]) == derive_seed(1, [("a", 0)])
    assert derive_seed(1, [("a", 1)]) != derive_seed(2, [("a", 1)])
    # length prefixing keeps label boundaries apart
    assert derive_seed(0, ["ab", "c"]) != derive_seed(0, ["a", "bc"])
    assert 0 <= derive_seed(2**64 - 1, []) < 2**64


def test_derive_seed_frozen_value():
    # platform-independent: pure SHA-256 over a fixed little-endian encoding
    assert derive_seed(0, []) == int.from_bytes(
        __import__("hashlib").sha256(b"randproj/seed/v1" + bytes(8)).digest()[:8], "little")


def test_derive_seed_no_collisions():
    rng = np.random.default_rng(0)
    idx = rng.choice(2**40, size=1_000_000, replace=False)
    seeds = {derive_seed(12345, [("item", int(i))]) for i in idx}
    assert len(seeds) == 1_000_000


def test_pmap_and_tree_sum():
    assert pmap(lambda x: x * x, range(10), threads=4) == [x * x for x in range(10)]
    vals = [np.full(3, float(i)) for i in range(7)]
    np.testing.assert_array_equal(tree_sum(vals), np.full(3, 21.0))
    with pytest.raises(ValueError):
        tree_sum([])
    assert make_rng(3, ["x"]).random() == make_rng(3, ["x"]).random()


# -- config -----------------------------------------------------------------

kinds = st.sampled_from(["concentration", "theorem-scaling", "sk-cavity", "converse",
                         "haar-moments", "metrics-selftest"])


@settings(max_examples=60, deadline=None)
@given(kinds, st.integers(0, 2**64 - 1), st.lists(st.integers(2, 5000), min_size=1, max_size=6, unique=True),
       st.integers(1, 5), st.sampled_from(["quick", "full"]))
def test_config_roundtrip(kind, seed, Ns, k, profile):
    cfg = ExperimentConfig(kind=kind, seed=seed, N_list=sorted(Ns), k=k, profile=profile).validate()
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg and back.digest() == cfg.digest()


@pytest.mark.parametrize("data,path", [
    ({"kind": "concentration"}, "seed"),
    ({"seed": 1}, "kind"),
    ({"kind": "nope", "seed": 1}, "kind"),
    ({"kind": "converse", "seed": 1, "bogus": 3}, "bogus"),
    ({"kind": "converse", "seed": 1, "N_list": [10, 5]}, "N_list"),
    ({"kind": "converse", "seed": 1, "N_list": [10, 1.5]}, "N_list[1]"),
    ({"kind": "converse", "seed": 1, "source": {"type": "subgaussian", "rho": 1, "q": 2}}, "source.q"),
    ({"kind": "converse", "seed": 1, "schema_version": 9}, "schema_version"),
    ({"kind": "converse", "seed": -1}, "seed"),
    ({"kind": "converse", "seed": 1, "drift": {"epsilon": 2}}, "drift.epsilon"),
])
def test_config_errors_carry_path(data, path):
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict(data)
    assert exc.value.path == path


# -- runner -----------------------------------------------------------------

def _write(tmp_path, data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return p


def test_cli_selftest_run_and_report(tmp_path, capsys):
    cfg = _write(tmp_path, {"schema_version": 1, "kind": "metrics-selftest", "seed": 5})
    out = tmp_path / "run"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_OK
    assert {"report.json", "summary.txt", "config.json", "selftest.csv"} <= {p.name for p in out.iterdir()}
    report = RunReport.load(out)
    assert report.digest_ok() and report.passed
    assert main(["report", str(out)]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, monkeypatch):
    bad = _write(tmp_path, {"kind": "converse"})
    assert main(["run", str(bad)]) == EXIT_ERROR
    (tmp_path / "garbage.json").write_text("{not json")
    assert main(["run", str(tmp_path / "garbage.json")]) == EXIT_ERROR
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_ERROR
    assert main(["report", str(tmp_path / "nowhere")]) == EXIT_ERROR
    # an impossible gate forces a gate failure
    failing = _write(tmp_path, {"kind": "converse", "seed": 1, "N_list": [20, 40, 80],
                                "n_pairs": 200, "lambdas": [1.0], "z_gate": 0.0})
    monkeypatch.setenv("RANDPROJ_OUT", str(tmp_path / "envout"))
    assert main(["run", str(failing)]) == EXIT_GATE
    assert (tmp_path / "envout" / "report.json").exists()


def test_seed_and_profile_overrides(tmp_path):
    cfg = _write(tmp_path, {"kind": "metrics-selftest", "seed": 5})
    out = tmp_path / "o"
    assert main(["run", str(cfg), "--out", str(out), "--seed", "77", "--profile", "full"]) == EXIT_OK
    echo = json.loads((out / "config.json").read_text())
    assert echo["seed"] == 77 and echo["profile"] == "full"


def test_tampered_report_detected(tmp_path):
    cfg = ExperimentConfig(kind="metrics-selftest", seed=3)
    run(cfg, tmp_path)
    data = json.loads((tmp_path / "report.json").read_text())
    data["config"]["seed"] = 4
    (tmp_path / "report.json").write_text(json.dumps(data))
    assert main(["report", str(tmp_path)]) == EXIT_ERROR


SMALL = {
    "concentration": {"source": {"type": "isotropic"}, "N_list": [20, 40], "n_pairs": 200},
    "theorem-scaling": {"N_list": [16, 32, 64], "outer_draws": 6, "inner_draws": 64,
                        "n_pairs": 64, "w1_samples": 32, "w1_repeats": 3,
                        "catalog": {"size": 4}},
    "sk-cavity": {"source": {"type": "sk", "beta": 0.3, "h": 0.3}, "N_list": [16, 32],
                  "disorders": 3, "chains": 8, "burnin": 3, "thin": 1, "kept_snapshots": 4},
    "converse": {"N_list": [20, 40], "n_pairs": 200},
    "haar-moments": {"haar_n": [4], "haar_draws": 4000,
                     "drift": {"n": 6, "epsilon": 0.02, "samples": 3000}},
    "metrics-selftest": {},
}


@pytest.mark.parametrize("kind", sorted(SMALL))
def test_csv_identical_across_threads(kind, tmp_path):
    cfg = ExperimentConfig.from_dict({"kind": kind, "seed": 99, **SMALL[kind]})
    r1 = run(cfg, tmp_path / "t1", threads=1)
    r4 = run(cfg, tmp_path / "t4", threads=4)
    csvs = [f for f in r1.files if f.endswith(".csv")]
    assert csvs and csvs == [f for f in r4.files if f.endswith(".csv")]
    for f in csvs:
        assert (tmp_path / "t1" / f).read_bytes() == (tmp_path / "t4" / f).read_bytes()
