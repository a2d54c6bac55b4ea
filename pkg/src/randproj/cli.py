"""Command-line runner.

    randproj run <config.json> [--out DIR] [--seed U64] [--threads N] [--profile quick|full]
    randproj report <run-dir>
    randproj selftest

Exit status: 0 when every gate passes, 2 on a gate failure, 1 on a
configuration or I/O error.  ``RANDPROJ_OUT`` overrides the output
directory unless ``--out`` is given.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig, digest
from .errors import ConfigError
from .experiments import PIPELINES
from .selftest import algebra_selftest, metrics_selftest

__all__ = ["RunReport", "run", "main", "EXIT_OK", "EXIT_GATE", "EXIT_ERROR"]

EXIT_OK, EXIT_ERROR, EXIT_GATE = 0, 1, 2
ENV_OUT = "RANDPROJ_OUT"


@dataclass
class RunReport:
    config: dict
    config_digest: str
    checks: list
    files: list
    versions: dict
    wall_time: float
    passed: bool
    threads: int = 1
    out_dir: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def load(cls, run_dir) -> "RunReport":
        data = json.loads((Path(run_dir) / "report.json").read_text())
        return cls(**data)

    def digest_ok(self) -> bool:
        return digest(self.config) == self.config_digest

    def summary(self) -> str:
        lines = [f"kind: {self.config['kind']}   seed: {self.config['seed']}   "
                 f"profile: {self.config['profile']}",
                 f"config digest: {self.config_digest}"]
        for c in self.checks:
            mark = "PASS" if c["passed"] else "FAIL"
            lines.append(f"  [{mark}] {c['name']}: {c['value']:.6g} (gate {c['gate']})")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}   "
                     f"wall time {self.wall_time:.1f} s")
        return "\n".join(lines)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _versions() -> dict:
    return {"randproj": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def resolve_out_dir(cfg: ExperimentConfig, out: str | None) -> Path:
    if out:
        return Path(out)
    if os.environ.get(ENV_OUT):
        return Path(os.environ[ENV_OUT])
    if cfg.out_dir:
        return Path(cfg.out_dir)
    return Path("runs") / f"{cfg.kind}-{cfg.seed}"


def run(cfg: ExperimentConfig, out_dir, threads: int = 1) -> RunReport:
    """Execute the pipeline for ``cfg.kind`` and write its artifacts."""
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    checks, tables = PIPELINES[cfg.kind](cfg, threads=threads)
    files = []
    for name, table in sorted(tables.items()):
        (out_dir / name).write_text(table.render())
        files.append(name)
    (out_dir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    files.append("config.json")
    report = RunReport(
        config=cfg.to_dict(),
        config_digest=cfg.digest(),
        checks=[c.to_dict() for c in checks],
        files=files,
        versions=_versions(),
        wall_time=time.perf_counter() - t0,
        passed=all(c.passed for c in checks),
        threads=threads,
        out_dir=str(out_dir),
    )
    (out_dir / "report.json").write_text(report.to_json() + "\n")
    (out_dir / "summary.txt").write_text(report.summary() + "\n")
    return report


def _cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.profile is not None:
            cfg.profile = args.profile
        cfg.validate()
        report = run(cfg, resolve_out_dir(cfg, args.out), threads=args.threads)
    except ConfigError as exc:
        print(f"config error at {exc.path}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_GATE


def _cmd_report(args) -> int:
    try:
        report = RunReport.load(args.run_dir)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"cannot read report: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(report.summary())
    if not report.digest_ok():
        print("warning: config echo does not match its digest", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK if report.passed else EXIT_GATE


def _cmd_selftest(args) -> int:
    checks = algebra_selftest(args.seed) + metrics_selftest(args.seed)
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.value:.6g} (gate {c.gate})")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_GATE


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randproj", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", default=None, help=f"output directory (overrides ${ENV_OUT})")
    p.add_argument("--seed", type=_u64, default=None, help="override the master seed")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--profile", choices=["quick", "full"], default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="pretty-print a run report")
    p.add_argument("run_dir")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("selftest", help="run the algebra and metrics oracle suites")
    p.add_argument("--seed", type=_u64, default=0)
    p.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
