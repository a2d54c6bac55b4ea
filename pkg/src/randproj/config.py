"""Experiment configuration: one versioned JSON document per run."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

__all__ = ["ExperimentConfig", "KINDS", "SCHEMA_VERSION", "canonical_json", "digest"]

SCHEMA_VERSION = 1
KINDS = ("concentration", "theorem-scaling", "sk-cavity", "converse", "haar-moments",
         "metrics-selftest")
PROFILES = ("quick", "full")
SOURCE_TYPES = ("subgaussian", "isotropic", "spiked", "point", "sk")


def _default_source():
    return {"type": "subgaussian", "rho": 1.0, "q": 0.25, "base": "rademacher"}


def _default_catalog():
    return {"seed": 0, "size": 16, "L": 1.0, "M": 1.0}


@dataclass
class ExperimentConfig:
    """All knobs of one experiment.  Only ``kind`` and ``seed`` are required.

    Fields a given kind does not use are ignored by it but still echoed.
    """

    kind: str
    seed: int
    schema_version: int = SCHEMA_VERSION
    profile: str = "quick"
    source: dict = field(default_factory=_default_source)
    N_list: list = field(default_factory=lambda: [64, 128, 256, 512, 1024])
    k: int = 2
    p: int = 1
    catalog: dict = field(default_factory=_default_catalog)
    outer_draws: int = 256
    inner_draws: int = 8192
    n_pairs: int = 4096
    disorders: int = 32
    chains: int = 64
    burnin: int = 200
    thin: int = 10
    kept_snapshots: int = 32
    haar_n: list = field(default_factory=lambda: [4, 6, 10])
    haar_draws: int = 1_000_000
    drift: dict = field(default_factory=lambda: {"n": 20, "epsilon": 0.02, "samples": 200_000})
    lambdas: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    wrong_q: float = 0.5
    w1_samples: int = 512
    w1_repeats: int = 8
    slope_gate: float = -0.4
    z_gate: float = 4.0
    out_dir: str | None = None

    # -- validation ---------------------------------------------------------

    def validate(self) -> "ExperimentConfig":
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported version {self.schema_version}")
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an integer in [0, 2^64)")
        if self.profile not in PROFILES:
            raise ConfigError("profile", "must be 'quick' or 'full'")
        for name in ("k", "p", "outer_draws", "inner_draws", "n_pairs", "disorders", "chains",
                     "burnin", "thin", "kept_snapshots", "haar_draws", "w1_samples", "w1_repeats"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(name, "must be a positive integer")
        if not isinstance(self.N_list, list) or not self.N_list:
            raise ConfigError("N_list", "must be a nonempty list")
        for i, N in enumerate(self.N_list):
            if not isinstance(N, int) or N < 2:
                raise ConfigError(f"N_list[{i}]", "must be an integer >= 2")
        if any(b <= a for a, b in zip(self.N_list, self.N_list[1:])):
            raise ConfigError("N_list", "must be strictly increasing")
        for i, n in enumerate(self.haar_n):
            if not isinstance(n, int) or n < 2:
                raise ConfigError(f"haar_n[{i}]", "must be an integer >= 2")
        src = self.source
        if not isinstance(src, dict) or src.get("type") not in SOURCE_TYPES:
            raise ConfigError("source.type", f"must be one of {', '.join(SOURCE_TYPES)}")
        if src["type"] == "subgaussian":
            rho, q = src.get("rho", 1.0), src.get("q", 0.0)
            if not 0 <= q < rho:
                raise ConfigError("source.q", "need 0 <= q < rho")
        if src["type"] == "sk" and src.get("beta", 0.3) < 0:
            raise ConfigError("source.beta", "must be >= 0")
        for key in ("seed", "size"):
            if not isinstance(self.catalog.get(key, 0), int):
                raise ConfigError(f"catalog.{key}", "must be an integer")
        drift = self.drift
        if not 0 < drift.get("epsilon", 0.02) < 1:
            raise ConfigError("drift.epsilon", "must lie in (0, 1)")
        if any(v < 0 for v in self.lambdas):
            raise ConfigError("lambdas", "entries must be >= 0")
        return self

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("$", "config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown field")
        for key in ("kind", "seed"):
            if key not in data:
                raise ConfigError(key, "required field missing")
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError("$", str(exc)) from exc
        # merge nested defaults so partial dicts are accepted
        if "source" in data and isinstance(data["source"], dict) and data["source"].get("type") == "subgaussian":
            cfg.source = {**_default_source(), **data["source"]}
        if "catalog" in data:
            cfg.catalog = {**_default_catalog(), **data["catalog"]}
        if "drift" in data:
            cfg.drift = {"n": 20, "epsilon": 0.02, "samples": 200_000, **data["drift"]}
        return cfg.validate()

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def digest(self) -> str:
        return digest(self.to_dict())


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
