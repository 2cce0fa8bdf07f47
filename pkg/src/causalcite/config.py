"""Engine configuration: defaults, TOML key=value files, and validation."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from causalcite.errors import ContractError, FormatError

CONFIG_ENV = "CAUSALCITE_CONFIG"
BIN_MODES = ("equal_width", "quantile")
BIN_SCALES = ("log", "raw")
ESTIMATORS = ("stratified", "plain")


@dataclass
class Paths:
    corpus: str | None = None
    edges: str | None = None
    embeddings: str | None = None
    blocklist: str | None = None
    store: str | None = None


@dataclass
class MatchConfig:
    threshold: float = 0.81
    max_matches: int = 10
    coarse_k: int = 100


@dataclass
class Bm25Config:
    k1: float = 1.5
    b: float = 0.75


@dataclass
class SampleConfig:
    n: int = 40
    bins: int = 8
    bin_mode: str = "equal_width"
    bin_scale: str = "log"
    estimator: str = "stratified"
    seed: int = 0


@dataclass
class GraphConfig:
    influential_only: bool = False


@dataclass
class FallbackConfig:
    dims: int = 256
    seed: int = 0


@dataclass
class EngineConfig:
    paths: Paths = field(default_factory=Paths)
    match: MatchConfig = field(default_factory=MatchConfig)
    bm25: Bm25Config = field(default_factory=Bm25Config)
    sample: SampleConfig = field(default_factory=SampleConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    fallback: FallbackConfig = field(default_factory=FallbackConfig)
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)

    def set(self, key: str, value) -> None:
        """Assign a dotted key such as ``match.threshold``."""
        section, _, name = key.partition(".")
        if not name:
            if section != "workers":
                raise ContractError(f"unknown config key {key!r}")
            self.workers = _coerce("int", value, key)
            return
        target = getattr(self, section, None)
        if target is None or not hasattr(target, name) or section == "workers":
            raise ContractError(f"unknown config key {key!r}")
        kind = {f.name: f.type for f in fields(target)}[name]
        setattr(target, name, _coerce(kind, value, key))

    def validate(self) -> "EngineConfig":
        checks = [
            ("match.threshold", 0.0 < self.match.threshold <= 1.0),
            ("match.max_matches", self.match.max_matches >= 1),
            ("match.coarse_k", self.match.coarse_k >= 1),
            ("bm25.k1", self.bm25.k1 > 0),
            ("bm25.b", 0.0 <= self.bm25.b <= 1.0),
            ("sample.n", self.sample.n >= 1),
            ("sample.bins", self.sample.bins >= 1),
            ("sample.bin_mode", self.sample.bin_mode in BIN_MODES),
            ("sample.bin_scale", self.sample.bin_scale in BIN_SCALES),
            ("sample.estimator", self.sample.estimator in ESTIMATORS),
            ("sample.seed", self.sample.seed >= 0),
            ("fallback.dims", self.fallback.dims >= 16),
            ("workers", self.workers >= 1),
        ]
        for key, ok in checks:
            if not ok:
                raise ContractError(f"config value out of range: {key}")
        return self

    def provenance(self) -> dict:
        """Effective settings echoed into outputs.

        ``workers`` is left out: it changes scheduling, never results, and
        outputs must not differ between worker counts.
        """
        d = asdict(self)
        d.pop("workers")
        return d


def _coerce(kind, value, key):
    # annotations are strings here (postponed evaluation)
    kind = {"float": float, "int": int, "bool": bool}.get(kind, str)
    if kind is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "1", "yes", "false", "0", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ContractError(f"{key}: expected a boolean, got {value!r}")
    try:
        if kind is int and isinstance(value, float) and not value.is_integer():
            raise ValueError
        return kind(value)
    except (TypeError, ValueError):
        raise ContractError(f"{key}: cannot interpret {value!r}") from None


def _flatten(prefix: str, obj: dict, out: dict) -> None:
    for k, v in obj.items():
        key = f"{prefix}.{k}" if prefix else k
        if isinstance(v, dict):
            _flatten(key, v, out)
        else:
            out[key] = v


def load_config(path: str | None = None, overrides: dict | None = None) -> EngineConfig:
    """Defaults, then the config file (explicit path or $CAUSALCITE_CONFIG), then overrides."""
    cfg = EngineConfig()
    path = path or os.environ.get(CONFIG_ENV)
    if path:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise FormatError(f"config {path}: {exc}") from None
        flat: dict = {}
        _flatten("", raw, flat)
        for key, value in flat.items():
            cfg.set(key, value)
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg.set(key, value)
    return cfg.validate()
