"""Engine configuration file (TOML ``key = value``; unknown keys are rejected)."""

from __future__ import annotations

import math
import os
import sys
from dataclasses import MISSING, asdict, dataclass, field, fields
from importlib import resources

from .errors import ConfigError
from .knrs import KnrsSettings, KnrsWeights

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONFIG_VERSION = 1
ENV_VAR = "CHERRYREC_CONFIG"


@dataclass(slots=True)
class KnrsConfig:
    weights: list[float] = field(default_factory=lambda: [0.2] * 5)
    half_life_hours: float = 24.0
    smoothing: float = 10.0
    keep_fraction: float = 0.05
    top_k: int = 20
    window_hours: float = 168.0
    credibility_table: str = ""


@dataclass(slots=True)
class CnleConfig:
    evaluator: str = "mock"
    endpoint: str = "http://127.0.0.1:8081"
    timeout: float = 10.0
    retries: int = 3
    concurrency: int = 4
    fallback_to_mock: bool = False
    prefer_collection: bool = False


@dataclass(slots=True)
class VansConfig:
    learning_rate: float = 0.001
    l2: float = 0.01
    epochs: int = 500
    patience: int = 20
    eval_every: int = 50
    trees: int = 16
    max_depth: int = 4
    svr_epsilon: float = 0.1


@dataclass(slots=True)
class EvalConfig:
    k: int = 5
    max_length: int = 200


@dataclass(slots=True)
class EngineConfig:
    config_version: int = CONFIG_VERSION
    seed: int = 0
    history_cap: int = 20
    title_token_cap: int = 32
    knrs: KnrsConfig = field(default_factory=KnrsConfig)
    cnle: CnleConfig = field(default_factory=CnleConfig)
    vans: VansConfig = field(default_factory=VansConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        k, c, v = self.knrs, self.cnle, self.vans
        checks = [
            (self.config_version == CONFIG_VERSION, f"config_version must be {CONFIG_VERSION}"),
            (self.history_cap >= 1, "history_cap must be >= 1"),
            (self.title_token_cap >= 1, "title_token_cap must be >= 1"),
            (len(k.weights) == 5, "knrs.weights needs five values"),
            (k.half_life_hours > 0, "knrs.half_life_hours must be > 0"),
            (k.smoothing >= 0, "knrs.smoothing must be >= 0"),
            (0 < k.keep_fraction <= 1, "knrs.keep_fraction must be in (0, 1]"),
            (1 <= k.top_k <= 20, "knrs.top_k must be in 1..20"),
            (k.window_hours > 0, "knrs.window_hours must be > 0"),
            (c.evaluator in ("mock", "remote"), "cnle.evaluator must be 'mock' or 'remote'"),
            (c.timeout > 0, "cnle.timeout must be > 0"),
            (c.retries >= 0, "cnle.retries must be >= 0"),
            (c.concurrency >= 1, "cnle.concurrency must be >= 1"),
            (v.learning_rate > 0 and math.isfinite(v.learning_rate), "vans.learning_rate must be > 0"),
            (v.l2 >= 0, "vans.l2 must be >= 0"),
            (v.epochs >= 1, "vans.epochs must be >= 1"),
            (v.patience >= 1, "vans.patience must be >= 1"),
            (v.eval_every >= 1, "vans.eval_every must be >= 1"),
            (v.trees >= 1, "vans.trees must be >= 1"),
            (v.max_depth >= 1, "vans.max_depth must be >= 1"),
            (v.svr_epsilon >= 0, "vans.svr_epsilon must be >= 0"),
            (self.eval.k >= 1, "eval.k must be >= 1"),
            (self.eval.max_length >= 3, "eval.max_length must be >= 3"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        try:
            KnrsWeights.of(k.weights)
        except ValueError as exc:
            raise ConfigError(f"knrs.weights: {exc}") from None

    def knrs_settings(self) -> KnrsSettings:
        k = self.knrs
        return KnrsSettings(
            weights=KnrsWeights.of(k.weights),
            half_life_hours=k.half_life_hours,
            smoothing=k.smoothing,
            keep_fraction=k.keep_fraction,
            top_k=k.top_k,
            window_hours=k.window_hours,
            history_cap=self.history_cap,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> EngineConfig:
        sections = {"knrs": KnrsConfig, "cnle": CnleConfig, "vans": VansConfig, "eval": EvalConfig}
        top = {f.name for f in fields(cls)} - set(sections)
        kwargs = {}
        for key, value in data.items():
            if key in sections:
                if not isinstance(value, dict):
                    raise ConfigError(f"[{key}] must be a table")
                kwargs[key] = _section(sections[key], key, value)
            elif key in top:
                kwargs[key] = _coerce(cls, key, value, key)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        return cls(**kwargs)


def _coerce(cls, name: str, value, where: str):
    default = next(f for f in fields(cls) if f.name == name)
    sample = default.default if default.default_factory is MISSING else default.default_factory()
    if isinstance(sample, bool):
        ok = isinstance(value, bool)
    elif isinstance(sample, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(sample, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(sample, str):
        ok = isinstance(value, str)
    elif isinstance(sample, list):
        ok = isinstance(value, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        value = [float(v) for v in value] if ok else value
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{where}: expected {type(sample).__name__}, got {value!r}")
    return value


def _section(cls, section: str, data: dict):
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown config key {section}.{key}")
        kwargs[key] = _coerce(cls, key, value, f"{section}.{key}")
    return cls(**kwargs)


def load_config(path: str | os.PathLike | None = None) -> EngineConfig:
    """Read a config file; with no path, ``$CHERRYREC_CONFIG`` or the defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        return EngineConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return EngineConfig.from_dict(data)


def example_config_text() -> str:
    return resources.files("cherryrec").joinpath("data/engine.toml").read_text("utf-8")
