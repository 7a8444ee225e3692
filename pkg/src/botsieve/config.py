"""Service/CLI configuration: one TOML file, overridable by MONDEO_* variables.

Keys (section.key = default):

    service.host = "127.0.0.1"     service.port = 8053     service.max_batch = 100000
    lists.whitelist = ""           lists.blacklist = ""
    models.dga = ""                models.forest = ""
    feedback.enabled = false       feedback.allow_whitelist = false
    rate.delta_f = 0.05            rate.k = 20             rate.max_idle_secs = 3600
    dga.lower = 0.1                dga.upper = 0.9
    dga.remote_url = ""            dga.timeout_ms = 200

The environment variable for ``section.key`` is ``MONDEO_SECTION_KEY``, e.g.
``MONDEO_RATE_DELTA_F=0.1``.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dga import DgaThresholds
from .rate import RateConfig

ENV_PREFIX = "MONDEO_"


class ConfigError(ValueError):
    pass


@dataclass
class ServiceSection:
    host: str = "127.0.0.1"
    port: int = 8053
    max_batch: int = 100_000


@dataclass
class ListsSection:
    whitelist: str = ""
    blacklist: str = ""


@dataclass
class ModelsSection:
    dga: str = ""
    forest: str = ""


@dataclass
class FeedbackSection:
    enabled: bool = False
    allow_whitelist: bool = False


@dataclass
class RateSection:
    delta_f: float = 0.05
    k: int = 20
    max_idle_secs: float = 3600.0


@dataclass
class DgaSection:
    lower: float = 0.1
    upper: float = 0.9
    remote_url: str = ""
    timeout_ms: int = 200


@dataclass
class ServiceConfig:
    service: ServiceSection = field(default_factory=ServiceSection)
    lists: ListsSection = field(default_factory=ListsSection)
    models: ModelsSection = field(default_factory=ModelsSection)
    feedback: FeedbackSection = field(default_factory=FeedbackSection)
    rate: RateSection = field(default_factory=RateSection)
    dga: DgaSection = field(default_factory=DgaSection)

    def rate_config(self) -> RateConfig:
        return RateConfig(self.rate.delta_f, self.rate.k, self.rate.max_idle_secs)

    def thresholds(self) -> DgaThresholds:
        return DgaThresholds(self.dga.lower, self.dga.upper)

    def validate(self) -> ServiceConfig:
        try:
            self.rate_config()
            self.thresholds()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0 <= self.service.port <= 65535:
            raise ConfigError("service.port must be in 0..65535")
        if self.service.max_batch < 1:
            raise ConfigError("service.max_batch must be >= 1")
        if self.dga.timeout_ms <= 0:
            raise ConfigError("dga.timeout_ms must be > 0")
        return self


def _coerce(value: Any, typ: type, key: str) -> Any:
    if typ is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("1", "true", "yes", "on", "0", "false", "no", "off"):
            return value.lower() in ("1", "true", "yes", "on")
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    try:
        if typ is int and (isinstance(value, bool) or isinstance(value, float)):
            raise ValueError
        return typ(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {typ.__name__}, got {value!r}") from None


_TYPES = {"str": str, "int": int, "float": float, "bool": bool}


def _apply(cfg: ServiceConfig, data: Mapping[str, Any], env: Mapping[str, str]) -> None:
    known = {f.name for f in fields(cfg)}
    for name in data:
        if name not in known:
            raise ConfigError(f"unknown config section [{name}]")
    for sec_field in fields(cfg):
        section = getattr(cfg, sec_field.name)
        given = data.get(sec_field.name, {})
        if not isinstance(given, Mapping):
            raise ConfigError(f"[{sec_field.name}] must be a table")
        names = {f.name for f in fields(section)}
        for k in given:
            if k not in names:
                raise ConfigError(f"unknown key {sec_field.name}.{k}")
        for f in fields(section):
            key = f"{sec_field.name}.{f.name}"
            typ = _TYPES[f.type] if isinstance(f.type, str) else f.type
            env_key = f"{ENV_PREFIX}{sec_field.name}_{f.name}".upper()
            if env_key in env:
                setattr(section, f.name, _coerce(env[env_key], typ, env_key))
            elif f.name in given:
                setattr(section, f.name, _coerce(given[f.name], typ, key))


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> ServiceConfig:
    """Defaults, then the TOML file (if any), then environment overrides."""
    data: dict[str, Any] = {}
    if path:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    cfg = ServiceConfig()
    _apply(cfg, data, os.environ if env is None else env)
    return cfg.validate()
