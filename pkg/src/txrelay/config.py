"""Experiment configuration.

Configs are flat, line-oriented text files::

    # comment
    topology.num_R = 20
    protocol.mode = proxy
    sweep.p = 0.5, 0.8

Every field has a default; unknown keys and malformed values are errors that
carry the offending line number.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

__all__ = [
    "AddrConfig",
    "AdversaryConfig",
    "ConfigError",
    "ExperimentConfig",
    "ProtocolParams",
    "RunConfig",
    "TopologyConfig",
    "WorkloadConfig",
    "SWEEP_ALIASES",
    "load_config",
    "parse_config",
]

MODES = ("diffusion", "proxy")
BEHAVIORS = ("log_only", "retain_proxied")
ORIGINS = ("honest_R", "honest_U", "honest_all")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class TopologyConfig:
    num_R: int = 100
    num_U: int = 1000
    u_outbound: int = 8
    r_outbound: int = 8
    num_buckets: int = 16
    max_connections: int = 125
    latency_min: float = 0.05
    latency_max: float = 0.3

    def validate(self) -> None:
        if self.num_R <= 0:
            raise ConfigError("topology.num_R must be positive")
        if self.num_U < 0 or self.u_outbound < 0 or self.r_outbound < 0:
            raise ConfigError("topology counts must be non-negative")
        if self.num_buckets <= 0:
            raise ConfigError("topology.num_buckets must be positive")
        if not 0 < self.latency_min <= self.latency_max:
            raise ConfigError("need 0 < topology.latency_min <= topology.latency_max")


@dataclass(frozen=True)
class ProtocolParams:
    mode: str = "proxy"
    p: float = 0.8
    timeout_t: float = 30.0
    epoch_len: float = 600.0
    proxy_set_size_k: int = 4
    activation_min_buckets_m: int = 2
    diffusion_rate_lambda: float = 0.5
    max_retries: int = 10

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"protocol.mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.p < 1.0:
            raise ConfigError("protocol.p must satisfy 0 <= p < 1")
        if not self.timeout_t > 0 or not self.epoch_len > 0:
            raise ConfigError("protocol.timeout_t and protocol.epoch_len must be positive")
        if self.proxy_set_size_k < 1 or self.activation_min_buckets_m < 1:
            raise ConfigError("protocol.proxy_set_size_k and activation_min_buckets_m must be >= 1")
        if not 0 < self.diffusion_rate_lambda < float("inf"):
            raise ConfigError("protocol.diffusion_rate_lambda must be positive")
        if self.max_retries < 0:
            raise ConfigError("protocol.max_retries must be >= 0")


@dataclass(frozen=True)
class AdversaryConfig:
    enabled: bool = False
    num_spy_R: int = 1
    num_adv_U: int = 0
    connections_per_honest_R: int = 2
    behavior: str = "log_only"
    num_buckets: int = 1
    target_node: int | None = None

    def validate(self) -> None:
        if self.behavior not in BEHAVIORS:
            raise ConfigError(f"adversary.behavior must be one of {BEHAVIORS}")
        if self.num_spy_R < 0 or self.num_adv_U < 0:
            raise ConfigError("adversary node counts must be non-negative")
        if self.enabled and self.connections_per_honest_R < 1:
            raise ConfigError("adversary.connections_per_honest_R must be >= 1")
        if self.num_buckets < 1:
            raise ConfigError("adversary.num_buckets must be >= 1")


@dataclass(frozen=True)
class WorkloadConfig:
    num_txs: int = 200
    creation_rate: float = 1.0
    origins: str = "honest_R"

    def validate(self) -> None:
        if self.num_txs < 0:
            raise ConfigError("workload.num_txs must be >= 0")
        if not self.creation_rate > 0:
            raise ConfigError("workload.creation_rate must be positive")
        if self.origins not in ORIGINS:
            raise ConfigError(f"workload.origins must be one of {ORIGINS}")


@dataclass(frozen=True)
class AddrConfig:
    enabled: bool = False
    advertise_unreachable: bool = True
    interval: float = 100.0
    rounds: int = 1

    def validate(self) -> None:
        if not self.interval > 0 or self.rounds < 0:
            raise ConfigError("addr.interval must be positive and addr.rounds >= 0")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    replicas: int = 1
    t_end: float = 3600.0
    out: str = "out"
    trace: bool = False
    # false: stop simulating the announce flood once a tx leaves the proxy
    # phase; only proxy-path statistics remain meaningful
    diffusion_flood: bool = True

    def validate(self) -> None:
        if self.replicas < 1:
            raise ConfigError("run.replicas must be >= 1")
        if not self.t_end > 0:
            raise ConfigError("run.t_end must be positive")


SECTIONS: dict[str, type] = {
    "topology": TopologyConfig,
    "protocol": ProtocolParams,
    "adversary": AdversaryConfig,
    "workload": WorkloadConfig,
    "addr": AddrConfig,
    "run": RunConfig,
}

SWEEP_ALIASES = {
    "p": "protocol.p",
    "u_outbound": "topology.u_outbound",
    "num_spy_R": "adversary.num_spy_R",
    "mode": "protocol.mode",
}


@dataclass(frozen=True)
class ExperimentConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    addr: AddrConfig = field(default_factory=AddrConfig)
    run: RunConfig = field(default_factory=RunConfig)
    # dotted key -> tuple of values, in file order
    sweep: tuple[tuple[str, tuple[Any, ...]], ...] = ()

    def validate(self) -> "ExperimentConfig":
        for name in SECTIONS:
            getattr(self, name).validate()
        if self.topology.num_buckets < self.protocol.activation_min_buckets_m:
            raise ConfigError(
                "topology.num_buckets must be >= protocol.activation_min_buckets_m"
            )
        return self

    def with_value(self, key: str, value: Any) -> "ExperimentConfig":
        section, name = key.split(".", 1)
        return replace(self, **{section: replace(getattr(self, section), **{name: value})})

    def flat(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for name in SECTIONS:
            for k, v in dataclasses.asdict(getattr(self, name)).items():
                out[f"{name}.{k}"] = v
        return out


def _field_types(cls: type) -> dict[str, Any]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in fields(cls)}


def _convert(raw: str, typ: Any) -> Any:
    raw = raw.strip()
    if typ is bool:
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if typ is int:
        return int(raw)
    if typ is float:
        return float(raw)
    if typ is str:
        return raw
    args = typing.get_args(typ)
    if type(None) in args:
        if raw.lower() in ("none", "null", ""):
            return None
        inner = next(a for a in args if a is not type(None))
        return _convert(raw, inner)
    raise TypeError(f"unsupported field type {typ!r}")


def resolve_key(key: str, line: int | None = None) -> tuple[str, str, Any]:
    key = SWEEP_ALIASES.get(key, key)
    if "." not in key:
        raise ConfigError(f"unknown key {key!r}", line)
    section, name = key.split(".", 1)
    if section not in SECTIONS:
        raise ConfigError(f"unknown section in key {key!r}", line)
    types = _field_types(SECTIONS[section])
    if name not in types:
        raise ConfigError(f"unknown key {key!r}", line)
    return section, name, types[name]


def parse_config(text: str) -> ExperimentConfig:
    values: dict[str, dict[str, Any]] = {name: {} for name in SECTIONS}
    sweep: list[tuple[str, tuple[Any, ...]]] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'section.key = value', got {stripped!r}", lineno)
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        seen[key] = lineno
        if key.startswith("sweep."):
            axis = key[len("sweep."):]
            section, name, typ = resolve_key(axis, lineno)
            items = [s for s in (x.strip() for x in raw.split(",")) if s]
            if not items:
                raise ConfigError(f"sweep axis {axis!r} has no values", lineno)
            try:
                converted = tuple(_convert(s, typ) for s in items)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for sweep axis {axis!r}: {exc}", lineno) from None
            sweep.append((f"{section}.{name}", converted))
            continue
        section, name, typ = resolve_key(key, lineno)
        try:
            values[section][name] = _convert(raw, typ)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from None
    cfg = ExperimentConfig(
        **{name: SECTIONS[name](**values[name]) for name in SECTIONS},
        sweep=tuple(sweep),
    )
    try:
        return cfg.validate()
    except ConfigError as exc:
        if exc.line is not None:
            raise
        # point at the last line that set a key named in the message
        named = [n for k, n in seen.items() if k in exc.message]
        raise ConfigError(exc.message, max(named) if named else None) from None


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for key, value in cfg.flat().items():
        lines.append(f"{key} = {'none' if value is None else value}")
    for key, vals in cfg.sweep:
        lines.append(f"sweep.{key} = {', '.join(str(v) for v in vals)}")
    return "\n".join(lines) + "\n"
