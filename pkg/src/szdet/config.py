"""``key = value`` run configuration and CSV emission with metadata headers."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__


class ConfigError(ValueError):
    pass


_CASTS = {"float": float, "int": int, "str": str, "bool": None}


def _to_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _canonical(key: str) -> str:
    return key.strip().replace(".", "_")


@dataclass
class RunConfig:
    """Parsed config: raw strings checked against a defaults table."""

    command: str
    values: dict[str, str]
    defaults: dict[str, Any]
    types: dict[str, str]
    outputs: dict[str, str] = field(default_factory=dict)

    def get(self, key: str) -> Any:
        key = _canonical(key)
        if key not in self.defaults:
            raise ConfigError(f"unknown key {key!r} for {self.command}")
        if key not in self.values:
            return self.defaults[key]
        raw, kind = self.values[key], self.types[key]
        try:
            return _to_bool(raw) if kind == "bool" else _CASTS[kind](raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot read {raw!r} as {kind}") from exc

    __getitem__ = get

    def resolved(self) -> dict[str, Any]:
        return {k: self.get(k) for k in self.defaults}

    @property
    def seed(self) -> int | None:
        for key in ("seed", "seed_u"):
            if key in self.defaults:
                return self.get(key)
        return None

    def build(self, cls):
        """Instantiate a dataclass whose fields are the config keys."""
        return cls(**self.resolved())

    def config_hash(self) -> str:
        text = "\n".join(f"{k}={v!r}" for k, v in sorted(self.resolved().items()))
        return hashlib.sha256(f"{self.command}\n{text}".encode()).hexdigest()[:16]

    def header(self) -> list[str]:
        lines = [f"# szdet {__version__} {self.command}",
                 f"# config_hash = {self.config_hash()}",
                 f"# seed = {self.seed}"]
        lines += [f"# {k} = {v!r}" for k, v in self.resolved().items()]
        return lines


def schema_from_dataclass(cls) -> tuple[dict[str, Any], dict[str, str]]:
    defaults, types = {}, {}
    for f in dataclasses.fields(cls):
        defaults[f.name] = f.default
        types[f.name] = f.type if isinstance(f.type, str) else f.type.__name__
    return defaults, types


def parse_config(text: str, command: str, defaults: dict[str, Any],
                 types: dict[str, str] | None = None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Keys may be written dotted (``forcing.kind``) or with underscores.
    Unknown keys, duplicates and malformed lines raise :class:`ConfigError`.
    """
    if types is None:
        types = {k: type(v).__name__ for k, v in defaults.items()}
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        ckey = _canonical(key)
        if ckey not in defaults:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if ckey in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[ckey] = value
    cfg = RunConfig(command, values, dict(defaults), dict(types))
    cfg.resolved()  # type errors surface at parse time
    return cfg


def load_config(path: str | Path | None, command: str, cls) -> RunConfig:
    defaults, types = schema_from_dataclass(cls)
    text = Path(path).read_text(encoding="utf-8") if path else ""
    return parse_config(text, command, defaults, types)


def write_csv(path: str | Path, header: list[str], rows: list[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(header + rows) + "\n", encoding="utf-8")
