"""Flat key=value run configuration: parsing, digests, seed resolution.

A config file is plain text, one `key = value` per line, with `#` comments
and blank lines ignored.  Dotted keys address the two device dataclasses
(`ring.stage_count = 15`, `trojan.enabled = false`); `temperatures_degC`
takes a comma-separated list and `seed` a nonnegative integer.  Unknown keys
are errors so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, fields

from trnglab.ring import RingConfig, TrojanConfig

__all__ = [
    "RunSettings", "parse_config", "load_config", "config_digest",
    "resolve_seed", "DEFAULT_TEMPERATURES",
]

DEFAULT_TEMPERATURES = (25.0, 60.0, 120.0)

_RING_FIELDS = {f.name: f for f in fields(RingConfig)}
_TROJAN_FIELDS = {f.name: f for f in fields(TrojanConfig)}
_INT_FIELDS = {"stage_count", "target_edge"}
_BOOL_FIELDS = {"enabled"}


@dataclass(frozen=True)
class RunSettings:
    ring: RingConfig
    trojan: TrojanConfig
    temperatures_degC: tuple[float, ...] = DEFAULT_TEMPERATURES
    seed: int | None = None


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"config key {key}: expected a boolean, got {raw!r}")


def _parse_scalar(raw: str, key: str, name: str):
    if name in _BOOL_FIELDS:
        return _parse_bool(raw, key)
    try:
        if name in _INT_FIELDS:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ValueError(f"config key {key}: bad value {raw!r}") from None


def parse_config(text: str) -> RunSettings:
    """Build RunSettings from config text; unknown keys are errors."""
    ring_kw: dict = {}
    trojan_kw: dict = {}
    temps: tuple[float, ...] = DEFAULT_TEMPERATURES
    seed: int | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key.startswith("ring."):
            name = key[len("ring."):]
            if name not in _RING_FIELDS:
                raise ValueError(f"config line {lineno}: unknown key {key}")
            ring_kw[name] = _parse_scalar(raw, key, name)
        elif key.startswith("trojan."):
            name = key[len("trojan."):]
            if name not in _TROJAN_FIELDS:
                raise ValueError(f"config line {lineno}: unknown key {key}")
            trojan_kw[name] = _parse_scalar(raw, key, name)
        elif key == "temperatures_degC":
            try:
                temps = tuple(float(v) for v in raw.split(",") if v.strip())
            except ValueError:
                raise ValueError(
                    f"config line {lineno}: bad temperature list") from None
            if not temps:
                raise ValueError(f"config line {lineno}: empty temperature list")
        elif key == "seed":
            try:
                seed = int(raw)
            except ValueError:
                raise ValueError(f"config line {lineno}: bad seed") from None
            if seed < 0:
                raise ValueError(f"config line {lineno}: seed must be >= 0")
        else:
            raise ValueError(f"config line {lineno}: unknown key {key}")
    return RunSettings(ring=RingConfig(**ring_kw),
                       trojan=TrojanConfig(**trojan_kw),
                       temperatures_degC=temps, seed=seed)


def load_config(path: str | os.PathLike) -> RunSettings:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_digest(ring: RingConfig, trojan: TrojanConfig | None) -> str:
    """Stable hex digest of every device parameter; changes iff one does."""
    parts = [f"ring.{f.name}={getattr(ring, f.name)!r}"
             for f in fields(RingConfig)]
    if trojan is None:
        parts.append("trojan=None")
    else:
        parts.extend(f"trojan.{f.name}={getattr(trojan, f.name)!r}"
                     for f in fields(TrojanConfig))
    blob = "\n".join(parts).encode("ascii")
    return hashlib.sha256(blob).hexdigest()[:16]


def resolve_seed(cli_seed: int | None, settings: RunSettings | None) -> int:
    """Seed precedence: --seed, then TRNGLAB_SEED, then config, then 0."""
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get("TRNGLAB_SEED")
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"TRNGLAB_SEED is not an integer: {env!r}") from None
        if value < 0:
            raise ValueError("TRNGLAB_SEED must be >= 0")
        return value
    if settings is not None and settings.seed is not None:
        return settings.seed
    return 0
