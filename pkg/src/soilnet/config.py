"""Sectioned key-value config files.

Format: `[section]` headers followed by `key = value` lines, UTF-8.
Repeated section names are allowed (one section per entity). Lines starting
with `#` or `;` are comments. Tuple-valued keys use comma-separated decimals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path


class ConfigError(ValueError):
    """Parse or validation failure; carries the offending file line."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif path is not None:
            where += " "
        super().__init__(where + message)


@dataclass
class Section:
    name: str
    line: int
    path: Path | None = None
    # key -> (raw value, line number)
    values: dict[str, tuple[str, int]] = field(default_factory=dict)

    def error(self, message: str, key: str | None = None) -> ConfigError:
        line = self.line
        if key is not None and key in self.values:
            line = self.values[key][1]
        return ConfigError(message, self.path, line)

    def has(self, key: str) -> bool:
        return key in self.values

    def raw(self, key: str, default: str | None = None) -> str:
        if key not in self.values:
            if default is not None:
                return default
            raise self.error(f"missing required key '{key}' in [{self.name}]")
        return self.values[key][0]

    def get_str(self, key: str, default: str | None = None) -> str:
        return self.raw(key, default)

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self.values and default is not None:
            return default
        try:
            return int(self.raw(key))
        except ValueError:
            raise self.error(f"key '{key}' is not an integer", key) from None

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self.values and default is not None:
            return default
        try:
            return float(self.raw(key))
        except ValueError:
            raise self.error(f"key '{key}' is not a number", key) from None

    def get_floats(self, key: str, n: int | None = None) -> tuple[float, ...]:
        parts = [p.strip() for p in self.raw(key).split(",")]
        try:
            vals = tuple(float(p) for p in parts)
        except ValueError:
            raise self.error(f"key '{key}' is not a comma-separated number list", key) from None
        if n is not None and len(vals) != n:
            raise self.error(f"key '{key}' needs exactly {n} values, got {len(vals)}", key)
        return vals

    def get_utc(self, key: str, default: datetime | None = None) -> datetime:
        if key not in self.values and default is not None:
            return default
        try:
            return parse_utc(self.raw(key))
        except ValueError:
            raise self.error(f"key '{key}' is not a UTC timestamp", key) from None


def parse_utc(text: str) -> datetime:
    """Parse an ISO-8601 UTC timestamp ('Z' suffix or explicit offset)."""
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1] + "+00:00"
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def utc_seconds(text: str) -> int:
    return int(parse_utc(text).timestamp())


def iso_utc(seconds: float) -> str:
    return datetime.fromtimestamp(int(seconds), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_sections(path) -> list[Section]:
    """Parse a sectioned key-value file into an ordered section list."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}", path) from exc
    sections: list[Section] = []
    current: Section | None = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header", path, lineno)
            name = line[1:-1].strip()
            if not name:
                raise ConfigError("empty section name", path, lineno)
            current = Section(name=name, line=lineno, path=path)
            sections.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got: {line!r}", path, lineno)
        if current is None:
            raise ConfigError("key-value pair before any [section] header", path, lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError("empty key", path, lineno)
        if key in current.values:
            raise ConfigError(f"duplicate key '{key}' in [{current.name}]", path, lineno)
        current.values[key] = (value, lineno)
    if not sections:
        raise ConfigError("empty config file (no sections)", path, 1)
    return sections
