"""Flat ``key = value`` configuration files mapped onto dataclasses.

Each dataclass field carries a ``parse`` callable in its metadata; unknown
keys and unparsable values raise :class:`InputError`.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Any, Callable, Mapping

from .errors import InputError


def parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_optional(inner: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str):
        if text.strip().lower() in ("", "none", "null"):
            return None
        return inner(text)
    return parse


def parse_list(inner: Callable[[str], Any], sep: str = ",") -> Callable[[str], list]:
    def parse(text: str) -> list:
        return [inner(part.strip()) for part in text.split(sep) if part.strip()]
    return parse


def parse_counts(text: str) -> tuple[int, ...]:
    """``10:1`` -> ``(10, 1)``."""
    return tuple(int(v) for v in text.strip().split(":"))


def parse_ratio(text: str) -> tuple[float, ...] | None:
    """``1:2`` -> ``(1/3, 2/3)``; ``train`` (or ``true``) -> ``None``, the training-fold estimate."""
    text = text.strip()
    if text.lower() in ("train", "true", "none"):
        return None
    parts = [float(v) for v in text.split(":")]
    total = sum(parts)
    if total <= 0 or any(p < 0 for p in parts):
        raise ValueError(f"bad ratio {text!r}")
    return tuple(p / total for p in parts)


def format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ":".join(format_value(v) for v in value)
    if isinstance(value, list):
        return ", ".join(format_value(v) if v is not None else "train" for v in value)
    return str(value)


def option(default, parse: Callable[[str], Any], help: str = "", **kw):
    """Dataclass field with a parser; mutable defaults are copied per instance."""
    meta = {"parse": parse, "help": help}
    if isinstance(default, (list, dict)):
        return dataclasses.field(default_factory=lambda: type(default)(default), metadata=meta, **kw)
    return dataclasses.field(default=default, metadata=meta, **kw)


def read_flat(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    return parse_flat(text, str(path))


def parse_flat(text: str, origin: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{origin}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def build(cls, values: Mapping[str, Any]):
    """Instantiate ``cls`` from string (or already typed) values, rejecting unknown keys."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - set(fields))
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {}
    for key, raw in values.items():
        if isinstance(raw, str):
            try:
                kwargs[key] = fields[key].metadata["parse"](raw)
            except (ValueError, TypeError) as exc:
                raise InputError(f"config key {key!r}: {exc}") from None
        else:
            kwargs[key] = raw
    return cls(**kwargs)


def to_flat(instance) -> dict[str, str]:
    return {f.name: format_value(getattr(instance, f.name)) for f in dataclasses.fields(instance)}


def dump_flat(instance) -> str:
    return "".join(f"{k} = {v}\n" for k, v in to_flat(instance).items())
