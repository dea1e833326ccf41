"""Minimal `key = value` config file parser shared by network and experiment files.

Format: one assignment per line, `#` starts a comment, blank lines ignored.
Values are Python literals (numbers, quoted strings, lists, nested lists);
anything that does not parse as a literal is kept as a bare string, so
paths and enum-like words need no quoting.
"""

from __future__ import annotations

import ast
from pathlib import Path


class ConfigError(ValueError):
    """Raised for malformed config files or invalid/unknown keys."""


def parse_kv(text: str, source: str = "<string>") -> dict:
    """Parse `key = value` lines into a dict, preserving file order."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = _parse_value(value.strip())
    return out


def load_kv(path: str | Path) -> dict:
    path = Path(path)
    return parse_kv(path.read_text(), source=str(path))


def _parse_value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text
