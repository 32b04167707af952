"""Flat key=value config files.

One assignment per line, ``#`` starts a comment, blank lines are skipped.
Keys are dotted identifiers (``trainer.lr``); values parse as bool, int,
float, or string (optionally quoted). No sections, no nesting, no includes.
"""

from __future__ import annotations

import re

__all__ = [
    "parse_scalar",
    "parse_config_text",
    "load_config",
    "parse_assignments",
    "check_keys",
]

_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*$")
_INT_RE = re.compile(r"^[+-]?\d+$")


def parse_scalar(text: str):
    """Parse one value: bool, int, float, else a (possibly quoted) string."""
    s = text.strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "\"'":
        return s[1:-1]
    low = s.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    if _INT_RE.match(s):
        return int(s)
    try:
        return float(s)
    except ValueError:
        return s


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if not _KEY_RE.match(key):
            raise ValueError(f"{source}:{lineno}: bad key {key!r}")
        if key in out:
            raise ValueError(f"{source}:{lineno}: duplicate key {key!r}")
        if not value.strip():
            raise ValueError(f"{source}:{lineno}: empty value for {key!r}")
        out[key] = parse_scalar(value)
    return out


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path))


def parse_assignments(pairs) -> dict:
    """Parse CLI-style ``key=value`` strings (later entries win)."""
    out: dict = {}
    for item in pairs:
        if "=" not in item:
            raise ValueError(f"expected key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        if not _KEY_RE.match(key):
            raise ValueError(f"bad key {key!r}")
        out[key] = parse_scalar(value)
    return out


def check_keys(config: dict, allowed, source: str = "<config>") -> None:
    """Reject keys outside the allowed set (typo guard)."""
    unknown = sorted(k for k in config if k not in set(allowed))
    if unknown:
        raise ValueError(f"{source}: unknown keys: {', '.join(unknown)}")
