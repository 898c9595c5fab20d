"""Flat ``key = value`` config files for SelectionConfig.

Accepted syntax, one setting per line::

    # comment
    t_angle = 12          # trailing comments are fine
    strategy = "ours"
    beta_normalized = false

``[section]`` headers are tolerated and ignored, so a file can be grouped
visually. Precedence is CLI flag > file value > built-in default.
"""

from __future__ import annotations

import re
from dataclasses import fields
from pathlib import Path

from .errors import InvalidConfig, ParseError
from .selection import SelectionConfig

ALIASES = {
    "seed": "rng_seed",
    "stride": "frame_stride",
    "t_flow": "t_flow",
    "tflow": "t_flow",
    "tbaseline": "t_baseline",
    "tangle": "t_angle",
}

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_\-]*)\s*=\s*(.*?)\s*$")
_SECTION = re.compile(r"^\s*\[[^\]]*\]\s*$")


def canonical_key(key: str) -> str:
    k = key.strip().lower().replace("-", "_")
    return ALIASES.get(k, k)


def _strip_comment(text):
    out, quote = [], None
    for ch in text:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
    return "".join(out).strip()


def _coerce(raw, typ, key, line):
    typ = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    text = raw.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
        if typ != "str":
            raise ParseError(f"expected {typ}, got a quoted string", line, key)
    try:
        if typ == "bool":
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        if typ == "int":
            return int(text)
        if typ == "float":
            return float(text)
        return text
    except ValueError:
        raise ParseError(f"cannot read {raw!r} as {typ}", line, key) from None


def parse_text(text, source="<config>"):
    """Parse config text into ``{field: value}`` with line diagnostics."""
    types = {f.name: f.type for f in fields(SelectionConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = _strip_comment(raw)
        if not body or _SECTION.match(body):
            continue
        m = _LINE.match(body)
        if not m:
            raise ParseError(f"{source}: expected 'key = value', got {raw.strip()!r}", lineno)
        key = canonical_key(m.group(1))
        if key not in types:
            raise ParseError(f"{source}: unknown setting", lineno, m.group(1))
        if m.group(2) == "":
            raise ParseError(f"{source}: missing value", lineno, key)
        values[key] = (_coerce(m.group(2), types[key], key, lineno), lineno)
    return values


def build_config(file_values=None, overrides=None) -> SelectionConfig:
    """Merge defaults, file values ``{key: (value, line)}`` and CLI overrides."""
    merged, lines = {}, {}
    for key, (value, line) in (file_values or {}).items():
        merged[key] = value
        lines[key] = line
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[canonical_key(key)] = value
            lines.pop(canonical_key(key), None)
    try:
        return SelectionConfig(**merged)
    except InvalidConfig as exc:
        bad = str(exc).split("=", 1)[0]
        raise ParseError(str(exc), lines.get(bad), bad) from exc
    except TypeError as exc:
        raise ParseError(str(exc)) from exc


def parse_config(path=None, overrides=None) -> SelectionConfig:
    file_values = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ParseError(f"cannot read {p}: {exc}") from exc
        file_values = parse_text(text, str(p))
    return build_config(file_values, overrides)
