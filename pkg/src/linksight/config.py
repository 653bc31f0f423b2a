"""Flat ``key=value`` configuration files."""
from __future__ import annotations


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def format_kv(mapping: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in mapping.items())
