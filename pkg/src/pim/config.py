"""Flat key = value configuration with dotted keys.

One option per line, ``section.key = value``; blank lines and ``#``
comments ignored.  Values are typed by trial: int, then float, then
true/false, else string.  Unknown keys are rejected so typos fail loudly
instead of silently falling back to defaults.
"""

from __future__ import annotations

from typing import Optional

__all__ = ["ConfigError", "DEFAULTS", "parse_value", "load_config", "merged"]


class ConfigError(ValueError):
    """Malformed config file or unknown key."""


DEFAULTS: dict = {
    "kernel.profile": "cubic",
    "solver.method": "auto",
    "solver.tol": 1e-10,
    "solver.max_iter_factor": 10,
    "solver.restart": 100,
    "assembly.dense_cutoff": 512,
    "coupling.c_t": 0.1,
    "coupling.gamma_t": 4.0 / 7.0,
    "coupling.c_beta": 0.5,
    "guardrails.r0_penalty": 2.0,
    "guardrails.r0_density": 20.0,
    "oracle.fineness": 8,
    "reference.factor": 4,
}


def parse_value(text: str):
    text = text.strip()
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            pass
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    return text


def load_config(path) -> dict:
    """Parse a config file; returns only the keys it sets."""
    out: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in DEFAULTS:
                raise ConfigError(
                    f"{path}:{lineno}: unknown key {key!r} "
                    f"(known: {', '.join(sorted(DEFAULTS))})")
            out[key] = parse_value(value)
    return out


def merged(config_path: Optional[str] = None,
           overrides: Optional[dict] = None) -> dict:
    """DEFAULTS, updated by the config file, updated by explicit overrides."""
    cfg = dict(DEFAULTS)
    if config_path is not None:
        cfg.update(load_config(config_path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = value
    return cfg
