"""Line-oriented `key = value` run configuration."""

import dataclasses
import math

from .cocycle import ExperimentConfig
from .errors import ValidationError

# keys that are not ExperimentConfig fields but steer the CLI
EXTRA_KEYS = {
    "preset": str,
    "target": str,          # identity | conjugate | trivial | exact | p-adic:<p>
    "presentation": str,    # path to a presentation file
    "catalogue": str,       # path to an orbit catalogue file
    "orbit": str,           # catalogue label for main-lemma
    "orbits": str,          # comma separated labels for equidist
    "window_low": float,
    "window_high": float,
    "disc_radius": float,
    "arith_word_len": int,
    "pairs": int,
    "length": int,
    "hausdorff_points": int,
    "precision": int,
}

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
_CASTS = {"float": float, "int": int, float: float, int: int}


class ConfigError(ValidationError):
    def __init__(self, message, line=None, path=None):
        where = f"{path or 'config'}:{line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


def _convert(key, raw, lineno, path):
    if key in EXTRA_KEYS:
        cast = EXTRA_KEYS[key]
    else:
        cast = _CASTS.get(_FIELD_TYPES[key], float)
    if raw.lower() in ("none", "null", ""):
        return None
    try:
        if cast is int:
            v = float(raw)
            if not v.is_integer():
                raise ValueError
            return int(raw) if raw.lstrip("+-").isdigit() else int(v)
        if cast is float:
            v = float(raw)
            if math.isnan(v):
                raise ValueError
            return v
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {cast.__name__}", lineno, path) from None


def parse_config(text: str, path=None) -> dict:
    """Parse `key = value` lines; '#' starts a comment. Returns a flat dict."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno, path)
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key not in _FIELD_TYPES and key not in EXTRA_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", lineno, path)
        out[key] = _convert(key, raw, lineno, path)
    return out


def load_config(path) -> dict:
    with open(path) as fh:
        return parse_config(fh.read(), path=str(path))


def split_config(values: dict, defaults=None):
    """(ExperimentConfig, extras) from merged values; defaults fill unset keys."""
    merged = dict(defaults or {})
    merged.update({k: v for k, v in values.items() if v is not None})
    exp = {k: v for k, v in merged.items() if k in _FIELD_TYPES}
    extras = {k: v for k, v in merged.items() if k in EXTRA_KEYS}
    return ExperimentConfig(**exp), extras
