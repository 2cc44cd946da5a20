"""Flat run configuration shared by every command.

The on-disk form is one ``key = value`` line per parameter in a fixed key
order, so two runs can be compared with a plain line diff.
Blank lines and ``#`` comments are ignored on read.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .cost import COST_KINDS, DEFAULT_WS, CostConfig
from .evaluation import PROTOCOLS
from .growth import GrowthConfig
from .shock import ShockConfig

CONFIG_ENV = "SHOCKAXIS_CONFIG"
RESOLUTIONS = ("half", "full")
# largest scale by input resolution; inputs are used as given, never resized
RMAX_BY_RESOLUTION = {"half": 41, "full": 82}
AUTO = "auto"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    cost: str = "color"
    resolution: str = "half"
    w_s: float | None = None        # None -> per-kind default
    rmin: int = 2
    rmax: int | None = None         # None -> by resolution
    bins: int = 10
    tile_size: int = 6
    sub_rmin: int = 1
    smooth: bool = True
    smooth_lambda: float = 2e-2
    smooth_kappa: float = 2.0
    smooth_beta_max: float = 1e5
    delta_r: float = 0.0
    epsilon_r: int = 1
    alpha_c: float = 0.75
    l_max: int = 10
    alpha_end: float = 0.85
    directions: int = 16
    relax_factor: float = 2.0
    scale_step: int = 1
    subsume_fraction: float = 1.0
    subsume_margin: int = 0
    seed_margin: int = 1
    fold_angle: float = 90.0
    junction_angle: float = 45.0
    allow_union: bool = True
    tolerance: float = 0.01
    protocol: str = "single"
    ligature_horizon: int = 3
    edge_cap: int = 5_000_000

    def __post_init__(self):
        if self.cost not in COST_KINDS:
            raise ConfigError(f"cost must be one of {COST_KINDS}, got {self.cost!r}")
        if self.resolution not in RESOLUTIONS:
            raise ConfigError(f"resolution must be one of {RESOLUTIONS}")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}")
        if not self.tolerance >= 0:
            raise ConfigError("tolerance must be >= 0")
        try:
            self.cost_config()
            self.shock_config()
            self.growth_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # -- resolved values ------------------------------------------------

    @property
    def scale_weight(self) -> float:
        return DEFAULT_WS[self.cost] if self.w_s is None else self.w_s

    @property
    def r_max(self) -> int:
        return RMAX_BY_RESOLUTION[self.resolution] if self.rmax is None else self.rmax

    def cost_config(self) -> CostConfig:
        return CostConfig(kind=self.cost, w_s=self.w_s, r_min=self.rmin, r_max=self.r_max,
                          bins=self.bins, tile_size=self.tile_size, sub_r_min=self.sub_rmin)

    def shock_config(self) -> ShockConfig:
        return ShockConfig(delta_r=self.delta_r, epsilon_r=self.epsilon_r)

    def growth_config(self) -> GrowthConfig:
        return GrowthConfig(
            alpha_c=self.alpha_c, l_max=self.l_max, alpha_end=self.alpha_end,
            directions=self.directions, relax_factor=self.relax_factor,
            scale_step=self.scale_step, subsume_fraction=self.subsume_fraction,
            subsume_margin=self.subsume_margin, seed_margin=self.seed_margin,
            fold_angle=self.fold_angle, junction_angle=self.junction_angle,
            allow_union=self.allow_union)

    def tolerance_px(self, shape) -> float:
        return self.tolerance * math.hypot(shape[0], shape[1])

    def resolved(self) -> dict:
        """Every key with auto values filled in, for output echoes."""
        d = self.as_dict()
        d["w_s"] = self.scale_weight
        d["rmax"] = self.r_max
        return d

    # -- (de)serialization ------------------------------------------------

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def dumps(self) -> str:
        return "".join(f"{k} = {_format(v)}\n" for k, v in self.as_dict().items())

    def save(self, path) -> None:
        from .io import atomic_write_text
        atomic_write_text(path, self.dumps())

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (t.strip() for t in line.split("=", 1))
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            values[key] = value
        return cls().updated(values)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.loads(text)

    def updated(self, values: dict) -> "RunConfig":
        """Copy with string (or already typed) values applied by key."""
        types = _field_types()
        changes = {}
        for key, value in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            changes[key] = _parse(key, value, types[key]) if isinstance(value, str) else value
        return replace(self, **changes)


def _field_types() -> dict:
    return {f.name: f.type for f in fields(RunConfig)}


def _format(v) -> str:
    if v is None:
        return AUTO
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(key: str, text: str, type_: str):
    optional = "None" in type_
    if optional and text == AUTO:
        return None
    base = type_.split("|")[0].strip()
    try:
        if base == "bool":
            low = text.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if base == "int":
            return int(text)
        if base == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None
    return text


def default_config_path() -> Path | None:
    p = os.environ.get(CONFIG_ENV)
    return Path(p) if p else None


def resolve_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the config file (argument or environment), then overrides."""
    path = path or default_config_path()
    cfg = RunConfig.load(path) if path else RunConfig()
    return cfg.updated(overrides or {})
