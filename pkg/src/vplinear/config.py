"""Experiment configuration: INI files with one section per pipeline.

Example::

    [equilibrium]
    kind = maxwellian
    d = 1

    [dispersion]
    r_max = 0.5
    n_r = 64

Unknown sections or keys are rejected so that typos surface as parse
errors instead of silently falling back to defaults.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

__all__ = [
    "EquilibriumConfig",
    "SymbolsConfig",
    "PenroseConfig",
    "DispersionConfig",
    "KernelConfig",
    "EvolveConfig",
    "ExperimentConfig",
    "load_config",
    "parse_config",
]


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return "" if v is None else str(v)


_PARSERS = {int: int, float: float, str: str, bool: _bool, tuple: _floats}


@dataclass(frozen=True)
class _Section:
    """Base for config sections; field types drive parsing."""

    NAME = ""

    @classmethod
    def from_mapping(cls, items: dict):
        known = {f.name: f for f in fields(cls)}
        unknown = set(items) - set(known)
        if unknown:
            raise ConfigError(f"[{cls.NAME}] unknown keys: {', '.join(sorted(unknown))}")
        kw = {}
        for name, text in items.items():
            f = known[name]
            kind = _kind(f.type)
            try:
                kw[name] = None if (text.strip() == "" and "None" in str(f.type)) else _PARSERS[kind](text)
            except ValueError as exc:
                raise ConfigError(f"[{cls.NAME}] {name}: {exc}") from None
        obj = cls(**kw)
        obj.validate()
        return obj

    def items(self):
        return [(f.name, _fmt(getattr(self, f.name))) for f in fields(self)]

    def validate(self):
        pass


def _kind(annotation):
    s = str(annotation)
    for name, kind in (("tuple", tuple), ("bool", bool), ("float", float), ("int", int), ("str", str)):
        if s.startswith(name):
            return kind
    raise TypeError(annotation)


def _positive(section, **vals):
    for k, v in vals.items():
        if v is not None and not (v > 0 and math.isfinite(v)):
            raise ConfigError(f"[{section}] {k} must be positive and finite")


def _power_of_two(section, name, n):
    if n < 2 or n & (n - 1):
        raise ConfigError(f"[{section}] {name} must be a power of two")


def _window(section, w):
    if len(w) != 2 or not (0 < w[0] < w[1]):
        raise ConfigError(f"[{section}] fit_window must be two increasing positive times")


@dataclass(frozen=True)
class EquilibriumConfig(_Section):
    """``kind`` is ``maxwellian``, ``power_law``, ``two_stream`` or ``table``."""

    NAME = "equilibrium"
    kind: str = "maxwellian"
    d: int = 1
    m: float = 4.0
    R0: float | None = None
    separation: float = 2.0
    table: str = ""

    def validate(self):
        if self.kind not in ("maxwellian", "power_law", "two_stream", "table"):
            raise ConfigError(f"[equilibrium] unknown kind {self.kind!r}")
        if self.d not in (1, 2, 3):
            raise ConfigError("[equilibrium] d must be 1, 2 or 3")
        if self.kind == "two_stream" and self.d != 1:
            raise ConfigError("[equilibrium] two_stream is one-dimensional")
        if self.kind == "table" and not self.table:
            raise ConfigError("[equilibrium] kind = table needs a table path")
        _positive("equilibrium", m=self.m, R0=self.R0, separation=self.separation)


@dataclass(frozen=True)
class SymbolsConfig(_Section):
    """``queries`` is a CSV of ``re_z, im_z, xi`` rows (path relative to the config)."""

    NAME = "symbols"
    queries: str = ""
    rtol: float = 1e-12

    def validate(self):
        _positive("symbols", rtol=self.rtol)


@dataclass(frozen=True)
class PenroseConfig(_Section):
    NAME = "penrose"
    radii: tuple = ()
    n_radii: int = 24
    radius_min: float = 0.05
    radius_max: float = 20.0
    gamma_max: float = 3.0
    tau_max: float | None = None
    curve: bool = False
    expect: str = "stable"

    def validate(self):
        _positive("penrose", gamma_max=self.gamma_max, tau_max=self.tau_max, radius_min=self.radius_min)
        if self.n_radii < 1 or self.radius_max <= self.radius_min:
            raise ConfigError("[penrose] need n_radii >= 1 and radius_max > radius_min")
        if any(r <= 0 for r in self.radii):
            raise ConfigError("[penrose] radii must be positive")
        if self.expect not in ("stable", "unstable"):
            raise ConfigError("[penrose] expect must be stable or unstable")


@dataclass(frozen=True)
class DispersionConfig(_Section):
    NAME = "dispersion"
    r_min: float = 0.005
    r_max: float = 0.5
    n_r: int = 100
    eps3: float = 1.0
    fit_r_max: float = 0.1
    check_every: int = 10
    c2_tolerance: float = 0.01

    def validate(self):
        _positive("dispersion", r_min=self.r_min, eps3=self.eps3, fit_r_max=self.fit_r_max,
                  c2_tolerance=self.c2_tolerance)
        if self.r_max <= self.r_min or self.n_r < 2:
            raise ConfigError("[dispersion] need r_max > r_min and n_r >= 2")
        if self.check_every < 0:
            raise ConfigError("[dispersion] check_every must be non-negative")


@dataclass(frozen=True)
class KernelConfig(_Section):
    NAME = "kernel"
    t_min: float = 10.0
    t_max: float = 500.0
    n_t: int = 48
    n_xi: int = 2048
    xi_max: float = 2.0
    h: float = 0.08
    levels: int = 4
    delta: float | None = None
    fit_window: tuple = (20.0, 500.0)
    slope_tolerance: float = 0.15
    l2_tolerance: float = 0.2
    regular_tolerance: float = 0.2
    dump_times: tuple = ()

    def validate(self):
        _positive("kernel", t_min=self.t_min, xi_max=self.xi_max, h=self.h, delta=self.delta,
                  slope_tolerance=self.slope_tolerance, l2_tolerance=self.l2_tolerance,
                  regular_tolerance=self.regular_tolerance)
        if self.t_max <= self.t_min or self.n_t < 2 or self.levels < 1:
            raise ConfigError("[kernel] need t_max > t_min, n_t >= 2, levels >= 1")
        _power_of_two("kernel", "n_xi", self.n_xi)
        _window("kernel", self.fit_window)


@dataclass(frozen=True)
class EvolveConfig(_Section):
    NAME = "evolve"
    amplitude: float = 1.0
    x_center: float = 0.0
    x_width: float = 3.0
    v_width: float = 1.0
    t_min: float = 10.0
    t_max: float = 500.0
    n_t: int = 48
    n_xi: int = 2048
    xi_max: float = 2.0
    h: float = 0.08
    levels: int = 4
    delta: float | None = None
    fit_window: tuple = (20.0, 500.0)
    slope_tolerance: float = 0.2
    composition_tolerance: float = 1e-6
    kernel_check: bool = True
    kernel_check_tolerance: float = 1e-4
    dump_times: tuple = ()

    def validate(self):
        _positive("evolve", x_width=self.x_width, v_width=self.v_width, t_min=self.t_min,
                  xi_max=self.xi_max, h=self.h, delta=self.delta, slope_tolerance=self.slope_tolerance,
                  composition_tolerance=self.composition_tolerance,
                  kernel_check_tolerance=self.kernel_check_tolerance)
        if self.t_max <= self.t_min or self.n_t < 2 or self.levels < 1:
            raise ConfigError("[evolve] need t_max > t_min, n_t >= 2, levels >= 1")
        _power_of_two("evolve", "n_xi", self.n_xi)
        _window("evolve", self.fit_window)


_SECTIONS = {c.NAME: c for c in (EquilibriumConfig, SymbolsConfig, PenroseConfig, DispersionConfig,
                                 KernelConfig, EvolveConfig)}


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed configuration.  ``base_dir`` resolves relative paths.

    ``to_ini`` writes every field explicitly, so
    ``parse_config(cfg.to_ini()) == cfg`` (for the same ``base_dir``).
    """

    equilibrium: EquilibriumConfig = field(default_factory=EquilibriumConfig)
    symbols: SymbolsConfig = field(default_factory=SymbolsConfig)
    penrose: PenroseConfig = field(default_factory=PenroseConfig)
    dispersion: DispersionConfig = field(default_factory=DispersionConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    evolve: EvolveConfig = field(default_factory=EvolveConfig)
    base_dir: str = "."

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for name in _SECTIONS:
            cp[name] = dict(getattr(self, name).items())
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def tolerances(self) -> dict:
        """Every tolerance-like setting, for the manifest."""
        out = {"symbols.rtol": self.symbols.rtol, "dispersion.c2_tolerance": self.dispersion.c2_tolerance}
        for sec in ("kernel", "evolve"):
            for k, v in getattr(self, sec).items():
                if "tolerance" in k:
                    out[f"{sec}.{k}"] = float(v)
        return out


def parse_config(text: str, base_dir: str = ".") -> ExperimentConfig:
    """Parse INI text.

    Raises
    ------
    ConfigError
        On syntax errors, unknown sections or keys, or invalid values.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    unknown = set(cp.sections()) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    parts = {name: cls.from_mapping(dict(cp[name])) if cp.has_section(name) else cls()
             for name, cls in _SECTIONS.items()}
    return ExperimentConfig(**parts, base_dir=str(base_dir))


def load_config(path) -> tuple[ExperimentConfig, str]:
    """Read and parse ``path``; returns the config and the sha256 of the file."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ConfigError(f"{p}: not UTF-8 text") from None
    return parse_config(text, base_dir=str(p.parent)), hashlib.sha256(raw).hexdigest()
