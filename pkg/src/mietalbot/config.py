"""Key = value configuration files with unit suffixes.

Units are converted to SI here and nowhere else. Example::

    wavelength = 354 nm
    mass = 1e6 amu
    density = 2329 kg/m3
    refractive_index = 5.656+2.952i
    temperature = 20 mK
    trap_frequency = 200 kHz
    t1 = 2 tT
    t2 = 1.6 tT
    spot_area = 1 mm2          # optional
    pulse_energy = 5 uJ        # optional

Flight times accept ``tT``, the Talbot time of the configured particle.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ConfigError, DomainError
from .interferometer import ExperimentConfig, derive_config
from .mie import AMU

__all__ = [
    "PRESETS",
    "REQUIRED_KEYS",
    "emit_config",
    "load_config",
    "load_preset",
    "parse_config",
    "parse_quantity",
]

_UNITS = {
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "mass": {"kg": 1.0, "g": 1e-3, "amu": AMU, "u": AMU, "Da": AMU},
    "density": {"kg/m3": 1.0, "kg/m^3": 1.0, "g/cm3": 1e3, "g/cm^3": 1e3},
    "temperature": {"K": 1.0, "mK": 1e-3, "uK": 1e-6, "µK": 1e-6},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "tT": None},
    "area": {"m2": 1.0, "m^2": 1.0, "mm2": 1e-6, "mm^2": 1e-6, "mm²": 1e-6,
             "um2": 1e-12, "um^2": 1e-12, "µm2": 1e-12, "µm²": 1e-12},
    "energy": {"J": 1.0, "mJ": 1e-3, "uJ": 1e-6, "µJ": 1e-6, "nJ": 1e-9},
}

_KEYS = {
    "wavelength": "length",
    "mass": "mass",
    "density": "density",
    "refractive_index": None,
    "temperature": "temperature",
    "trap_frequency": "frequency",
    "t1": "time",
    "t2": "time",
    "spot_area": "area",
    "pulse_energy": "energy",
}
REQUIRED_KEYS = ("wavelength", "mass", "density", "refractive_index", "temperature",
                 "trap_frequency", "t1", "t2")
_DEFAULTS = {"spot_area": 1e-6, "pulse_energy": 0.0}

PRESETS = ("si-354",)

_NUMBER = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(\S*)\s*$")


def parse_quantity(text: str, kind: str, key: str | None = None, line: int | None = None):
    """Parse ``'<number> <unit>'`` into (value, unit); ``tT`` times are returned unscaled."""
    m = _NUMBER.match(text)
    if not m:
        raise ConfigError(f"{key or kind}: cannot parse {text.strip()!r} as a number with unit",
                          key, line)
    number, unit = float(m.group(1)), m.group(2)
    table = _UNITS[kind]
    if not unit:
        raise ConfigError(f"{key or kind}: missing unit (expected one of: {', '.join(table)})",
                          key, line)
    if unit not in table:
        raise ConfigError(f"{key or kind}: unknown unit {unit!r} (expected one of: "
                          f"{', '.join(table)})", key, line)
    scale = table[unit]
    return (number if scale is None else number * scale), unit


def _parse_index(text: str, key: str, line: int | None) -> complex:
    try:
        return complex(text.strip().replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text.strip()!r} as a complex number",
                          key, line) from None


@dataclass(frozen=True)
class _Raw:
    values: dict
    talbot_units: frozenset


def _read(text: str) -> _Raw:
    values, where, tt = {}, {}, set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}", None, lineno)
        key, value = (p.strip() for p in body.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r} (known keys: "
                              f"{', '.join(_KEYS)})", key, lineno)
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key, lineno)
        kind = _KEYS[key]
        if kind is None:
            values[key] = _parse_index(value, key, lineno)
        else:
            number, unit = parse_quantity(value, kind, key, lineno)
            if unit == "tT":
                tt.add(key)
            bound_ok = number >= 0 if key == "pulse_energy" else number > 0
            if not bound_ok:
                raise ConfigError(f"line {lineno}: {key} must be positive, got {value!r}",
                                  key, lineno)
            values[key] = number
        where[key] = lineno
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}", missing[0])
    return _Raw(values, frozenset(tt))


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from configuration text.

    ``overrides`` maps keys to SI values (or complex for the index) applied
    before the derived quantities are formed.
    """
    raw = _read(text)
    values = dict(_DEFAULTS)
    values.update(raw.values)
    tt = set(raw.talbot_units)
    for key, v in (overrides or {}).items():
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", key)
        values[key] = v
        tt.discard(key)
    times = {}
    for name in ("t1", "t2"):
        times[f"{name}_talbot" if name in tt else name] = values[name]
    try:
        cfg = derive_config(mass=values["mass"], density=values["density"],
                            refractive_index=values["refractive_index"],
                            wavelength=values["wavelength"],
                            temperature=values["temperature"],
                            trap_frequency=values["trap_frequency"],
                            spot_area=values["spot_area"], **times)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    if values["pulse_energy"]:
        cfg = ExperimentConfig(cfg.particle, cfg.grating.with_pulse_energy(values["pulse_energy"]),
                               cfg.temperature, cfg.trap_frequency, cfg.t1, cfg.t2)
    return cfg


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), overrides)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (available: {', '.join(PRESETS)})", "preset")
    return resources.files("mietalbot").joinpath("presets", f"{name}.cfg").read_text("utf-8")


def load_preset(name: str, overrides: dict | None = None) -> ExperimentConfig:
    return parse_config(preset_text(name), overrides)


def emit_config(cfg: ExperimentConfig) -> str:
    """Resolved configuration in SI units; ``parse_config`` of it reproduces ``cfg``."""
    p, g = cfg.particle, cfg.grating
    n = p.refractive_index
    lines = [
        f"wavelength = {g.wavelength!r} m",
        f"mass = {p.mass!r} kg",
        f"density = {p.density!r} kg/m3",
        f"refractive_index = {n.real!r}{n.imag:+.17g}i",
        f"temperature = {cfg.temperature!r} K",
        f"trap_frequency = {cfg.trap_frequency!r} Hz",
        f"t1 = {cfg.t1!r} s",
        f"t2 = {cfg.t2!r} s",
        f"spot_area = {g.spot_area!r} m2",
    ]
    if g.pulse_energy:
        lines.append(f"pulse_energy = {g.pulse_energy!r} J")
    return "\n".join(lines) + "\n"
