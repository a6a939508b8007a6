"""Command-line driver: ``mietalbot <command> [options]``.

Every command writes one CSV table (stdout or ``--output``). ``--json``
writes the same table plus a run manifest; ``--manifest`` writes only the
manifest. ``mietalbot replay MANIFEST`` re-runs a recorded command.

Exit codes: 0 success, 2 configuration or argument error, 3 numerical
convergence or consistency error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, emit_config, load_config, load_preset, parse_config, parse_quantity
from .errors import ConfigError, ConvergenceError, DomainError, MieTalbotError
from .grating import F0_curve, index_sensitivity_band, rayleigh_F0, rayleigh_phase
from .interferometer import (OPTICS, PHASE_REFERENCES, InternalConsistencyError, OpticsModel,
                             default_z_grid, fringe_pattern, sinusoidal_visibility, sweep)
from .mie import ParticleSpec, cross_sections, mie_coefficients
from .talbot import Channels, Mode

__all__ = ["build_parser", "main", "replay_manifest", "run"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
VISIBILITY_COLUMNS = ("quantum", "classical", "rayleigh")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _fmt(v) -> str:
    v = float(v)
    if not math.isfinite(v):
        raise ConvergenceError(f"non-finite value {v} in output")
    return format(v, ".17g")


def _csv(columns, rows) -> str:
    out = io.StringIO()
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(_fmt(v) for v in row) + "\n")
    return out.getvalue()


def _grid(text: str, name: str) -> np.ndarray:
    """``start:stop:step`` inclusive of both ends, or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(round((stop - start) / step)) + 1
            return np.linspace(start, start + (count - 1) * step, count)
        return np.array([float(p) for p in text.split(",")])
    except ValueError:
        raise ConfigError(f"--{name}: expected start:stop:step or a comma list, got {text!r}",
                          name) from None


def _config(args):
    overrides = {}
    if getattr(args, "mass", None):
        overrides["mass"] = parse_quantity(args.mass, "mass", "mass")[0]
        if not overrides["mass"] > 0:
            raise ConfigError("mass must be positive", "mass")
    if args.config:
        return load_config(args.config, overrides)
    return load_preset(args.preset, overrides)


def _phi0(args, cfg) -> float:
    if args.phi0 is not None:
        if args.phi0 < 0:
            raise ConfigError("--phi0 must be >= 0", "phi0")
        return args.phi0
    if cfg.grating.pulse_energy > 0:
        return rayleigh_phase(cfg.particle, cfg.grating).phi0
    raise ConfigError("give --phi0 or set pulse_energy in the config", "phi0")


def _cmd_force_curve(args, cfg):
    if not (args.kr_min > 0 and args.kr_max >= args.kr_min and args.points >= 1):
        raise ConfigError("need 0 < kr-min <= kr-max and points >= 1", "kr-range")
    kR = np.linspace(args.kr_min, args.kr_max, args.points)
    p = cfg.particle
    lam = cfg.grating.wavelength
    mie = F0_curve(p.refractive_index, kR, lam, p.density)
    ray = np.array([rayleigh_F0(ParticleSpec.from_size_parameter(x, lam, p.density,
                                                                   p.refractive_index), lam)
                    for x in kR])
    columns, cols = ["kR", "F0_mie", "F0_rayleigh"], [kR, mie, ray]
    if args.perturbation:
        band = index_sensitivity_band(p, cfg.grating, args.perturbation, args.part, kR)
        columns += ["F0_minus", "F0_plus"]
        cols += [band.lower, band.upper]
    return columns, np.column_stack(cols), {}


def _cmd_mie(args, cfg):
    lam = cfg.grating.wavelength
    sol = mie_coefficients(cfg.particle, lam)
    cs = cross_sections(sol, lam)
    n = np.arange(1, sol.n_max + 1)
    rows = np.column_stack((n, sol.a.real, sol.a.imag, sol.b.real, sol.b.imag))
    extra = {"size_parameter": sol.size_parameter, "sigma_sca": cs.sigma_sca,
             "sigma_ext": cs.sigma_ext, "sigma_abs": cs.sigma_abs}
    return ["n", "a_real", "a_imag", "b_real", "b_imag"], rows, extra


def _cmd_pattern(args, cfg):
    phi0 = _phi0(args, cfg)
    z = default_z_grid(cfg, args.points, args.periods)
    pat = fringe_pattern(cfg, phi0, z, args.mode, args.channels, args.optics,
                         phase_reference=args.phase_reference)
    extra = {"phi0": phi0, "visibility": pat.visibility, "harmonics": int(pat.harmonics.max()),
             "imag_residual": pat.imag_residual}
    return ["z_over_D", "intensity"], np.column_stack((z / cfg.magnification, pat.intensity)), extra


def _visibility_columns(text: str):
    cols = [c.strip() for c in text.split(",") if c.strip()]
    bad = [c for c in cols if c not in VISIBILITY_COLUMNS]
    if bad or not cols:
        raise ConfigError(f"--columns: unknown {bad}; expected a subset of "
                          f"{', '.join(VISIBILITY_COLUMNS)}", "columns")
    return cols


def _cmd_visibility(args, cfg):
    phis = _grid(args.phi0_grid, "phi0-grid") if args.phi0_grid else np.array([_phi0(args, cfg)])
    if np.any(phis < 0):
        raise ConfigError("phi0 values must be >= 0", "phi0")
    wanted = _visibility_columns(args.columns)
    models = {o: OpticsModel(cfg, o) for o in {"rayleigh" if c == "rayleigh" else args.optics
                                                 for c in wanted}}
    cols, names = [phis], ["phi0"]
    for c in wanted:
        optics = "rayleigh" if c == "rayleigh" else args.optics
        mode = "classical" if c == "classical" else "quantum"
        cols.append(np.array([sinusoidal_visibility(cfg, p, mode, args.channels, optics,
                                                    phase_reference=args.phase_reference,
                                                    model=models[optics]) for p in phis]))
        names.append(f"V_sin_{c}")
    return names, np.column_stack(cols), {}


def _cmd_sweep(args, cfg):
    phis = _grid(args.phi0_grid, "phi0-grid")
    if args.quantity == "visibility":
        res = sweep(cfg, phis, args.mode, args.channels, args.optics, "visibility",
                    phase_reference=args.phase_reference)
        return ["phi0", "V_sin"], np.column_stack((phis, res.values)), {}
    z = default_z_grid(cfg, args.points, args.periods)
    res = sweep(cfg, phis, args.mode, args.channels, args.optics, "pattern", z,
                phase_reference=args.phase_reference)
    zd = z / cfg.magnification
    rows = [(p, zz, v) for p, row in zip(phis, res.values) for zz, v in zip(zd, row)]
    return ["phi0", "z_over_D", "intensity"], np.array(rows), {}


def _cmd_config_check(args, cfg):
    names = ["size_parameter", "radius", "period", "talbot_time", "sigma_z", "magnification",
             "s_argument", "t1", "t2"]
    vals = [cfg.size_parameter, cfg.particle.radius, cfg.period, cfg.talbot_time, cfg.sigma_z,
            cfg.magnification, cfg.s_argument, cfg.t1, cfg.t2]
    return names, np.array([vals]), {}


_COMMANDS = {
    "force-curve": _cmd_force_curve,
    "mie": _cmd_mie,
    "pattern": _cmd_pattern,
    "visibility": _cmd_visibility,
    "sweep": _cmd_sweep,
    "config-check": _cmd_config_check,
}


def _choice(kind, parse):
    def conv(text):
        try:
            return parse(text).value if kind == "mode" else parse(text).name
        except DomainError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return conv


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mietalbot", description="Mie-corrected Talbot-Lau interferometry.")
    parser.add_argument("--version", action="version", version=f"mietalbot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, physics=True):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", help="key = value configuration file")
        src.add_argument("--preset", default="si-354", choices=PRESETS,
                         help="bundled configuration (default: si-354)")
        p.add_argument("--mass", help="override the particle mass, e.g. 1e8amu")
        p.add_argument("--output", "-o", help="CSV output path (default: stdout)")
        p.add_argument("--json", help="also write table plus manifest as JSON")
        p.add_argument("--manifest", help="write the run manifest to this path")
        if physics:
            p.add_argument("--mode", default="quantum", type=_choice("mode", Mode.parse),
                           help=f"one of: {', '.join(m.value for m in Mode)}")
            p.add_argument("--channels", default="scattering+absorption",
                           type=_choice("channels", Channels.parse),
                           help=f"one of: {', '.join(Channels.NAMES)}")
            p.add_argument("--optics", default="mie", choices=OPTICS)
            p.add_argument("--phase-reference", default="rayleigh", choices=PHASE_REFERENCES,
                           help="what the phi0 label refers to (default: point-dipole phase)")

    p = sub.add_parser("force-curve", help="F0 versus kR (Mie and point-dipole)")
    common(p, physics=False)
    p.add_argument("--kr-min", type=float, default=0.01)
    p.add_argument("--kr-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=500)
    p.add_argument("--perturbation", type=float, default=0.0,
                   help="relative index perturbation for an F0 band, e.g. 0.05")
    p.add_argument("--part", choices=("real", "imag"), default="real")

    p = sub.add_parser("mie", help="Mie coefficients and cross-sections of the particle")
    common(p, physics=False)

    for name, helptext in (("pattern", "fringe pattern at one phi0"),
                           ("visibility", "sinusoidal visibility"),
                           ("sweep", "visibility or pattern over a phi0 grid")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        if name != "sweep":
            p.add_argument("--phi0", type=float, help="grating phase label in rad")
        if name != "pattern":
            p.add_argument("--phi0-grid", required=(name == "sweep"),
                           help="start:stop:step (inclusive) or comma list")
        if name != "visibility":
            p.add_argument("--points", type=int, default=None,
                           help="z samples (default: enough to resolve every harmonic)")
            p.add_argument("--periods", type=float, default=4.0)
        if name == "visibility":
            p.add_argument("--columns", default=",".join(VISIBILITY_COLUMNS),
                           help="subset of quantum,classical,rayleigh")
        if name == "sweep":
            p.add_argument("--quantity", choices=("visibility", "pattern"), default="visibility")

    p = sub.add_parser("config-check", help="validate a config and print derived quantities")
    common(p, physics=False)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--output", "-o")
    return parser


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
           else _dt.datetime.now(_dt.timezone.utc))
    return now.replace(microsecond=0).isoformat()


_RECORDED = ("mass", "kr_min", "kr_max", "points", "perturbation", "part", "mode", "channels",
             "optics", "phase_reference", "phi0", "phi0_grid", "periods", "columns", "quantity")


def run(argv) -> tuple[str, dict]:
    """Execute a command; returns (csv_text, manifest). Raises package errors."""
    args = build_parser().parse_args(argv)
    if args.command == "replay":
        return replay_manifest(args.manifest)
    cfg = _config(args)
    columns, rows, extra = _COMMANDS[args.command](args, cfg)
    text = _csv(columns, np.atleast_2d(rows))
    recorded = {k: getattr(args, k) for k in _RECORDED if getattr(args, k, None) is not None}
    recorded.pop("mass", None)  # already folded into the resolved config
    manifest = {
        "command": args.command,
        "tool": "mietalbot",
        "version": __version__,
        "timestamp": _timestamp(),
        "arguments": recorded,
        "config": emit_config(cfg),
        "results": {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                    for k, v in extra.items()},
        "outputs": {"csv_sha256": hashlib.sha256(text.encode()).hexdigest(),
                    "rows": len(np.atleast_2d(rows)), "columns": columns},
    }
    return text, manifest


def replay_manifest(path) -> tuple[str, dict]:
    """Re-run the command in a manifest; the CSV digest is checked against the record."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    manifest = data.get("manifest", data)
    cfg = parse_config(manifest["config"])
    argv = [manifest["command"]]
    for key, value in manifest["arguments"].items():
        argv += [f"--{key.replace('_', '-')}", str(value)]
    parser = build_parser()
    args = parser.parse_args(argv)
    columns, rows, extra = _COMMANDS[args.command](args, cfg)
    text = _csv(columns, np.atleast_2d(rows))
    digest = hashlib.sha256(text.encode()).hexdigest()
    if digest != manifest["outputs"]["csv_sha256"]:
        raise InternalConsistencyError("replayed output differs from the recorded digest")
    return text, manifest


def _write(path, text):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        parsed = build_parser().parse_args(argv)
        text, manifest = run(argv)
    except ConfigError as exc:
        print(f"mietalbot: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, InternalConsistencyError) as exc:
        print(f"mietalbot: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"mietalbot: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MieTalbotError as exc:
        print(f"mietalbot: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _write(getattr(parsed, "output", None), text)
    if getattr(parsed, "json", None):
        columns = manifest["outputs"]["columns"]
        lines = text.splitlines()[1:]
        table = [[float(v) for v in line.split(",")] for line in lines]
        Path(parsed.json).write_text(json.dumps(
            {"manifest": manifest, "columns": columns, "rows": table}, indent=2) + "\n",
            encoding="utf-8")
    if getattr(parsed, "manifest", None) and parsed.command != "replay":
        Path(parsed.manifest).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
