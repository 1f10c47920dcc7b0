"""
Job configuration: a sectioned key = value file read with configparser.

Example::

    [potential]
    kind = harmonic
    k = 1.0

    [state]
    n = 0

    [decomposition]
    flux = semiclassical
    x0 = median

Every key is checked against the schema below; unknown keys and malformed
values raise :class:`ConfigError` naming the section, key and line.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import eigenstates as eig
from . import potentials as pots

__all__ = ["ConfigError", "JobConfig", "load_config", "parse_config", "build_potential", "build_state"]


class ConfigError(ValueError):
    """Invalid configuration; the message points at the offending line."""


_SCHEMA = {
    "potential": {"kind", "mass", "hbar", "k", "omega", "depth", "alpha", "x_eq", "file", "label"},
    "state": {"n", "energy_window", "solver"},
    "decomposition": {"flux", "x0", "method", "branch_offset", "delta", "trunc_tol", "grid_points"},
    "trajectory": {"starts", "t_end", "dt", "record_every"},
    "scan": {"fluxes", "x0s"},
}


@dataclass
class JobConfig:
    potential: dict
    n: Optional[int] = None
    energy_window: Optional[tuple] = None
    solver: str = "auto"
    flux: Optional[float] = None
    x0: Optional[float] = None
    method: str = "auto"
    branch_offset: float = 0.0
    delta: Optional[float] = None
    trunc_tol: float = 1e-10
    grid_points: int = 2001
    starts: object = "x0"
    t_end: float = 100.0
    dt: float = 1e-3
    record_every: int = 10
    fluxes: list = field(default_factory=list)
    x0s: list = field(default_factory=list)
    has_trajectory: bool = False
    has_scan: bool = False
    source: str = "<string>"

    def as_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "source"}
        if isinstance(out["energy_window"], tuple):
            out["energy_window"] = list(out["energy_window"])
        return out


class _Reader:
    """Typed access to a parsed file with line-aware error messages."""

    def __init__(self, parser, text, source):
        self.parser = parser
        self.lines = text.splitlines()
        self.source = source

    def line_of(self, section, key=None):
        current = None
        for i, raw in enumerate(self.lines, start=1):
            line = raw.strip()
            m = re.match(r"^\[(.+)\]$", line)
            if m:
                current = m.group(1).strip().lower()
                if key is None and current == section:
                    return i
                continue
            if key is not None and current == section:
                name = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
                if name == key:
                    return i
        return None

    def fail(self, section, key, message):
        line = self.line_of(section, key)
        where = f"{self.source}"
        if line is not None:
            where += f":{line}"
        target = f"[{section}]" + (f" {key}" if key else "")
        raise ConfigError(f"{where}: {target}: {message}")

    def has(self, section, key):
        return self.parser.has_option(section, key)

    def raw(self, section, key):
        return self.parser.get(section, key).strip()

    def real(self, section, key, default=None, positive=False):
        if not self.has(section, key):
            return default
        text = self.raw(section, key)
        try:
            value = float(text)
        except ValueError:
            self.fail(section, key, f"expected a number, got {text!r}")
        if not math.isfinite(value):
            self.fail(section, key, "value must be finite")
        if positive and value <= 0:
            self.fail(section, key, f"must be positive, got {value!r}")
        return value

    def integer(self, section, key, default=None, minimum=None):
        if not self.has(section, key):
            return default
        text = self.raw(section, key)
        try:
            value = int(text)
        except ValueError:
            self.fail(section, key, f"expected an integer, got {text!r}")
        if minimum is not None and value < minimum:
            self.fail(section, key, f"must be at least {minimum}, got {value}")
        return value

    def reals(self, section, key):
        text = self.raw(section, key)
        items = [t.strip() for t in text.split(",") if t.strip()]
        try:
            values = [float(t) for t in items]
        except ValueError:
            self.fail(section, key, f"expected a comma-separated list of numbers, got {text!r}")
        if not all(math.isfinite(v) for v in values):
            self.fail(section, key, "values must be finite")
        return values

    def choice(self, section, key, options, default):
        if not self.has(section, key):
            return default
        value = self.raw(section, key).lower()
        if value not in options:
            self.fail(section, key, f"expected one of {sorted(options)}, got {value!r}")
        return value


def parse_config(text: str, source: str = "<string>", base_dir: Optional[Path] = None) -> JobConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    rd = _Reader(parser, text, source)

    for section in parser.sections():
        if section not in _SCHEMA:
            rd.fail(section, None, f"unknown section (expected one of {sorted(_SCHEMA)})")
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                rd.fail(section, key, f"unknown key (expected one of {sorted(_SCHEMA[section])})")
    for section in ("potential", "state"):
        if not parser.has_section(section):
            raise ConfigError(f"{source}: missing required section [{section}]")

    pot = {"kind": rd.choice("potential", "kind", {"harmonic", "morse", "tabulated"}, None)}
    if pot["kind"] is None:
        rd.fail("potential", None, "missing key 'kind'")
    pot["mass"] = rd.real("potential", "mass", 1.0, positive=True)
    pot["hbar"] = rd.real("potential", "hbar", 1.0, positive=True)
    if pot["kind"] == "harmonic":
        if rd.has("potential", "k") and rd.has("potential", "omega"):
            rd.fail("potential", "omega", "give either k or omega, not both")
        omega = rd.real("potential", "omega", None, positive=True)
        pot["k"] = rd.real("potential", "k", 1.0, positive=True) if omega is None else pot["mass"] * omega ** 2
    elif pot["kind"] == "morse":
        pot["depth"] = rd.real("potential", "depth", 200.0, positive=True)
        pot["alpha"] = rd.real("potential", "alpha", 1.0, positive=True)
        pot["x_eq"] = rd.real("potential", "x_eq", 0.0)
    else:
        if not rd.has("potential", "file"):
            rd.fail("potential", None, "a tabulated potential needs 'file'")
        path = Path(rd.raw("potential", "file"))
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        pot["file"] = str(path)
    for key in ("k", "omega", "depth", "alpha", "x_eq", "file"):
        if rd.has("potential", key) and key not in pot and not (key == "omega" and pot["kind"] == "harmonic"):
            rd.fail("potential", key, f"not a parameter of a {pot['kind']} potential")
    if rd.has("potential", "label"):
        pot["label"] = rd.raw("potential", "label")

    cfg = JobConfig(potential=pot, source=source)
    has_n, has_window = rd.has("state", "n"), rd.has("state", "energy_window")
    if has_n == has_window:
        rd.fail("state", None, "give exactly one state selector: n or energy_window")
    if has_n:
        cfg.n = rd.integer("state", "n", minimum=0)
    else:
        window = rd.reals("state", "energy_window")
        if len(window) != 2 or not window[0] < window[1]:
            rd.fail("state", "energy_window", "expected two increasing energies 'lo, hi'")
        cfg.energy_window = tuple(window)
    cfg.solver = rd.choice("state", "solver", {"auto", "analytic", "numeric"}, "auto")

    sec = "decomposition"
    if parser.has_section(sec):
        if rd.has(sec, "flux") and rd.raw(sec, "flux").lower() != "semiclassical":
            cfg.flux = rd.real(sec, "flux", positive=True)
        if rd.has(sec, "x0") and rd.raw(sec, "x0").lower() != "median":
            cfg.x0 = rd.real(sec, "x0")
        cfg.method = rd.choice(sec, "method", {"auto", "analytic", "quadrature"}, "auto")
        cfg.branch_offset = rd.real(sec, "branch_offset", 0.0)
        cfg.delta = rd.real(sec, "delta", None)
        cfg.trunc_tol = rd.real(sec, "trunc_tol", 1e-10, positive=True)
        cfg.grid_points = rd.integer(sec, "grid_points", 2001, minimum=11)
        if cfg.delta is not None:
            if cfg.n is None:
                rd.fail(sec, "delta", "delta can only be checked against an explicit n")
            expected = 0.5 * math.pi if cfg.n % 2 else 0.0
            if abs(cfg.delta - expected) > 1e-12:
                mode = "odd" if cfg.n % 2 else "even"
                rd.fail(sec, "delta", f"n={cfg.n} is {mode}, which fixes delta = {expected!r}")

    sec = "trajectory"
    if parser.has_section(sec):
        cfg.has_trajectory = True
        if rd.has(sec, "starts"):
            text = rd.raw(sec, "starts").lower()
            if text == "x0":
                cfg.starts = "x0"
            elif text.startswith("ensemble"):
                m = re.fullmatch(r"ensemble\s*:\s*(\d+)", text)
                if m is None or int(m.group(1)) < 1:
                    rd.fail(sec, "starts", "expected 'ensemble:N' with N >= 1")
                cfg.starts = ("ensemble", int(m.group(1)))
            else:
                cfg.starts = rd.reals(sec, "starts")
                if not cfg.starts:
                    rd.fail(sec, "starts", "empty list of start points")
        cfg.t_end = rd.real(sec, "t_end", 100.0, positive=True)
        cfg.dt = rd.real(sec, "dt", 1e-3, positive=True)
        cfg.record_every = rd.integer(sec, "record_every", 10, minimum=1)

    sec = "scan"
    if parser.has_section(sec):
        cfg.has_scan = True
        for key in ("fluxes", "x0s"):
            values = rd.reals(sec, key) if rd.has(sec, key) else []
            setattr(cfg, key, values)
        if not cfg.fluxes:
            rd.fail(sec, "fluxes", "the flux list is empty")
        if not cfg.x0s:
            rd.fail(sec, "x0s", "the x0 list is empty")
        bad = [f for f in cfg.fluxes if f <= 0]
        if bad:
            rd.fail(sec, "fluxes", f"fluxes must be positive, got {bad[0]!r}")
    return cfg


def load_config(path) -> JobConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path), base_dir=path.parent)


def build_potential(cfg: JobConfig) -> pots.Potential:
    p = cfg.potential
    if p["kind"] == "harmonic":
        return pots.harmonic(k=p["k"], mass=p["mass"], hbar=p["hbar"])
    if p["kind"] == "morse":
        return pots.morse(depth=p["depth"], alpha=p["alpha"], x_eq=p["x_eq"], mass=p["mass"], hbar=p["hbar"])
    try:
        data = np.loadtxt(p["file"], delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load potential table {p['file']}: {exc}") from None
    if data.shape[1] < 2:
        raise ConfigError(f"potential table {p['file']} needs two columns x, V")
    return pots.tabulated(data[:, 0], data[:, 1], mass=p["mass"], hbar=p["hbar"], label=p.get("label", ""))


def build_state(cfg: JobConfig, potential: pots.Potential) -> eig.Eigenstate:
    """Closed-form state where one exists (unless the numeric solver is requested)."""
    if cfg.energy_window is not None:
        if cfg.solver == "analytic":
            raise ConfigError("the closed-form solver needs an explicit n")
        return eig.solve_generic(potential, energy_window=cfg.energy_window)
    closed = potential.kind in ("harmonic", "morse")
    if cfg.solver == "analytic" and not closed:
        raise ConfigError("no closed-form eigenstates for a tabulated potential")
    if cfg.solver != "numeric" and potential.kind == "harmonic":
        return eig.ho_eigenstate(cfg.n, potential=potential)
    if cfg.solver != "numeric" and potential.kind == "morse":
        if cfg.n >= pots.morse_bound_count(potential):
            raise ConfigError(f"the Morse potential holds {pots.morse_bound_count(potential)} bound states; "
                              f"n={cfg.n} is not one of them")
        return eig.morse_eigenstate(cfg.n, potential)
    return eig.solve_generic(potential, n=cfg.n)
