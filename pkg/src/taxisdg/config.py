"""Run configuration.

Configs are INI files (key = value under sections) read with the
standard library parser.  Everything has a default, so the empty string
is a valid config.  Unknown sections or keys are errors except inside
[model] and [initial], whose extra keys are numeric parameter
overrides passed to the model and initial-data builders.

Sections and keys:

  [model]    kind (plaque6 | reduced3 | heat2d | heat3d | advdiff2d |
             taxis2d), plus free numeric overrides (for the plaque
             family these are coefficient names like mu1, sigma,
             chi11_a; manufactured models accept their constructor
             numbers, e.g. kappa, vx, vy)
  [mesh]     kind (unit-square | unit-cube | annulus | gmsh), n,
             level, corner_deg, file
  [space]    order
  [flux]     kind (cdg2 | cdg | br2 | ip | bo), ip_eta0
  [time]     dt, t_end, tableau (2 | 3 | 4)
  [solver]   newton_rtol, newton_atol, newton_maxiter, gmres_rtol,
             gmres_restart, gmres_maxiter
  [run]      threads, seed, steps, thread_counts, levels, orders
  [initial]  species, amplitude, width, plus center_x / center_y /
             center_z
  [output]   dir, cadence

`RunConfig.normalized()` serializes back to a canonical text form
(sorted keys, every default made explicit); parsing that text
reproduces the config exactly, and its SHA-256 is the config hash
recorded in run summaries.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]

MODEL_KINDS = ("plaque6", "reduced3", "heat2d", "heat3d", "advdiff2d",
               "taxis2d")
MESH_KINDS = ("unit-square", "unit-cube", "annulus", "gmsh")


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class RunConfig:
    model_kind: str = "plaque6"
    model_params: dict = field(default_factory=dict)

    mesh_kind: str = "unit-square"
    mesh_n: int = 8
    mesh_level: int = 0
    corner_deg: float = 171.0
    mesh_file: str = ""

    order: int = 2

    flux: str = "cdg2"
    ip_eta0: float = 4.0

    dt: float = 0.01
    t_end: float = 1.0
    tableau: int = 3

    newton_rtol: float = 1e-8
    newton_atol: float = 1e-12
    newton_maxiter: int = 25
    gmres_rtol: float = 1e-4
    gmres_restart: int = 30
    gmres_maxiter: int = 200

    threads: int = 1
    seed: int = 0
    steps: int = 10
    thread_counts: tuple = (1, 2, 4)
    levels: int = 3
    orders: tuple = (1, 2, 3)

    initial_species: str = ""
    initial_amplitude: float = 1.0
    initial_width: float = 0.1
    initial_center: tuple = (0.5, 0.5)

    out_dir: str = ""
    cadence: int = 10

    def validate(self):
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.model_kind!r}; "
                              f"choose from {', '.join(MODEL_KINDS)}")
        if self.mesh_kind not in MESH_KINDS:
            raise ConfigError(f"unknown mesh kind {self.mesh_kind!r}; "
                              f"choose from {', '.join(MESH_KINDS)}")
        if self.mesh_kind == "gmsh":
            if not self.mesh_file:
                raise ConfigError("mesh kind gmsh needs mesh file = PATH")
            if not os.path.exists(self.mesh_file):
                raise ConfigError(f"mesh file not found: {self.mesh_file}")
        from .flux import SCHEME_NAMES
        if self.flux not in SCHEME_NAMES:
            raise ConfigError(f"unknown flux {self.flux!r}; choose from "
                              f"{', '.join(SCHEME_NAMES)}")
        if self.order < 0:
            raise ConfigError("order must be >= 0")
        if self.mesh_n < 1 or self.mesh_level < 0:
            raise ConfigError("mesh n must be >= 1 and level >= 0")
        if self.dt <= 0 or self.t_end <= 0:
            raise ConfigError("dt and t_end must be positive")
        if self.tableau not in (2, 3, 4):
            raise ConfigError("tableau order must be 2, 3, or 4")
        if self.threads < 1 or self.steps < 1:
            raise ConfigError("threads and steps must be >= 1")
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if not self.orders or any(k < 0 for k in self.orders):
            raise ConfigError("orders must be nonnegative")
        if any(t < 1 for t in self.thread_counts):
            raise ConfigError("thread_counts must be >= 1")
        if self.cadence < 0:
            raise ConfigError("cadence must be >= 0")
        return self

    # -- serialization --------------------------------------------------

    def normalized(self) -> str:
        """Canonical text form: every value explicit, keys sorted."""
        lines = []

        def sec(name, pairs):
            lines.append(f"[{name}]")
            for k in sorted(pairs):
                lines.append(f"{k} = {_fmt(pairs[k])}")
            lines.append("")

        model = {"kind": self.model_kind}
        model.update({k: self.model_params[k]
                      for k in sorted(self.model_params)})
        sec("model", model)
        sec("mesh", {"kind": self.mesh_kind, "n": self.mesh_n,
                     "level": self.mesh_level,
                     "corner_deg": self.corner_deg,
                     "file": self.mesh_file})
        sec("space", {"order": self.order})
        sec("flux", {"kind": self.flux, "ip_eta0": self.ip_eta0})
        sec("time", {"dt": self.dt, "t_end": self.t_end,
                     "tableau": self.tableau})
        sec("solver", {"newton_rtol": self.newton_rtol,
                       "newton_atol": self.newton_atol,
                       "newton_maxiter": self.newton_maxiter,
                       "gmres_rtol": self.gmres_rtol,
                       "gmres_restart": self.gmres_restart,
                       "gmres_maxiter": self.gmres_maxiter})
        sec("run", {"threads": self.threads, "seed": self.seed,
                    "steps": self.steps,
                    "thread_counts": " ".join(map(str, self.thread_counts)),
                    "levels": self.levels,
                    "orders": " ".join(map(str, self.orders))})
        center = " ".join(repr(c) for c in self.initial_center)
        sec("initial", {"species": self.initial_species,
                        "amplitude": self.initial_amplitude,
                        "width": self.initial_width,
                        "center": center})
        sec("output", {"dir": self.out_dir, "cadence": self.cadence})
        return "\n".join(lines)

    def config_hash(self) -> str:
        return hashlib.sha256(self.normalized().encode()).hexdigest()

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.normalized())


def _get(cp, section, key, conv, default, errs):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except (TypeError, ValueError):
        errs.append(f"[{section}] {key} = {raw!r}: not a valid "
                    f"{conv.__name__}")
        return default


def _int_tuple(raw: str) -> tuple:
    vals = tuple(int(tok) for tok in raw.split())
    if not vals:
        raise ValueError("empty list")
    return vals


def _float_tuple(raw: str) -> tuple:
    vals = tuple(float(tok) for tok in raw.split())
    if not vals:
        raise ValueError("empty list")
    return vals


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax: {e}") from None

    known = {"model", "mesh", "space", "flux", "time", "solver", "run",
             "initial", "output"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(f"unknown config section(s): "
                          f"{', '.join(sorted(extra))}")

    errs: list[str] = []
    cfg = RunConfig()
    g = lambda sec, key, conv, default: _get(cp, sec, key, conv, default,
                                             errs)

    cfg.model_kind = g("model", "kind", str, cfg.model_kind).lower()
    if cp.has_section("model"):
        for key in cp.options("model"):
            if key == "kind":
                continue
            raw = cp.get("model", key)
            try:
                cfg.model_params[key] = float(raw)
            except ValueError:
                errs.append(f"[model] {key} = {raw!r}: parameter "
                            f"overrides must be numbers")

    cfg.mesh_kind = g("mesh", "kind", str, cfg.mesh_kind).lower()
    cfg.mesh_n = g("mesh", "n", int, cfg.mesh_n)
    cfg.mesh_level = g("mesh", "level", int, cfg.mesh_level)
    cfg.corner_deg = g("mesh", "corner_deg", float, cfg.corner_deg)
    cfg.mesh_file = g("mesh", "file", str, cfg.mesh_file)

    cfg.order = g("space", "order", int, cfg.order)
    cfg.flux = g("flux", "kind", str, cfg.flux).lower()
    cfg.ip_eta0 = g("flux", "ip_eta0", float, cfg.ip_eta0)

    cfg.dt = g("time", "dt", float, cfg.dt)
    cfg.t_end = g("time", "t_end", float, cfg.t_end)
    cfg.tableau = g("time", "tableau", int, cfg.tableau)

    cfg.newton_rtol = g("solver", "newton_rtol", float, cfg.newton_rtol)
    cfg.newton_atol = g("solver", "newton_atol", float, cfg.newton_atol)
    cfg.newton_maxiter = g("solver", "newton_maxiter", int,
                           cfg.newton_maxiter)
    cfg.gmres_rtol = g("solver", "gmres_rtol", float, cfg.gmres_rtol)
    cfg.gmres_restart = g("solver", "gmres_restart", int,
                          cfg.gmres_restart)
    cfg.gmres_maxiter = g("solver", "gmres_maxiter", int,
                          cfg.gmres_maxiter)

    cfg.threads = g("run", "threads", int, cfg.threads)
    cfg.seed = g("run", "seed", int, cfg.seed)
    cfg.steps = g("run", "steps", int, cfg.steps)
    cfg.thread_counts = g("run", "thread_counts", _int_tuple,
                          cfg.thread_counts)
    cfg.levels = g("run", "levels", int, cfg.levels)
    cfg.orders = g("run", "orders", _int_tuple, cfg.orders)

    cfg.initial_species = g("initial", "species", str,
                            cfg.initial_species).lower()
    cfg.initial_amplitude = g("initial", "amplitude", float,
                              cfg.initial_amplitude)
    cfg.initial_width = g("initial", "width", float, cfg.initial_width)
    cfg.initial_center = g("initial", "center", _float_tuple,
                           cfg.initial_center)

    cfg.out_dir = g("output", "dir", str, cfg.out_dir)
    cfg.cadence = g("output", "cadence", int, cfg.cadence)

    for sec in ("mesh", "space", "flux", "time", "solver", "run",
                "initial", "output"):
        if not cp.has_section(sec):
            continue
        allowed = {
            "mesh": {"kind", "n", "level", "corner_deg", "file"},
            "space": {"order"},
            "flux": {"kind", "ip_eta0"},
            "time": {"dt", "t_end", "tableau"},
            "solver": {"newton_rtol", "newton_atol", "newton_maxiter",
                       "gmres_rtol", "gmres_restart", "gmres_maxiter"},
            "run": {"threads", "seed", "steps", "thread_counts",
                    "levels", "orders"},
            "initial": {"species", "amplitude", "width", "center"},
            "output": {"dir", "cadence"},
        }[sec]
        unknown = set(cp.options(sec)) - allowed
        if unknown:
            errs.append(f"unknown key(s) in [{sec}]: "
                        f"{', '.join(sorted(unknown))}")

    if errs:
        raise ConfigError("; ".join(errs))
    return cfg.validate()


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
