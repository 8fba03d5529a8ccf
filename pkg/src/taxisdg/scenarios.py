"""Turn a RunConfig into meshes, models, and finished studies.

This is the orchestration layer behind the command line: each cmd_*
function takes a validated RunConfig plus an output directory, runs the
corresponding workflow, writes its artifacts (CSV tables, VTK
snapshots, a JSON summary, a log), and returns the summary dict.
Everything here is also usable directly from a script or notebook.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import platform
import time
import dataclasses

import numpy as np

from .config import RunConfig, ConfigError
from .mesh import unit_square, unit_cube, annulus_sector, load_gmsh
from .fespace import DGSpace
from .model import (PlaqueParams, PlaqueModel, ReducedModel, HeatModel,
                    AdvDiffModel, TaxisCoupledModel, gaussian_bump)
from .flux import FluxScheme, SCHEME_NAMES
from .operator import DiscreteOperator
from .timeint import integrate, SolverError
from .analysis import (run_eoc_study, l2_error, scaling_study,
                       write_eoc_csv, write_scaling_csv)
from .vtkio import write_vtk

log = logging.getLogger("taxisdg")


# ----------------------------------------------------------------- builders

def build_mesh(cfg: RunConfig):
    n = cfg.mesh_n
    if cfg.mesh_kind == "unit-square":
        mesh = unit_square(n)
    elif cfg.mesh_kind == "unit-cube":
        mesh = unit_cube(n)
    elif cfg.mesh_kind == "annulus":
        # n counts angular subdivisions; radial layers scale along.
        mesh = annulus_sector(nr=max(2, round(n / 10)), ntheta=n,
                              corner_deg=cfg.corner_deg)
    elif cfg.mesh_kind == "gmsh":
        mesh = load_gmsh(cfg.mesh_file)
    else:  # pragma: no cover - caught by cfg.validate()
        raise ConfigError(f"unknown mesh kind {cfg.mesh_kind!r}")
    for _ in range(cfg.mesh_level):
        mesh = mesh.refine_uniform()
    return mesh


_PLAQUE_FIELDS = {f.name for f in dataclasses.fields(PlaqueParams)}


def build_model(cfg: RunConfig):
    kind = cfg.model_kind
    params = dict(cfg.model_params)
    if kind in ("plaque6", "reduced3"):
        bad = sorted(set(params) - _PLAQUE_FIELDS)
        if bad:
            raise ConfigError(f"unknown [model] parameters {bad}")
        p = PlaqueParams(**params)
        return PlaqueModel(p) if kind == "plaque6" else ReducedModel(p)
    if kind in ("heat2d", "heat3d"):
        _check_params(params, {"kappa"})
        return HeatModel(kappa=params.get("kappa", 1.0),
                         dim=2 if kind == "heat2d" else 3)
    if kind == "advdiff2d":
        _check_params(params, {"vx", "vy", "kappa"})
        return AdvDiffModel(velocity=(params.get("vx", 0.8),
                                      params.get("vy", 0.4)),
                            kappa=params.get("kappa", 0.05))
    if kind == "taxis2d":
        allowed = {"chi_a", "chi_b", "mu", "nu", "d1", "alpha1"}
        _check_params(params, allowed)
        return TaxisCoupledModel(**params)
    raise ConfigError(f"unknown model kind {kind!r}")  # pragma: no cover


def _check_params(params, allowed):
    bad = sorted(set(params) - allowed)
    if bad:
        raise ConfigError(f"unknown [model] parameters {bad}")


def initial_condition(cfg: RunConfig, model, space: DGSpace):
    """Starting state: the exact solution at t=0 for manufactured
    models, otherwise a Gaussian bump in one species on a flat
    background of zeros."""
    exact = getattr(model, "exact", None)
    if exact is not None:
        return space.project(lambda x: exact(x, 0.0))

    species = cfg.initial_species
    if not species:
        species = getattr(model, "seed_species", model.species[0])
    if species not in model.species:
        raise ConfigError(f"initial species {species!r} not in "
                          f"{model.species}")
    idx = model.species.index(species)
    center = tuple(cfg.initial_center)
    if len(center) < space.mesh.dim:
        raise ConfigError(f"initial center {center} has fewer than "
                          f"{space.mesh.dim} coordinates")
    center = center[:space.mesh.dim]
    bump = gaussian_bump(center, cfg.initial_width, cfg.initial_amplitude)

    def values(x):
        out = np.zeros(x.shape[:-1] + (model.n_species,))
        out[..., idx] = bump(x)
        return out

    return space.project(values)


def _newton_kwargs(cfg: RunConfig) -> dict:
    return {"rtol": cfg.newton_rtol, "atol": cfg.newton_atol,
            "maxiter": cfg.newton_maxiter, "gmres_rtol": cfg.gmres_rtol,
            "gmres_restart": cfg.gmres_restart,
            "gmres_maxiter": cfg.gmres_maxiter}


# ----------------------------------------------------------------- plumbing

def resolve_out_dir(cfg: RunConfig, override: str | None = None) -> str:
    """--out flag beats the config, which beats $TAXISDG_OUT, which
    beats ./out."""
    out = override or cfg.out_dir or os.environ.get("TAXISDG_OUT") or "out"
    os.makedirs(out, exist_ok=True)
    return out


class _LogFile:
    """Context manager that tees the package logger into out/<name>."""

    def __init__(self, out: str, name: str):
        self.path = os.path.join(out, name)

    def __enter__(self):
        self.handler = logging.FileHandler(self.path, mode="w")
        self.handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        log.addHandler(self.handler)
        if log.level in (logging.NOTSET, logging.WARNING):
            log.setLevel(logging.INFO)
        return self

    def __exit__(self, *exc):
        log.removeHandler(self.handler)
        self.handler.close()
        return False


def _versions() -> dict:
    from . import __version__
    return {"taxisdg": __version__, "numpy": np.__version__,
            "python": platform.python_version()}


def _write_summary(out: str, cfg: RunConfig, command: str, payload: dict,
                   status: str = "ok") -> dict:
    summary = {"command": command, "status": status,
               "config_hash": cfg.config_hash(), "seed": cfg.seed,
               "versions": _versions()}
    summary.update(payload)
    path = os.path.join(out, "summary.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    cfg.save(os.path.join(out, "config.ini"))
    return summary


# ---------------------------------------------------------------- commands

def cmd_run(cfg: RunConfig, out_dir: str | None = None) -> dict:
    """Time-march one configuration, dumping field snapshots and a mass
    balance trace."""
    out = resolve_out_dir(cfg, out_dir)
    with _LogFile(out, "run.log"):
        mesh = build_mesh(cfg)
        model = build_model(cfg)
        space = DGSpace(mesh, cfg.order, model.n_species)
        scheme = FluxScheme(cfg.flux, ip_eta0=cfg.ip_eta0)
        op = DiscreteOperator(space, model, scheme, nthreads=cfg.threads)
        log.info("run: %s on %s (%d elements, order %d, %s flux, "
                 "%d threads)", cfg.model_kind, cfg.mesh_kind,
                 mesh.n_elements, cfg.order, cfg.flux, cfg.threads)

        fn0 = initial_condition(cfg, model, space)
        names = list(model.species)
        snapshots = []
        last_snap = [-1]
        balance = [(0.0, fn0.species_totals())]

        def snap(step: int, fn):
            path = os.path.join(out, f"snapshot_{step:06d}.vtk")
            write_vtk(path, fn, names=names)
            snapshots.append(os.path.basename(path))
            last_snap[0] = step

        snap(0, fn0)

        def on_step(step, t, U):
            fn = space.function(U)
            balance.append((t, fn.species_totals()))
            if cfg.cadence > 0 and step % cfg.cadence == 0:
                snap(step, fn)
                log.info("step %d, t=%.6f", step, t)

        try:
            res = integrate(op, fn0.coeffs, 0.0, cfg.t_end, cfg.dt,
                            order=cfg.tableau,
                            newton_kwargs=_newton_kwargs(cfg),
                            callback=on_step)
        except SolverError as err:
            log.error("solve failed: %s", err)
            _write_summary(out, cfg, "run",
                           {"error": str(err),
                            "diagnostics": dict(err.diagnostics)},
                           status="failed")
            raise

        final = space.function(res.U)
        if last_snap[0] != res.steps:
            snap(res.steps, final)

        with open(os.path.join(out, "balance.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time"] + [f"total_{s}" for s in names])
            for t, totals in balance:
                w.writerow([f"{t:.10g}"] + [f"{v:.16e}" for v in totals])

        payload = {
            "model": cfg.model_kind, "mesh": cfg.mesh_kind,
            "elements": mesh.n_elements, "order": cfg.order,
            "flux": cfg.flux, "threads": cfg.threads,
            "steps": res.steps, "t_final": res.t,
            "newton_iterations": res.newton_iterations,
            "gmres_iterations": res.gmres_iterations,
            "wall_time": res.wall_time,
            "snapshots": snapshots,
            "final_totals": dict(zip(names,
                                     map(float, final.species_totals()))),
        }
        log.info("done: %d steps, %.2fs wall", res.steps, res.wall_time)
        return _write_summary(out, cfg, "run", payload)


def cmd_eoc(cfg: RunConfig, out_dir: str | None = None) -> dict:
    """Convergence study over a refinement hierarchy, one column triple
    per polynomial order, written as eoc.csv."""
    out = resolve_out_dir(cfg, out_dir)
    with _LogFile(out, "eoc.log"):
        mesh0 = build_mesh(cfg)
        model = build_model(cfg)
        scheme = FluxScheme(cfg.flux, ip_eta0=cfg.ip_eta0)
        exact = getattr(model, "exact", None)
        initial = None
        if exact is None:
            # no closed form: compare against a finer reference run
            initial = _bump_callable(cfg, model, mesh0.dim)
        nk = _newton_kwargs(cfg)

        studies = []
        for order in cfg.orders:
            log.info("eoc: order %d, %d levels, %s flux", order,
                     cfg.levels, cfg.flux)
            study = run_eoc_study(model, mesh0, order, scheme,
                                  t_end=cfg.t_end, dt0=cfg.dt,
                                  levels=cfg.levels, initial=initial,
                                  exact=exact, tableau_order=cfg.tableau,
                                  newton_kwargs=nk)
            for lvl, err in zip(study.levels, study.errors):
                log.info("  order %d level %d: error %s", order, lvl, err)
            studies.append(study)

        csv_path = os.path.join(out, "eoc.csv")
        write_eoc_csv(csv_path, studies)
        payload = {
            "table": os.path.basename(csv_path),
            "mode": "exact" if exact is not None else "reference",
            "orders": list(cfg.orders), "levels": cfg.levels,
            "results": [{
                "order": s.order,
                "errors": [None if math.isnan(e) else e for e in s.errors],
                "rates": [None if not math.isfinite(r) else r
                          for r in s.rates],
                "failures": s.failures,
            } for s in studies],
        }
        return _write_summary(out, cfg, "eoc", payload)


def _bump_callable(cfg: RunConfig, model, dim: int):
    species = cfg.initial_species or \
        getattr(model, "seed_species", model.species[0])
    if species not in model.species:
        raise ConfigError(f"initial species {species!r} not in "
                          f"{model.species}")
    idx = model.species.index(species)
    center = tuple(cfg.initial_center)[:dim]
    if len(center) < dim:
        raise ConfigError("initial center has too few coordinates")
    bump = gaussian_bump(center, cfg.initial_width, cfg.initial_amplitude)

    def values(x):
        out = np.zeros(x.shape[:-1] + (model.n_species,))
        out[..., idx] = bump(x)
        return out

    return values


def cmd_compare_fluxes(cfg: RunConfig, out_dir: str | None = None) -> dict:
    """Accuracy-versus-cost sweep over every flux scheme on the same
    refinement hierarchy; a failing combination is recorded and the
    sweep continues."""
    out = resolve_out_dir(cfg, out_dir)
    with _LogFile(out, "compare_fluxes.log"):
        model = build_model(cfg)
        exact = getattr(model, "exact", None)
        if exact is None:
            raise ConfigError(
                "compare-fluxes needs a model with a closed-form "
                "solution (heat2d, heat3d, advdiff2d, taxis2d)")
        meshes = [build_mesh(cfg)]
        for _ in range(cfg.levels - 1):
            meshes.append(meshes[-1].refine_uniform())
        nk = _newton_kwargs(cfg)

        rows = []
        for name in SCHEME_NAMES:
            scheme = FluxScheme(name, ip_eta0=cfg.ip_eta0)
            for lvl, mesh in enumerate(meshes):
                dt = cfg.dt / 2 ** lvl
                space = DGSpace(mesh, cfg.order, model.n_species)
                op = DiscreteOperator(space, model, scheme,
                                      nthreads=cfg.threads)
                U0 = space.project(lambda x: exact(x, 0.0)).coeffs
                tic = time.process_time()
                try:
                    res = integrate(op, U0, 0.0, cfg.t_end, dt,
                                    order=cfg.tableau, newton_kwargs=nk)
                    cpu = time.process_time() - tic
                    err = l2_error(space.function(res.U), exact, cfg.t_end)
                    rows.append((name, lvl, mesh.n_elements, cpu, err,
                                 "ok"))
                    log.info("%s level %d: %.3fs cpu, error %.4e",
                             name, lvl, cpu, err)
                except SolverError as e:
                    cpu = time.process_time() - tic
                    rows.append((name, lvl, mesh.n_elements, cpu,
                                 math.nan, "failed"))
                    log.warning("%s level %d failed: %s", name, lvl, e)

        csv_path = os.path.join(out, "flux_comparison.csv")
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["flux", "level", "elements", "cpu_time",
                        "l2_error", "status"])
            for name, lvl, ne, cpu, err, status in rows:
                w.writerow([name, lvl, ne, f"{cpu:.6f}",
                            "---" if math.isnan(err) else f"{err:.6e}",
                            status])

        payload = {
            "table": os.path.basename(csv_path),
            "order": cfg.order, "levels": cfg.levels,
            "fluxes": list(SCHEME_NAMES),
            "failed": [(r[0], r[1]) for r in rows if r[5] == "failed"],
        }
        return _write_summary(out, cfg, "compare-fluxes", payload)


def cmd_scale(cfg: RunConfig, out_dir: str | None = None,
              repeats: int = 3) -> dict:
    """Strong-scaling measurement: a fixed short march (cfg.steps steps)
    repeated over cfg.thread_counts, best time per count."""
    out = resolve_out_dir(cfg, out_dir)
    with _LogFile(out, "scale.log"):
        mesh = build_mesh(cfg)
        model = build_model(cfg)
        space = DGSpace(mesh, cfg.order, model.n_species)
        scheme = FluxScheme(cfg.flux, ip_eta0=cfg.ip_eta0)
        if mesh.n_elements < 20000:
            log.warning("scaling mesh has only %d elements; timings "
                        "below ~20k elements are dominated by overhead",
                        mesh.n_elements)
        npart = max(cfg.thread_counts)
        op = DiscreteOperator(space, model, scheme,
                              nthreads=cfg.thread_counts[0],
                              npartitions=npart)
        fn0 = initial_condition(cfg, model, space)
        nk = _newton_kwargs(cfg)
        steps_seen = []

        def make_workload(nthreads: int):
            # same partition count throughout so every run sums in the
            # same order
            op.set_threads(nthreads, npart)

            def job():
                res = integrate(op, fn0.coeffs, 0.0, math.inf, cfg.dt,
                                order=cfg.tableau, newton_kwargs=nk,
                                n_steps=cfg.steps)
                steps_seen.append(res.steps)

            return job

        log.info("scale: %d elements, order %d, %d steps, threads %s",
                 mesh.n_elements, cfg.order, cfg.steps,
                 list(cfg.thread_counts))
        rows = scaling_study(make_workload, cfg.thread_counts,
                             repeats=repeats)
        csv_path = os.path.join(out, "scaling.csv")
        write_scaling_csv(csv_path, rows)
        for r in rows:
            log.info("threads %d: %.3fs%s", r.threads, r.cpu_time,
                     "" if r.speedup is None else
                     f" (speedup {r.speedup:.2f})")

        payload = {
            "table": os.path.basename(csv_path),
            "elements": mesh.n_elements, "order": cfg.order,
            "steps": cfg.steps, "partitions": npart,
            "steps_per_run": sorted(set(steps_seen)),
            "thread_counts": list(cfg.thread_counts),
            "timings": [{"threads": r.threads, "cpu_time": r.cpu_time,
                         "speedup": r.speedup} for r in rows],
        }
        return _write_summary(out, cfg, "scale", payload)
