"""Accuracy, conservation, and scaling measurement.

Error norms are broken L2 norms over all species.  Convergence studies
come in two modes: against a known closed-form solution, or against a
reference solve on a once-more-refined mesh (for problems without an
exact solution), with the time step halved per level so the spatial
error dominates.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .fespace import DGSpace, DiscreteFunction
from .flux import FluxScheme
from .operator import DiscreteOperator
from .quadrature import volume_rule
from .timeint import SolverError, integrate

__all__ = ["l2_error", "l2_difference", "eoc", "EOCStudy",
           "run_eoc_study", "conservation_audit", "ScalingRow",
           "scaling_study", "write_eoc_csv", "write_scaling_csv"]


def l2_error(fn: DiscreteFunction, exact, t: float = 0.0,
             quad_degree: int | None = None,
             per_species: bool = False):
    """Broken L2 distance between a DG field and exact(x, t)."""
    space = fn.space
    mesh = space.mesh
    degree = 2 * space.order + 4 if quad_degree is None else quad_degree
    rule = volume_rule(mesh.dim, degree)
    phi = space.basis.eval(rule.points)
    J, detJ, _ = mesh.jacobians()
    v0 = mesh.vertices[mesh.elements[:, 0]]
    x = v0[:, None, :] + np.einsum("eij,qj->eqi", J, rule.points)
    ne, nq = x.shape[:2]
    vals = np.einsum("esi,qi->eqs", fn.coeffs, phi)
    ex = np.asarray(exact(x.reshape(ne * nq, -1), t), dtype=float)
    ex = ex.reshape(ne, nq, space.n_species)
    d2 = (vals - ex) ** 2
    per = np.einsum("q,eqs,e->s", rule.weights, d2, detJ)
    if per_species:
        return np.sqrt(per)
    return float(math.sqrt(per.sum()))


def l2_difference(coarse: DiscreteFunction, fine: DiscreteFunction,
                  quad_degree: int | None = None) -> float:
    """Broken L2 distance between fields on nested meshes.

    `fine` must live on a uniform refinement (any depth) of the coarse
    mesh; integration runs on the fine mesh, with the coarse field
    evaluated through the ancestor chain.
    """
    cs, fs = coarse.space, fine.space
    if cs.n_species != fs.n_species:
        raise ValueError("species counts differ")
    amap = fs.mesh.ancestor_map(cs.mesh)
    degree = 2 * max(cs.order, fs.order) + 4 if quad_degree is None \
        else quad_degree
    rule = volume_rule(fs.mesh.dim, degree)
    nq = len(rule)
    J, detJ, _ = fs.mesh.jacobians()
    v0 = fs.mesh.vertices[fs.mesh.elements[:, 0]]
    x = v0[:, None, :] + np.einsum("eij,qj->eqi", J, rule.points)
    ne = fs.mesh.n_elements
    phi_f = fs.basis.eval(rule.points)
    vals_f = np.einsum("esi,qi->eqs", fine.coeffs, phi_f)

    elems_c = np.repeat(amap, nq)
    xi_c = cs.mesh.to_reference(elems_c, x.reshape(ne * nq, -1))
    phi_c = cs.basis.eval(xi_c)                       # (ne*nq, nb_c)
    vals_c = np.einsum("nsi,ni->ns", coarse.coeffs[elems_c], phi_c)
    d2 = (vals_f - vals_c.reshape(ne, nq, -1)) ** 2
    return float(math.sqrt(np.einsum("q,eqs,e->", rule.weights, d2, detJ)))


def eoc(errors, h) -> np.ndarray:
    """Observed convergence rates between consecutive rows."""
    errors = np.asarray(errors, dtype=float)
    h = np.asarray(h, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(errors[:-1] / errors[1:]) / np.log(h[:-1] / h[1:])


@dataclass
class EOCStudy:
    order: int
    scheme: str
    levels: list
    n_elements: list
    h: list
    dt: list
    errors: list
    times: list = field(default_factory=list)
    rates: np.ndarray = field(default=None)
    failures: list = field(default_factory=list)

    def finalize(self):
        self.rates = eoc(self.errors, self.h)
        return self


def run_eoc_study(model, mesh0, order: int, scheme: FluxScheme,
                  t_end: float, dt0: float, levels: int,
                  initial=None, exact=None, tableau_order: int = 3,
                  reference_order: int | None = None,
                  newton_kwargs: dict | None = None,
                  verbose: bool = False) -> EOCStudy:
    """Solve a refinement hierarchy and report errors and rates.

    With `exact` (a callable (x, t) -> values), levels 0..levels-1 are
    compared against it at t_end.  Without it, a reference solution is
    computed on level `levels` at polynomial order
    min(order + 1, 3) (overridable) and the coarser levels are compared
    against that.  The time step starts at dt0 and halves per level; a
    level whose solve fails is recorded and skipped rather than
    aborting the study.
    """
    if exact is None and initial is None:
        raise ValueError("reference mode needs initial data")
    if initial is None:
        initial = lambda x: exact(x, 0.0)
    meshes = [mesh0]
    for _ in range(levels if exact is None else levels - 1):
        meshes.append(meshes[-1].refine_uniform())

    ns = model.n_species

    def solve(mesh, p_order, dt):
        space = DGSpace(mesh, p_order, ns)
        op = DiscreteOperator(space, model, scheme)
        U0 = space.project(initial).coeffs
        res = integrate(op, U0, 0.0, t_end, dt, order=tableau_order,
                        newton_kwargs=newton_kwargs)
        return space.function(res.U)

    ref = None
    if exact is None:
        ref_order = reference_order if reference_order is not None \
            else min(order + 1, 3)
        ref = solve(meshes[-1], ref_order, dt0 / 2 ** levels)

    study = EOCStudy(order, scheme.name, [], [], [], [], [])
    n_solve = levels if exact is None else levels
    for lvl in range(n_solve):
        mesh = meshes[lvl]
        dt = dt0 / 2 ** lvl
        tic = time.perf_counter()
        try:
            sol = solve(mesh, order, dt)
            err = (l2_error(sol, exact, t_end) if exact is not None
                   else l2_difference(sol, ref))
        except SolverError as e:
            study.failures.append((lvl, str(e)))
            err = math.nan
        study.levels.append(lvl)
        study.n_elements.append(mesh.n_elements)
        study.h.append(float(mesh.diameters.max()))
        study.dt.append(dt)
        study.errors.append(err)
        study.times.append(time.perf_counter() - tic)
        if verbose:
            print(f"  level {lvl}: {mesh.n_elements} elements, "
                  f"error {err:.4e}")
    return study.finalize()


def conservation_audit(op: DiscreteOperator, U0, t0: float, t1: float,
                       dt: float, tableau_order: int = 2,
                       newton_kwargs: dict | None = None) -> dict:
    """Track per-species totals int u_s dx along an integration.

    Returns initial and final totals, their change, and the sampled
    trajectory; the caller owns the balance bookkeeping (sources and
    prescribed boundary fluxes) to compare `change` against.
    """
    space = op.space
    U0 = np.array(getattr(U0, "coeffs", U0), dtype=float)
    trajectory = [(t0, space.function(U0).species_totals())]

    def record(step, t, U):
        trajectory.append((t, space.function(U).species_totals()))

    res = integrate(op, U0, t0, t1, dt, order=tableau_order,
                    newton_kwargs=newton_kwargs, callback=record)
    totals0 = trajectory[0][1]
    totals1 = trajectory[-1][1]
    return {
        "totals_initial": totals0,
        "totals_final": totals1,
        "change": totals1 - totals0,
        "trajectory": trajectory,
        "result": res,
    }


@dataclass
class ScalingRow:
    threads: int
    cpu_time: float
    speedup: float | None


def scaling_study(make_workload, thread_counts, repeats: int = 3,
                  blas_threads: int = 1) -> list[ScalingRow]:
    """Strong scaling over thread counts with a fixed problem.

    make_workload(nthreads) returns a zero-argument callable running
    the complete fixed-size job; the fastest of `repeats` runs counts.
    BLAS pools are pinned (default to one thread) so measured scaling
    reflects the solver's own threading.
    """
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        import contextlib

        def threadpool_limits(limits):
            return contextlib.nullcontext()

    rows = []
    base = None
    with threadpool_limits(limits=blas_threads):
        for nt in thread_counts:
            job = make_workload(nt)
            best = math.inf
            for _ in range(repeats):
                tic = time.perf_counter()
                job()
                best = min(best, time.perf_counter() - tic)
            speedup = None if base is None else base / best
            if base is None:
                base = best
            rows.append(ScalingRow(int(nt), best, speedup))
    return rows


# -- tabular output -----------------------------------------------------


def write_eoc_csv(path, studies: list[EOCStudy]):
    """Wide convergence table: one row per level with a time, error, and
    rate column triple per study (ordered as given).  Unavailable rates
    print as "---" in the style of the usual convergence tables."""
    if not studies:
        raise ValueError("no studies to write")
    nrows = max(len(s.errors) for s in studies)
    header = ["level", "elements"]
    for s in studies:
        header += [f"time_p{s.order}", f"error_p{s.order}", f"eoc_p{s.order}"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        lead = max(studies, key=lambda s: len(s.errors))
        for i in range(nrows):
            row = [lead.levels[i], lead.n_elements[i]]
            for s in studies:
                if i < len(s.errors):
                    e = s.errors[i]
                    tm = s.times[i] if i < len(s.times) else math.nan
                    row.append("---" if math.isnan(tm) else f"{tm:.3f}")
                    row.append("---" if math.isnan(e) else f"{e:.6e}")
                    row.append(f"{s.rates[i - 1]:.5f}"
                               if 0 < i < len(s.errors) and
                               math.isfinite(s.rates[i - 1]) else "---")
                else:
                    row += ["---", "---", "---"]
            w.writerow(row)


def write_scaling_csv(path, rows: list[ScalingRow]):
    """Threads / cpu_time / speedup table; the base row's speedup prints
    as "---"."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threads", "cpu_time", "speedup"])
        for r in rows:
            w.writerow([r.threads, f"{r.cpu_time:.6f}",
                        "---" if r.speedup is None else f"{r.speedup:.2f}"])
