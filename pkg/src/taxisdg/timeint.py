r"""Implicit time integration: diagonally implicit Runge-Kutta steps
with Jacobian-free Newton-Krylov stage solves.

Each stage solves V = base + dt a_ii f(t + c_i dt, V) by an inexact
Newton iteration whose linear systems are handled by restarted GMRES;
Jacobian action is approximated by one-sided differencing of f along
the Krylov direction.  Stage derivatives are recovered algebraically,
K_i = (V - base) / (dt a_ii), and the update U + dt sum_i b_i K_i then
inherits every linear invariant of f up to the Newton tolerance.

The built-in tableaux (orders 2, 3, 4) are stiffly accurate SDIRK
methods with constant diagonal, L-stable, so the stability function
R(z) = 1 + z b^T (I - z A)^{-1} 1 vanishes at z -> -infinity.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ButcherTableau", "DIRK_TABLEAUX", "dirk_tableau",
           "stability_function", "GmresInfo", "gmres_solve",
           "NewtonInfo", "newton_solve", "SolverError",
           "StepStats", "dirk_step", "integrate", "IntegrationResult"]


class SolverError(RuntimeError):
    """Nonlinear or linear solve failure, with diagnostics attached."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# -- tableaux -----------------------------------------------------------


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    order: int
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        s = len(b)
        if A.shape != (s, s) or c.shape != (s,):
            raise ValueError("inconsistent tableau dimensions")
        if np.any(np.triu(A, 1) != 0):
            raise ValueError("tableau is not diagonally implicit")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n_stages(self) -> int:
        return len(self.b)

    @property
    def stiffly_accurate(self) -> bool:
        return bool(np.array_equal(self.A[-1], self.b))


def _sdirk2() -> ButcherTableau:
    a = 1.0 - math.sqrt(2.0) / 2.0
    A = np.array([[a, 0.0], [1.0 - a, a]])
    return ButcherTableau("sdirk2", 2, A, A[-1], np.array([a, 1.0]))


def _sdirk3() -> ButcherTableau:
    # diagonal is the root of g^3 - 3 g^2 + 3/2 g - 1/6 in (1/6, 1/2)
    g = 0.435866521508458999416019
    c2 = 0.5 * (1.0 + g)
    b1 = -0.25 * (6.0 * g * g - 16.0 * g + 1.0)
    b2 = 0.25 * (6.0 * g * g - 20.0 * g + 5.0)
    A = np.array([[g, 0.0, 0.0],
                  [c2 - g, g, 0.0],
                  [b1, b2, g]])
    return ButcherTableau("sdirk3", 3, A, A[-1], np.array([g, c2, 1.0]))


def _sdirk4() -> ButcherTableau:
    A = np.array([
        [1 / 4, 0, 0, 0, 0],
        [1 / 2, 1 / 4, 0, 0, 0],
        [17 / 50, -1 / 25, 1 / 4, 0, 0],
        [371 / 1360, -137 / 2720, 15 / 544, 1 / 4, 0],
        [25 / 24, -49 / 48, 125 / 16, -85 / 12, 1 / 4]])
    c = np.array([1 / 4, 3 / 4, 11 / 20, 1 / 2, 1.0])
    return ButcherTableau("sdirk4", 4, A, A[-1], c)


DIRK_TABLEAUX: dict[int, ButcherTableau] = {
    2: _sdirk2(), 3: _sdirk3(), 4: _sdirk4()}


def dirk_tableau(order: int) -> ButcherTableau:
    try:
        return DIRK_TABLEAUX[order]
    except KeyError:
        raise ValueError(
            f"no built-in DIRK tableau of order {order}; available: "
            f"{sorted(DIRK_TABLEAUX)}") from None


def stability_function(tableau: ButcherTableau, z) -> np.ndarray:
    """R(z) = 1 + z b^T (I - z A)^{-1} 1, vectorized over z (complex
    allowed)."""
    z = np.asarray(z)
    zf = z.reshape(-1)
    s = tableau.n_stages
    I = np.eye(s)
    M = I[None] - zf[:, None, None] * tableau.A[None]
    sol = np.linalg.solve(M, np.ones((len(zf), s, 1)))[:, :, 0]
    R = 1.0 + zf * (sol @ tableau.b)
    return R.reshape(z.shape)


# -- linear solver ------------------------------------------------------


@dataclass
class GmresInfo:
    converged: bool
    iterations: int
    residual: float
    initial_residual: float


def gmres_solve(matvec, b: np.ndarray, x0: np.ndarray | None = None,
                rtol: float = 1e-6, atol: float = 0.0,
                restart: int = 30, maxiter: int = 200):
    """Restarted GMRES with modified Gram-Schmidt and Givens rotations.

    Solves matvec(x) = b for flat float arrays.  Returns (x, GmresInfo);
    convergence is ||r|| <= max(rtol * ||b||, atol).
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = float(np.linalg.norm(b))
    target = max(rtol * bnorm, atol)
    if bnorm == 0.0:
        return np.zeros(n), GmresInfo(True, 0, 0.0, 0.0)

    r = b - matvec(x) if x.any() else b.copy()
    beta = float(np.linalg.norm(r))
    beta0 = beta
    total = 0
    while beta > target and total < maxiter:
        m = min(restart, maxiter - total)
        V = np.empty((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        j_used = 0
        for j in range(m):
            w = matvec(V[j])
            for i in range(j + 1):
                H[i, j] = float(w @ V[i])
                w -= H[i, j] * V[i]
            hnext = float(np.linalg.norm(w))
            H[j + 1, j] = hnext
            happy = hnext <= 1e-14 * max(1.0, float(np.abs(H[:j + 1, j]).max()))
            if not happy:
                V[j + 1] = w / hnext
            # previous rotations touch rows <= j only
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            rho = math.hypot(H[j, j], H[j + 1, j])
            if rho == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j], sn[j] = H[j, j] / rho, H[j + 1, j] / rho
            H[j, j] = rho
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            j_used = j + 1
            total += 1
            if abs(g[j + 1]) <= target or happy:
                break
        # solve the triangular system for the correction
        y = np.zeros(j_used)
        for i in range(j_used - 1, -1, -1):
            y[i] = (g[i] - H[i, i + 1:j_used] @ y[i + 1:j_used]) / H[i, i]
        x = x + y @ V[:j_used]
        beta_prev = beta
        r = b - matvec(x)
        beta = float(np.linalg.norm(r))
        if beta > 0.99 * beta_prev:
            # stagnated (e.g. at the differencing noise floor); stop
            # early instead of spending the full budget
            break
    return x, GmresInfo(beta <= target, total, beta, beta0)


# -- nonlinear solver ---------------------------------------------------


@dataclass
class NewtonInfo:
    converged: bool
    iterations: int
    residual: float
    initial_residual: float
    gmres_iterations: int
    history: list = field(default_factory=list)


_SQRT_EPS = math.sqrt(np.finfo(float).eps)


def newton_solve(G, U0: np.ndarray, rtol: float = 1e-8,
                 atol: float = 1e-12, maxiter: int = 25,
                 gmres_rtol: float = 1e-4, gmres_restart: int = 30,
                 gmres_maxiter: int = 200):
    """Inexact Newton with Jacobian-free GMRES on flat arrays.

    The Jacobian action along v is (G(U + eps v) - G(U)) / eps with
    eps = sqrt(machine eps) (1 + ||U||) / ||v||.  Stops when
    ||G|| <= atol + rtol ||G(U0)||.  Returns (U, NewtonInfo); raises
    SolverError when the iteration stalls or the budget is exhausted.

    The default linear forcing of 1e-4 is deliberately loose: the
    differencing noise floor rises with stiffness, and the outer
    iteration recovers the accuracy at a fraction of the Krylov cost.
    """
    U = np.array(U0, dtype=float)
    GU = G(U)
    res0 = float(np.linalg.norm(GU))
    if not math.isfinite(res0):
        raise SolverError("Newton residual is not finite",
                          {"residual_history": [res0]})
    target = atol + rtol * res0
    info = NewtonInfo(False, 0, res0, res0, 0, [res0])
    res = res0
    while res > target:
        if info.iterations >= maxiter:
            raise SolverError(
                f"Newton did not converge in {maxiter} iterations "
                f"(residual {res:.3e}, target {target:.3e})",
                {"residual_history": info.history, "target": target,
                 "gmres_iterations": info.gmres_iterations})
        Unorm = float(np.linalg.norm(U))

        def jv(v):
            vnorm = float(np.linalg.norm(v))
            if vnorm == 0.0:
                return np.zeros_like(v)
            eps = _SQRT_EPS * (1.0 + Unorm) / vnorm
            return (G(U + eps * v) - GU) / eps

        dU, ginfo = gmres_solve(jv, -GU, rtol=gmres_rtol,
                                restart=gmres_restart,
                                maxiter=gmres_maxiter)
        info.gmres_iterations += ginfo.iterations
        if not ginfo.converged:
            raise SolverError(
                f"GMRES stalled at relative residual "
                f"{ginfo.residual / max(ginfo.initial_residual, 1e-300):.3e} "
                f"after {ginfo.iterations} iterations",
                {"newton_iteration": info.iterations,
                 "gmres_residual": ginfo.residual,
                 "residual_history": info.history})
        U = U + dU
        GU = G(U)
        res = float(np.linalg.norm(GU))
        info.iterations += 1
        info.history.append(res)
        if not math.isfinite(res):
            raise SolverError(
                "Newton residual is not finite",
                {"residual_history": info.history})
    info.converged = True
    info.residual = res
    return U, info


# -- DIRK stepping ------------------------------------------------------


@dataclass
class StepStats:
    newton_iterations: int = 0
    gmres_iterations: int = 0
    stage_residuals: list = field(default_factory=list)


def dirk_step(op, U: np.ndarray, t: float, dt: float,
              tableau: ButcherTableau, newton_kwargs: dict | None = None):
    """One DIRK step of the semidiscrete system dU/dt = op.apply_f(U, t).

    Returns (U_next, StepStats).
    """
    nk = dict(newton_kwargs or {})
    shape = U.shape
    A, b, c = tableau.A, tableau.b, tableau.c
    s = tableau.n_stages
    K = np.empty((s,) + shape)
    stats = StepStats()
    for i in range(s):
        base = U + dt * np.einsum("j,j...->...", A[i, :i], K[:i]) \
            if i else U.copy()
        aii = A[i, i]
        ti = t + c[i] * dt

        def G(vflat):
            V = vflat.reshape(shape)
            return (V - base - dt * aii * op.apply_f(V, ti)).ravel()

        try:
            Vflat, ninfo = newton_solve(G, base.ravel(), **nk)
        except SolverError as err:
            err.diagnostics.update({"stage": i, "time": t, "dt": dt})
            raise
        K[i] = (Vflat.reshape(shape) - base) / (dt * aii)
        stats.newton_iterations += ninfo.iterations
        stats.gmres_iterations += ninfo.gmres_iterations
        stats.stage_residuals.append(ninfo.residual)
    U_next = U + dt * np.einsum("j,j...->...", b, K)
    return U_next, stats


@dataclass
class IntegrationResult:
    U: np.ndarray
    t: float
    steps: int
    newton_iterations: int
    gmres_iterations: int
    wall_time: float


def integrate(op, U0: np.ndarray, t0: float, t1: float, dt: float,
              order: int = 3, tableau: ButcherTableau | None = None,
              newton_kwargs: dict | None = None, callback=None,
              n_steps: int | None = None):
    """March from t0 to t1 with fixed steps (the final step is shortened
    to land on t1).  callback(step_index, t, U) runs after each step.
    With n_steps the march is exactly that many dt-sized steps and t1 is
    ignored."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    tab = tableau if tableau is not None else dirk_tableau(order)
    U = np.array(getattr(U0, "coeffs", U0), dtype=float)
    t = float(t0)
    steps = 0
    newton = 0
    gmres = 0
    tic = time.perf_counter()

    def more():
        if n_steps is not None:
            return steps < n_steps
        return t < t1 - 1e-12 * max(1.0, abs(t1))

    while more():
        step_dt = dt if n_steps is not None else min(dt, t1 - t)
        U, stats = dirk_step(op, U, t, step_dt, tab, newton_kwargs)
        t += step_dt
        steps += 1
        newton += stats.newton_iterations
        gmres += stats.gmres_iterations
        if callback is not None:
            callback(steps, t, U)
    return IntegrationResult(U, t, steps, newton, gmres,
                             time.perf_counter() - tic)
