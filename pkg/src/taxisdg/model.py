r"""Reaction-diffusion-taxis model definitions.

All models share the conservation form

.. math::

    \partial_t U = -\nabla\cdot(F(U,\nabla U) - A\,\nabla U) + S(U),

with a diagonal diffusivity A, a convective (tactic) flux F that is
linear in the gradients of the attracting species, and a reaction source
S.  The tactic sensitivity is the saturating ratio

    chi(x, y, a, b) = a * x / (max(y, 0) + b),

so the flux of a chasing species x up the gradient of an attractor y
levels off once y is large against the threshold b.

Six-species plaque wall model (species order n1, n2, n3, c1, c2, c3):
immune cells n1 chase the chemoattractant c1 and oxidized lipid c3,
smooth muscle cells n2 chase c1 and retreat down the n1 gradient, debris
n3 collects dying cells, c1 is consumed by both cell types and produced
from debris, and native lipid c2 oxidizes into c3.  Boundary data
prescribes diffusive normal fluxes: cell inflow through the walls is
gated by a (possibly smoothed) Heaviside in c1, and lipid enters through
the GAMMA1_IN strip at constant rate sigma.  Prescribed values use the
inward-normal sign convention: a negative value feeds mass into the
domain.

The three-species reduction keeps (n1, n3, c1) and drops the boundary
lipid drive; runs are triggered by initial debris instead.

Manufactured models (heat, advection-diffusion, and a two-species taxis
system with synthesized forcing) carry their exact solution and impose
Dirichlet data through exterior traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .mesh import BoundaryTag, is_gamma1

__all__ = [
    "PlaqueParams", "PlaqueModel", "ReducedModel", "HeatModel",
    "AdvDiffModel", "TaxisCoupledModel", "manufactured_model", "chi",
    "smooth_heaviside", "gaussian_bump",
]


def chi(x, y, a: float, b: float):
    """Tactic sensitivity a*x/(max(y,0)+b)."""
    return a * x / (np.maximum(y, 0.0) + b)


def smooth_heaviside(s, eps: float):
    """Heaviside step; logistic smoothing of width eps when eps > 0."""
    if eps == 0.0:
        return np.where(s > 0.0, 1.0, 0.0)
    return 1.0 / (1.0 + np.exp(np.clip(-s / eps, -60.0, 60.0)))


def gaussian_bump(center, width: float, amplitude: float = 1.0):
    """Radial Gaussian amplitude*exp(-|x-center|^2 / (2 width^2))."""
    c = np.asarray(center, dtype=float)

    def f(x: np.ndarray) -> np.ndarray:
        r2 = ((x - c) ** 2).sum(axis=-1)
        return amplitude * np.exp(-r2 / (2.0 * width * width))

    return f


@dataclass
class PlaqueParams:
    """Coefficients of the plaque wall model.

    The chi*_a / chi*_b pairs are the strength and threshold of the four
    tactic couplings: n1 toward c1, n1 toward c3, n2 toward c1, and n2
    away from n1.  gamma < 0 is the debris consumption rate constant.
    eps_h = 0 keeps the boundary-gate Heaviside sharp.
    """

    mu1: float = 1e-3
    mu2: float = 1e-3
    mu3: float = 1e-3
    nu1: float = 1e-2
    nu2: float = 1e-2
    nu3: float = 1e-2
    d1: float = 0.05
    d2: float = 0.05
    alpha1: float = 0.1
    alpha2: float = 0.1
    k_ox: float = 0.5
    gamma: float = -0.1
    f1_const: float = 0.1
    chi11_a: float = 5e-3
    chi11_b: float = 0.1
    chi13_a: float = 5e-3
    chi13_b: float = 0.1
    chi21_a: float = 5e-3
    chi21_b: float = 0.1
    chi2n_a: float = 5e-3
    chi2n_b: float = 0.1
    beta1: float = 1.0
    beta2: float = 1.0
    sigma: float = 1.0
    c1_star: float = 0.05
    c1_starstar: float = 0.05
    eps_h: float = 0.0

    def __post_init__(self):
        for name in ("mu1", "mu2", "mu3", "nu1", "nu2", "nu3"):
            if getattr(self, name) <= 0:
                raise ValueError(f"diffusivity {name} must be positive")
        for f in fields(self):
            if f.name.endswith("_b") and getattr(self, f.name) <= 0:
                raise ValueError(f"threshold {f.name} must be positive")
        if self.eps_h < 0:
            raise ValueError("eps_h must be >= 0")

    def replace(self, **kw) -> "PlaqueParams":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals.update(kw)
        return PlaqueParams(**vals)


class PlaqueModel:
    """Six-species wall model; see the module docstring."""

    species = ("n1", "n2", "n3", "c1", "c2", "c3")
    n_species = 6
    has_convection = True
    dirichlet_value = None
    exact = None
    seed_species = "n1"

    def __init__(self, params: PlaqueParams | None = None):
        self.params = params if params is not None else PlaqueParams()

    def diffusivity(self) -> np.ndarray:
        p = self.params
        return np.array([p.mu1, p.mu2, p.mu3, p.nu1, p.nu2, p.nu3])

    def conv_flux(self, U: np.ndarray, grad: np.ndarray) -> np.ndarray:
        p = self.params
        n1, n2 = U[..., 0], U[..., 1]
        c1, c3 = U[..., 3], U[..., 5]
        g_n1, g_c1, g_c3 = grad[..., 0, :], grad[..., 3, :], grad[..., 5, :]
        F = np.zeros(U.shape + (grad.shape[-1],))
        F[..., 0, :] = (chi(n1, c1, p.chi11_a, p.chi11_b)[..., None] * g_c1
                        + chi(n1, c3, p.chi13_a, p.chi13_b)[..., None] * g_c3)
        F[..., 1, :] = (chi(n2, c1, p.chi21_a, p.chi21_b)[..., None] * g_c1
                        - chi(n2, n1, p.chi2n_a, p.chi2n_b)[..., None] * g_n1)
        return F

    def source(self, U: np.ndarray, x, t: float) -> np.ndarray:
        p = self.params
        n1, n2, n3 = U[..., 0], U[..., 1], U[..., 2]
        c1, c2 = U[..., 3], U[..., 4]
        S = np.empty_like(U)
        S[..., 0] = -p.d1 * n1
        S[..., 1] = -p.d2 * n2
        S[..., 2] = p.d1 * n1 + p.d2 * n2 - p.gamma * n1
        S[..., 3] = -p.alpha1 * n1 * c1 - p.alpha2 * n2 * c1 + p.f1_const * n3
        S[..., 4] = -p.k_ox * c2
        S[..., 5] = p.k_ox * c2
        return S

    def _velocities(self, U: np.ndarray, grad_avg: np.ndarray) -> np.ndarray:
        """Per-species transport velocities F_i = u_i * v_i; (npts, ns, d)."""
        p = self.params
        n1, c1, c3 = U[..., 0], U[..., 3], U[..., 5]
        g_n1 = grad_avg[..., 0, :]
        g_c1, g_c3 = grad_avg[..., 3, :], grad_avg[..., 5, :]
        v = np.zeros(U.shape + (grad_avg.shape[-1],))
        v[..., 0, :] = (p.chi11_a / (np.maximum(c1, 0.0) + p.chi11_b))[..., None] * g_c1 \
            + (p.chi13_a / (np.maximum(c3, 0.0) + p.chi13_b))[..., None] * g_c3
        v[..., 1, :] = (p.chi21_a / (np.maximum(c1, 0.0) + p.chi21_b))[..., None] * g_c1 \
            - (p.chi2n_a / (np.maximum(n1, 0.0) + p.chi2n_b))[..., None] * g_n1
        return v

    def wave_speed(self, U_in, U_out, grad_avg, normal) -> np.ndarray:
        """Pointwise bound on the normal transport speed over both traces."""
        lam = np.zeros(U_in.shape[:-1])
        for U in (U_in, U_out):
            v = self._velocities(U, grad_avg)
            vn = np.abs(np.einsum("...sd,...d->...s", v, normal))
            np.maximum(lam, vn.max(axis=-1), out=lam)
        return lam

    def boundary_flux(self, tag: int, U: np.ndarray, normal,
                      t: float) -> np.ndarray:
        """Prescribed diffusive normal fluxes mu_i dn(u_i), inward-normal
        sign convention (negative = inflow)."""
        p = self.params
        q = np.zeros_like(U)
        c1 = U[..., 3]
        if is_gamma1(tag):
            q[..., 0] = -p.mu1 * p.beta1 * smooth_heaviside(
                c1 - p.c1_star, p.eps_h)
        if tag == BoundaryTag.GAMMA1_IN:
            q[..., 4] = -p.nu2 * p.sigma
        if tag == BoundaryTag.GAMMA2:
            q[..., 1] = -p.mu2 * p.beta2 * smooth_heaviside(
                c1 - p.c1_starstar, p.eps_h)
        return q


class ReducedModel:
    """Three-species reduction (n1, n3, c1): one tactic coupling, no
    boundary lipid drive; inflammation enters through initial debris."""

    species = ("n1", "n3", "c1")
    n_species = 3
    has_convection = True
    dirichlet_value = None
    exact = None
    seed_species = "n3"

    def __init__(self, params: PlaqueParams | None = None):
        self.params = params if params is not None else PlaqueParams()

    def diffusivity(self) -> np.ndarray:
        p = self.params
        return np.array([p.mu1, p.mu3, p.nu1])

    def conv_flux(self, U: np.ndarray, grad: np.ndarray) -> np.ndarray:
        p = self.params
        F = np.zeros(U.shape + (grad.shape[-1],))
        F[..., 0, :] = chi(U[..., 0], U[..., 2], p.chi11_a,
                           p.chi11_b)[..., None] * grad[..., 2, :]
        return F

    def source(self, U: np.ndarray, x, t: float) -> np.ndarray:
        p = self.params
        n1, n3, c1 = U[..., 0], U[..., 1], U[..., 2]
        S = np.empty_like(U)
        S[..., 0] = 0.0
        S[..., 1] = p.d1 * n1 - p.gamma * n1
        S[..., 2] = -p.alpha1 * n1 * c1 + p.f1_const * n3
        return S

    def wave_speed(self, U_in, U_out, grad_avg, normal) -> np.ndarray:
        p = self.params
        g_c1 = grad_avg[..., 2, :]
        gn = np.einsum("...d,...d->...", g_c1, normal)
        lam = np.zeros(U_in.shape[:-1])
        for U in (U_in, U_out):
            vn = np.abs(gn) * p.chi11_a / (np.maximum(U[..., 2], 0.0)
                                           + p.chi11_b)
            np.maximum(lam, vn, out=lam)
        return lam

    def boundary_flux(self, tag: int, U: np.ndarray, normal,
                      t: float) -> np.ndarray:
        p = self.params
        q = np.zeros_like(U)
        if is_gamma1(tag):
            q[..., 0] = -p.mu1 * p.beta1 * smooth_heaviside(
                U[..., 2] - p.c1_star, p.eps_h)
        return q


class _ManufacturedBase:
    """Dirichlet-by-exact-trace boundary handling shared by the
    manufactured models."""

    boundary_flux = None

    def dirichlet_value(self, x: np.ndarray, t: float) -> np.ndarray:
        return self.exact(x, t)


class HeatModel(_ManufacturedBase):
    """Pure diffusion with product-of-sines exact solution."""

    n_species = 1
    has_convection = False

    def __init__(self, kappa: float = 1.0, dim: int = 2):
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        self.kappa = kappa
        self.dim = dim
        self.species = ("u",)

    def diffusivity(self) -> np.ndarray:
        return np.array([self.kappa])

    def exact(self, x: np.ndarray, t: float) -> np.ndarray:
        u = np.exp(-self.dim * self.kappa * math.pi ** 2 * t)
        for axis in range(self.dim):
            u = u * np.sin(math.pi * x[..., axis])
        return u[..., None]

    def conv_flux(self, U, grad):
        return np.zeros(U.shape + (grad.shape[-1],))

    def source(self, U, x, t):
        return np.zeros_like(U)

    def wave_speed(self, U_in, U_out, grad_avg, normal):
        return np.zeros(U_in.shape[:-1])


class AdvDiffModel(_ManufacturedBase):
    """Constant-velocity advection-diffusion; the exact solution is the
    translated, decaying product of sines (no forcing needed)."""

    n_species = 1
    has_convection = True

    def __init__(self, velocity=(0.8, 0.4), kappa: float = 0.05):
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        self.velocity = np.asarray(velocity, dtype=float)
        self.kappa = kappa
        self.dim = len(self.velocity)
        self.species = ("u",)

    def diffusivity(self) -> np.ndarray:
        return np.array([self.kappa])

    def exact(self, x: np.ndarray, t: float) -> np.ndarray:
        u = np.exp(-self.dim * self.kappa * math.pi ** 2 * t)
        for axis in range(self.dim):
            u = u * np.sin(math.pi * (x[..., axis] - self.velocity[axis] * t))
        return u[..., None]

    def conv_flux(self, U, grad):
        return U[..., None] * self.velocity

    def source(self, U, x, t):
        return np.zeros_like(U)

    def wave_speed(self, U_in, U_out, grad_avg, normal):
        vn = np.einsum("d,...d->...", self.velocity, normal)
        return np.broadcast_to(np.abs(vn), U_in.shape[:-1]).copy()


class TaxisCoupledModel(_ManufacturedBase):
    """Two-species chaser/attractor system with synthesized forcing.

    The forcing is the residual of a fixed smooth positive pair pushed
    through the tactic operators, computed symbolically at construction,
    so that pair is the exact solution.
    """

    n_species = 2
    has_convection = True
    species = ("u", "c")

    def __init__(self, chi_a: float = 1.0, chi_b: float = 1.0,
                 mu: float = 1.0, nu: float = 1.0,
                 d1: float = 0.1, alpha1: float = 0.1):
        if mu <= 0 or nu <= 0 or chi_b <= 0:
            raise ValueError("mu, nu and chi_b must be positive")
        self.chi_a, self.chi_b = chi_a, chi_b
        self.mu, self.nu = mu, nu
        self.d1, self.alpha1 = d1, alpha1
        self.dim = 2
        self._forcing = self._build_forcing()

    def _build_forcing(self):
        import sympy as sp

        x, y, t = sp.symbols("x y t")
        u = 1 + sp.exp(-t) * sp.sin(sp.pi * x) * sp.sin(sp.pi * y) / 2
        c = 1 + sp.exp(-t / 2) * sp.cos(sp.pi * x) * sp.cos(sp.pi * y) / 2
        chi_uc = self.chi_a * u / (c + self.chi_b)  # pair stays positive
        flux_u = [chi_uc * sp.diff(c, z) - self.mu * sp.diff(u, z)
                  for z in (x, y)]
        flux_c = [-self.nu * sp.diff(c, z) for z in (x, y)]
        g_u = (sp.diff(u, t) + sp.diff(flux_u[0], x) + sp.diff(flux_u[1], y)
               + self.d1 * u)
        g_c = (sp.diff(c, t) + sp.diff(flux_c[0], x) + sp.diff(flux_c[1], y)
               + self.alpha1 * u * c)
        return sp.lambdify((x, y, t), [g_u, g_c], "numpy")

    def exact(self, x: np.ndarray, t: float) -> np.ndarray:
        px, py = math.pi * x[..., 0], math.pi * x[..., 1]
        u = 1.0 + 0.5 * math.exp(-t) * np.sin(px) * np.sin(py)
        c = 1.0 + 0.5 * math.exp(-t / 2.0) * np.cos(px) * np.cos(py)
        return np.stack([u, c], axis=-1)

    def diffusivity(self) -> np.ndarray:
        return np.array([self.mu, self.nu])

    def conv_flux(self, U, grad):
        F = np.zeros(U.shape + (grad.shape[-1],))
        F[..., 0, :] = chi(U[..., 0], U[..., 1], self.chi_a,
                           self.chi_b)[..., None] * grad[..., 1, :]
        return F

    def source(self, U, x, t):
        S = np.empty_like(U)
        S[..., 0] = -self.d1 * U[..., 0]
        S[..., 1] = -self.alpha1 * U[..., 0] * U[..., 1]
        gu, gc = self._forcing(x[..., 0], x[..., 1], t)
        S[..., 0] += gu
        S[..., 1] += gc
        return S

    def wave_speed(self, U_in, U_out, grad_avg, normal):
        gn = np.einsum("...d,...d->...", grad_avg[..., 1, :], normal)
        lam = np.zeros(U_in.shape[:-1])
        for U in (U_in, U_out):
            vn = np.abs(gn) * self.chi_a / (np.maximum(U[..., 1], 0.0)
                                            + self.chi_b)
            np.maximum(lam, vn, out=lam)
        return lam


def manufactured_model(kind: str, **kw):
    """Factory for the manufactured test models by config name."""
    if kind == "heat-2d":
        return HeatModel(dim=2, **kw)
    if kind == "adv-diff-2d":
        return AdvDiffModel(**kw)
    if kind == "taxis-coupled-2d":
        return TaxisCoupledModel(**kw)
    raise ValueError(f"unknown manufactured model {kind!r}")
