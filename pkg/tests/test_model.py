"""Reaction terms, tactic fluxes, and boundary conditions of the
physiological models, plus the manufactured problems used for
verification runs."""
import math

import numpy as np
import pytest

from taxisdg.mesh import BoundaryTag
from taxisdg.model import AdvDiffModel, HeatModel, PlaqueModel, \
    PlaqueParams, ReducedModel, TaxisCoupledModel, chi, gaussian_bump, \
    smooth_heaviside


def _random_state(rng, npts, ns):
    return rng.uniform(0.0, 1.0, size=(npts, ns))


def test_lipid_source_cancels_pointwise():
    # oxidation only converts c2 to c3; their summed source is zero for
    # every state and every parameter choice
    rng = np.random.default_rng(0)
    for params in (PlaqueParams(), PlaqueParams(k_ox=3.7, d1=0.9)):
        model = PlaqueModel(params)
        U = _random_state(rng, 50, 6)
        S = model.source(U, None, 0.0)
        assert np.abs(S[:, 4] + S[:, 5]).max() < 1e-15


def test_debris_source_balance():
    p = PlaqueParams()
    model = PlaqueModel(p)
    rng = np.random.default_rng(1)
    U = _random_state(rng, 20, 6)
    S = model.source(U, None, 0.0)
    n1, n2 = U[:, 0], U[:, 1]
    assert np.allclose(S[:, 0], -p.d1 * n1)
    assert np.allclose(S[:, 1], -p.d2 * n2)
    assert np.allclose(S[:, 2], p.d1 * n1 + p.d2 * n2 - p.gamma * n1)


def test_boundary_gates():
    p = PlaqueParams(eps_h=0.0)
    model = PlaqueModel(p)
    U = np.zeros((3, 6))
    U[:, 3] = [0.0, p.c1_star / 2, 10 * p.c1_star]  # chemoattractant
    n = np.array([0.0, -1.0])
    q1 = model.boundary_flux(int(BoundaryTag.GAMMA1), U, n, 0.0)
    # immune influx only once the chemoattractant exceeds its threshold
    assert q1[0, 0] == 0.0 and q1[1, 0] == 0.0
    assert q1[2, 0] == pytest.approx(-p.mu1 * p.beta1)
    assert np.abs(q1[:, 4]).max() == 0.0  # lipids enter elsewhere

    q_in = model.boundary_flux(int(BoundaryTag.GAMMA1_IN), U, n, 0.0)
    assert np.allclose(q_in[:, 4], -p.nu2 * p.sigma)
    assert q_in[2, 0] == pytest.approx(-p.mu1 * p.beta1)  # still a wall face

    U2 = np.zeros((1, 6))
    U2[0, 3] = 10 * p.c1_starstar
    q2 = model.boundary_flux(int(BoundaryTag.GAMMA2), U2, n, 0.0)
    assert q2[0, 1] == pytest.approx(-p.mu2 * p.beta2)
    assert q2[0, 0] == 0.0

    q0 = model.boundary_flux(int(BoundaryTag.NO_FLOW), U, n, 0.0)
    assert np.abs(q0).max() == 0.0


def test_sealed_parameters_close_every_wall():
    model = PlaqueModel(PlaqueParams(sigma=0.0, beta1=0.0, beta2=0.0))
    U = np.full((4, 6), 2.0)
    n = np.array([1.0, 0.0])
    for tag in BoundaryTag:
        q = model.boundary_flux(int(tag), U, n, 0.0)
        assert np.abs(q).max() == 0.0


def test_tactic_flux_directions():
    model = PlaqueModel()
    U = np.full((1, 6), 0.5)
    grad = np.zeros((1, 6, 2))
    grad[0, 3] = [1.0, 0.0]   # chemoattractant increases along +x
    F = model.conv_flux(U, grad)
    assert F[0, 0, 0] > 0     # immune cells chase it
    assert F[0, 1, 0] > 0     # so do SMCs
    assert np.abs(F[0, 2:]).max() == 0.0  # diffusing species do not advect

    grad2 = np.zeros((1, 6, 2))
    grad2[0, 0] = [1.0, 0.0]  # immune-cell gradient repels SMCs
    F2 = model.conv_flux(U, grad2)
    assert F2[0, 1, 0] < 0


def test_wave_speed_bounds_both_traces():
    model = PlaqueModel()
    rng = np.random.default_rng(3)
    U_in = _random_state(rng, 10, 6)
    U_out = _random_state(rng, 10, 6)
    grad = rng.standard_normal((10, 6, 2))
    n = np.array([1.0, 0.0])
    lam = model.wave_speed(U_in, U_out, grad, n)
    assert lam.shape == (10,)
    assert (lam >= 0).all()
    assert (lam >= model.wave_speed(U_in, U_in, grad, n) - 1e-15).all()


def test_reduced_model_species():
    model = ReducedModel()
    assert model.species == ("n1", "n3", "c1")
    assert model.seed_species == "n3"
    assert PlaqueModel.seed_species == "n1"
    rng = np.random.default_rng(4)
    U = _random_state(rng, 8, 3)
    S = model.source(U, None, 0.0)
    assert S.shape == U.shape
    F = model.conv_flux(U, rng.standard_normal((8, 3, 2)))
    assert np.abs(F[:, 1:]).max() == 0.0  # only n1 is tactic here


def test_chi_saturates():
    assert chi(1.0, 0.0, 2.0, 0.5) == pytest.approx(4.0)
    # negative attractor values are clamped, not amplified
    assert chi(1.0, -10.0, 2.0, 0.5) == pytest.approx(4.0)
    assert chi(1.0, 100.0, 2.0, 0.5) < 0.02


def test_smooth_heaviside():
    assert smooth_heaviside(np.array([-1.0, 1.0]), 0.0).tolist() == [0, 1]
    s = smooth_heaviside(np.array([0.0]), 0.1)
    assert s[0] == pytest.approx(0.5)
    assert smooth_heaviside(np.array([1e4]), 0.1)[0] == pytest.approx(1.0)


def test_gaussian_bump():
    f = gaussian_bump((0.5, 0.5), 0.1, 2.0)
    x = np.array([[0.5, 0.5], [0.5, 0.6]])
    v = f(x)
    assert v[0] == pytest.approx(2.0)
    assert v[1] == pytest.approx(2.0 * math.exp(-0.5))


def test_heat_exact_satisfies_pde():
    model = HeatModel(kappa=0.3)
    x = np.random.default_rng(5).uniform(0.1, 0.9, (30, 2))
    t, eps = 0.2, 1e-5
    dudt = (model.exact(x, t + eps) - model.exact(x, t - eps)) / (2 * eps)
    lap = np.zeros_like(dudt)
    for d in range(2):
        sh = np.zeros(2)
        sh[d] = eps
        lap += (model.exact(x + sh, t) - 2 * model.exact(x, t)
                + model.exact(x - sh, t)) / eps ** 2
    assert np.allclose(dudt, model.kappa * lap, atol=1e-5)


def test_advdiff_exact_satisfies_pde():
    model = AdvDiffModel(velocity=(0.8, 0.4), kappa=0.05)
    x = np.random.default_rng(6).uniform(0.1, 0.9, (20, 2))
    t, eps = 0.3, 1e-5
    dudt = (model.exact(x, t + eps) - model.exact(x, t - eps)) / (2 * eps)
    lap = np.zeros_like(dudt)
    adv = np.zeros_like(dudt)
    for d in range(2):
        sh = np.zeros(2)
        sh[d] = eps
        up, um = model.exact(x + sh, t), model.exact(x - sh, t)
        lap += (up - 2 * model.exact(x, t) + um) / eps ** 2
        adv += model.velocity[d] * (up - um) / (2 * eps)
    assert np.allclose(dudt + adv, model.kappa * lap, atol=1e-4)


def test_taxis_forcing_closes_the_residual():
    # re-derive the residual of the exact pair from scratch and check
    # the model's source term reproduces u_t + div(flux) exactly
    import sympy as sp

    model = TaxisCoupledModel(chi_a=1.3, chi_b=0.9, mu=0.7, nu=1.1,
                              d1=0.2, alpha1=0.15)
    x, y, t = sp.symbols("x y t")
    u = 1 + sp.exp(-t) * sp.sin(sp.pi * x) * sp.sin(sp.pi * y) / 2
    c = 1 + sp.exp(-t / 2) * sp.cos(sp.pi * x) * sp.cos(sp.pi * y) / 2
    fu = [model.chi_a * u / (c + model.chi_b) * sp.diff(c, z)
          - model.mu * sp.diff(u, z) for z in (x, y)]
    fc = [-model.nu * sp.diff(c, z) for z in (x, y)]
    rhs_u = sp.diff(u, t) + sp.diff(fu[0], x) + sp.diff(fu[1], y)
    rhs_c = sp.diff(c, t) + sp.diff(fc[0], x) + sp.diff(fc[1], y)
    ref = sp.lambdify((x, y, t), [rhs_u, rhs_c], "numpy")

    pts = np.random.default_rng(7).uniform(0.1, 0.9, (15, 2))
    tv = 0.13
    S = model.source(model.exact(pts, tv), pts, tv)
    want = np.stack(ref(pts[:, 0], pts[:, 1], tv), axis=-1)
    assert np.allclose(S, want, atol=1e-12)


def test_invalid_parameters_raise():
    with pytest.raises(ValueError):
        HeatModel(kappa=0.0)
    with pytest.raises(ValueError):
        AdvDiffModel(kappa=-1.0)
    with pytest.raises(ValueError):
        TaxisCoupledModel(mu=0.0)
    with pytest.raises(ValueError):
        PlaqueParams(mu1=-1e-3)


def test_dirichlet_trace_matches_exact():
    model = HeatModel(kappa=1.0)
    x = np.array([[0.0, 0.25], [1.0, 0.5]])
    assert np.allclose(model.dirichlet_value(x, 0.3), model.exact(x, 0.3))
