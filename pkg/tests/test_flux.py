"""Face trace algebra, the lifting operator, and the diffusion flux
family at the single-face level."""
import numpy as np
import pytest

from taxisdg.fespace import DGSpace
from taxisdg.flux import SCHEME_NAMES, FluxScheme, TracePair, \
    average_jump, chi_factor, diffusion_normal_flux, lifting_coeffs, \
    llf, minus_is_outside
from taxisdg.mesh import Mesh, unit_square
from taxisdg.model import AdvDiffModel
from taxisdg.quadrature import face_rule


def test_scheme_registry():
    assert SCHEME_NAMES == ("cdg2", "cdg", "br2", "ip", "bo")
    for name in SCHEME_NAMES:
        s = FluxScheme(name)
        assert s.adjoint_sign == (-1.0 if name == "bo" else 1.0)
        assert s.uses_lifting == (name in ("cdg2", "cdg", "br2"))
    with pytest.raises(ValueError):
        FluxScheme("sipg")
    with pytest.raises(ValueError):
        FluxScheme("ip", ip_eta0=0.0)


def test_chi_factor():
    assert chi_factor(2) == 1.5
    assert chi_factor(3) == 2.0


def test_minus_side_selection():
    assert minus_is_outside(2.0, 1.0, 0, 1)       # outside smaller
    assert not minus_is_outside(1.0, 2.0, 0, 1)
    assert minus_is_outside(1.0, 1.0, 5, 3)       # tie: lower id wins
    assert not minus_is_outside(1.0, 1.0, 3, 5)


def test_average_jump():
    rng = np.random.default_rng(0)
    tp = TracePair(u_in=rng.standard_normal((4, 2)),
                   u_out=rng.standard_normal((4, 2)),
                   grad_in=rng.standard_normal((4, 2, 2)),
                   grad_out=rng.standard_normal((4, 2, 2)),
                   normal=np.array([0.6, 0.8]))
    avg, jump = average_jump(tp)
    assert np.allclose(avg, 0.5 * (tp.u_in + tp.u_out))
    assert np.allclose(jump[:, :, 0] * 0.8, jump[:, :, 1] * 0.6)
    assert np.allclose(np.linalg.norm(jump, axis=2),
                       np.abs(tp.u_in - tp.u_out))


def test_llf_consistency_and_dissipation():
    # equal traces: plain normal flux; unequal: upwinding adds
    # lambda/2 (u_in - u_out)
    model = AdvDiffModel(velocity=(1.0, 0.0), kappa=0.1)
    n = np.array([1.0, 0.0])
    u = np.full((3, 1), 2.0)
    g = np.zeros((3, 1, 2))
    tp_eq = TracePair(u, u.copy(), g, g, n)
    f = llf(model, tp_eq)
    assert np.allclose(f, 2.0)  # v.n * u with v.n = 1
    tp_jump = TracePair(u, 0.5 * u, g, g, n)
    f2 = llf(model, tp_jump)
    central = 0.5 * (2.0 + 1.0)
    assert np.allclose(f2, central + 0.5 * 1.0 * (2.0 - 1.0))


def test_lifting_shape_validation():
    mesh = unit_square(1)
    space = DGSpace(mesh, 1)
    rule = face_rule(2, 4)
    with pytest.raises(ValueError):
        lifting_coeffs(space, 0, np.zeros((len(rule), 1, 3)), rule)


def test_one_sided_lifting_lives_on_smaller_neighbor():
    # uneven split of a square: face 'diag' separates a small and a
    # large triangle
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.2, 0.6]])
    elems = np.array([[0, 1, 3], [1, 2, 3]])
    mesh = Mesh(verts, elems)
    small = int(np.argmin(mesh.volumes))
    space = DGSpace(mesh, 1)
    rule = face_rule(2, 4)
    interior = int(np.nonzero(mesh.face_elems[:, 1] >= 0)[0][0])
    jump = np.ones((len(rule), 1, 2))
    rho = lifting_coeffs(space, interior, jump, rule, one_sided=True)
    carrying = int(np.nonzero([np.abs(rho[s]).max() > 0
                               for s in range(2)])[0][0])
    assert int(mesh.face_elems[interior, carrying]) == small
    # two-sided: both neighbors carry
    rho2 = lifting_coeffs(space, interior, jump, rule, one_sided=False)
    assert all(np.abs(rho2[s]).max() > 0 for s in range(2))


def test_one_sided_lifting_doubles_on_carrier():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.2, 0.6]])
    elems = np.array([[0, 1, 3], [1, 2, 3]])
    mesh = Mesh(verts, elems)
    space = DGSpace(mesh, 2)
    rule = face_rule(2, 6)
    interior = int(np.nonzero(mesh.face_elems[:, 1] >= 0)[0][0])
    rng = np.random.default_rng(1)
    jump = rng.standard_normal((len(rule), 1, 2))
    rho1 = lifting_coeffs(space, interior, jump, rule, one_sided=True)
    rho2 = lifting_coeffs(space, interior, jump, rule, one_sided=False)
    side = int(np.nonzero([np.abs(rho1[s]).max() > 0
                           for s in range(2)])[0][0])
    assert np.allclose(rho1[side], 2.0 * rho2[side], atol=1e-14)


def test_boundary_lifting_single_sided():
    mesh = unit_square(1)
    space = DGSpace(mesh, 1)
    rule = face_rule(2, 4)
    bdry = int(np.nonzero(mesh.face_elems[:, 1] < 0)[0][0])
    jump = np.ones((len(rule), 1, 2))
    rho = lifting_coeffs(space, bdry, jump, rule)
    assert np.abs(rho[1]).max() == 0.0
    assert np.abs(rho[0]).max() > 0.0
    # the one-sided variant doubles the boundary weight too
    rho_os = lifting_coeffs(space, bdry, jump, rule, one_sided=True)
    assert np.allclose(rho_os[0], 2.0 * rho[0], atol=1e-15)


def _face_tracepair(nq, ns, dim, rng, jump_scale=1.0):
    u_out = rng.standard_normal((nq, ns))
    return TracePair(u_in=u_out + jump_scale * rng.standard_normal((nq, ns)),
                     u_out=u_out,
                     grad_in=rng.standard_normal((nq, ns, dim)),
                     grad_out=rng.standard_normal((nq, ns, dim)),
                     normal=np.array([1.0, 0.0]) if dim == 2
                     else np.array([1.0, 0.0, 0.0]))


def test_diffusion_flux_vanishes_on_continuous_data():
    mesh = unit_square(2)
    space = DGSpace(mesh, 2)
    rng = np.random.default_rng(2)
    rule = face_rule(2, 6)
    fid = int(np.nonzero(mesh.face_elems[:, 1] >= 0)[0][0])
    tp = _face_tracepair(len(rule), 1, 2, rng, jump_scale=0.0)
    A = np.array([0.7])
    for name in SCHEME_NAMES:
        q = diffusion_normal_flux(FluxScheme(name), space, fid, tp, A, rule)
        assert np.abs(q).max() < 1e-13, name


def test_ip_flux_formula():
    mesh = unit_square(2)
    space = DGSpace(mesh, 3)
    rule = face_rule(2, 8)
    fid = int(np.nonzero(mesh.face_elems[:, 1] >= 0)[0][0])
    rng = np.random.default_rng(3)
    tp = _face_tracepair(len(rule), 2, 2, rng)
    A = np.array([0.7, 1.3])
    eta0 = 5.0
    q = diffusion_normal_flux(FluxScheme("ip", ip_eta0=eta0), space, fid,
                              tp, A, rule)
    e_in, e_out = mesh.face_elems[fid]
    h = min(mesh.diameters[e_in], mesh.diameters[e_out])
    want = -(eta0 * 9 / h) * A[None, :] * (tp.u_in - tp.u_out)
    assert np.allclose(q, want, atol=1e-12)


def test_bo_flux_is_zero():
    mesh = unit_square(2)
    space = DGSpace(mesh, 1)
    rule = face_rule(2, 4)
    rng = np.random.default_rng(4)
    tp = _face_tracepair(len(rule), 1, 2, rng)
    q = diffusion_normal_flux(FluxScheme("bo"), space, 0, tp,
                              np.array([1.0]), rule)
    assert np.abs(q).max() == 0.0


def test_lifting_family_scalings():
    # for identical jump data the family members are proportional on
    # matching support: cdg = 2 x (minus-side restriction of cdg2)
    mesh = unit_square(2)
    space = DGSpace(mesh, 2)
    rule = face_rule(2, 6)
    rng = np.random.default_rng(5)
    fid = int(np.nonzero(mesh.face_elems[:, 1] >= 0)[0][0])
    tp = _face_tracepair(len(rule), 1, 2, rng)
    A = np.array([0.9])
    q_cdg2 = diffusion_normal_flux(FluxScheme("cdg2"), space, fid, tp,
                                   A, rule)
    q_cdg = diffusion_normal_flux(FluxScheme("cdg"), space, fid, tp,
                                  A, rule)
    q_br2 = diffusion_normal_flux(FluxScheme("br2"), space, fid, tp,
                                  A, rule)
    assert np.allclose(q_cdg, 2.0 * q_cdg2, atol=1e-12)
    assert np.isfinite(q_br2).all()
    # all three penalties act against the jump in the aggregate
    _, jump = average_jump(tp)
    jn = np.einsum("qsd,d->qs", jump, tp.normal)
    for q in (q_cdg2, q_cdg, q_br2):
        assert float((q * jn).sum()) < 0.0