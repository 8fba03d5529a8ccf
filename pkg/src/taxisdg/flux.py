r"""Numerical faces: trace algebra, the local lifting operator, and the
diffusion flux family.

Jumps are the outer-product matrices

.. math::

    [\![V]\!] = n^+ \otimes V^+ + n^- \otimes V^- = (V^+ - V^-)\otimes n^+,

averages are arithmetic means of the two traces.  The lifting r_e of a
face jump is the element-polynomial field supported on the two adjacent
elements defined by

.. math::

    \int_\Omega r_e(J) : \tau = -\int_e J : \{\!\{\tau\}\!\}
    \qquad \text{for all } \tau,

which decouples per species, per direction, and per element; with the
orthonormal basis each coefficient is a weighted face moment of the jump
divided by the element's |det J|.  On boundary faces the exterior trace
of tau is zero, so the same one-half average applies and the boundary
jump is built from synthesized exterior data.

Diffusion flux family (A the diagonal diffusivity, chi_e = 1.5 on
triangles and 2 on tetrahedra, K- the smaller-volume neighbor with ties
broken toward the lower element id):

- cdg2:  2 chi_e (A r_e(J))|_{K-}
- cdg:   2 chi_e (A l_e(J))|_{K-} with the one-sided lifting l_e
         (test traces taken from K- alone, so l_e = 2 r_e on K-)
- br2:   2 chi_e {A r_e(J)}
- ip:    -(eta0 k^2 / h_e) A J, h_e the smaller neighbor diameter;
         the sign makes the penalty dissipative under the surface-term
         sign convention of the discrete operator
- bo:    no penalty; the adjoint consistency term flips sign instead

For jumps of the form (scalar) x n the lifting values along the face are
again proportional to n, so every member of the family reduces to a
scalar normal flux per species; `diffusion_normal_flux` returns that
scalar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fespace import DGSpace, face_reference_points
from .quadrature import QuadRule, face_rule

__all__ = ["FluxScheme", "SCHEME_NAMES", "TracePair", "average_jump",
           "llf", "chi_factor", "minus_is_outside", "lifting_coeffs",
           "lift_value_matrix", "diffusion_normal_flux"]

SCHEME_NAMES = ("cdg2", "cdg", "br2", "ip", "bo")

# reference measure of the face domain the face rules integrate over
_REF_FACE_MEASURE = {2: 1.0, 3: 0.5}


@dataclass(frozen=True)
class FluxScheme:
    """Diffusion flux selector plus its tunables."""

    name: str
    ip_eta0: float = 4.0

    def __post_init__(self):
        if self.name not in SCHEME_NAMES:
            raise ValueError(
                f"unknown flux scheme {self.name!r}; pick one of "
                f"{SCHEME_NAMES}")
        if self.ip_eta0 <= 0:
            raise ValueError("ip_eta0 must be positive")

    @property
    def adjoint_sign(self) -> float:
        return -1.0 if self.name == "bo" else 1.0

    @property
    def uses_lifting(self) -> bool:
        return self.name in ("cdg2", "cdg", "br2")


def chi_factor(dim: int) -> float:
    """Stabilization weight: half the face count of the element type."""
    return {2: 1.5, 3: 2.0}[dim]


def minus_is_outside(vol_in, vol_out, elem_in, elem_out):
    """True where the outside element is K- (smaller volume, ties to the
    lower element id).  Vectorized over faces."""
    return (vol_out < vol_in) | ((vol_out == vol_in) & (elem_out < elem_in))


@dataclass
class TracePair:
    """Two-sided face trace data at the face quadrature points.

    u_* have shape (nq, n_species), grad_* shape (nq, n_species, dim);
    `normal` is the unit normal of the inside element.  For boundary
    faces the outside entries hold synthesized exterior data.
    """

    u_in: np.ndarray
    u_out: np.ndarray
    grad_in: np.ndarray
    grad_out: np.ndarray
    normal: np.ndarray

    @property
    def grad_avg(self) -> np.ndarray:
        return 0.5 * (self.grad_in + self.grad_out)


def average_jump(tp: TracePair) -> tuple[np.ndarray, np.ndarray]:
    """Return ({u}, [[u]]): the average (nq, ns) and the jump matrix
    (nq, ns, dim) = (u_in - u_out) outer normal."""
    avg = 0.5 * (tp.u_in + tp.u_out)
    jump = (tp.u_in - tp.u_out)[:, :, None] * tp.normal
    return avg, jump


def llf(model, tp: TracePair, t: float = 0.0,
        wave_speed=None) -> np.ndarray:
    """Local Lax-Friedrichs normal flux (nq, ns), oriented along the
    inside normal: consistent central part plus upwind dissipation
    lambda/2 (u_in - u_out).  Gradients entering the convective flux are
    the trace averages."""
    g = tp.grad_avg
    F_in = model.conv_flux(tp.u_in, g)
    F_out = model.conv_flux(tp.u_out, g)
    lam = (model.wave_speed(tp.u_in, tp.u_out, g, tp.normal)
           if wave_speed is None else wave_speed)
    central = 0.5 * np.einsum("qsd,d->qs", F_in + F_out, tp.normal)
    return central + 0.5 * lam[:, None] * (tp.u_in - tp.u_out)


def lift_value_matrix(space: DGSpace, local_face: int, perm: int,
                      rule: QuadRule) -> np.ndarray:
    """P with (P @ j)_q = sum_i phi_i(q) sum_p w_p phi_i(p) j_p.

    Face values of the element-local lifting moment are P applied to the
    jump trace, up to the face/element scale factors."""
    xi = face_reference_points(space.mesh.dim, local_face, perm, rule.points)
    B = space.basis.eval(xi)
    return (B @ B.T) * rule.weights[None, :]


def lifting_coeffs(space: DGSpace, fid: int, jump: np.ndarray,
                   rule: QuadRule | None = None,
                   one_sided: bool = False) -> np.ndarray:
    """Coefficients of the lifting of a face jump.

    jump has shape (nq, ns, dim): values of the jump matrix at the face
    rule points (canonical face parametrization).  Returns an array of
    shape (2, ns, dim, nb): modal coefficients on the inside and outside
    elements (the outside block is zero for boundary faces, and for the
    one-sided lifting, which is supported on K- alone).
    """
    mesh = space.mesh
    if rule is None:
        rule = face_rule(mesh.dim, 2 * space.order + 2)
    jump = np.asarray(jump, dtype=float)
    nq = len(rule)
    ns = space.n_species
    if jump.shape != (nq, ns, mesh.dim):
        raise ValueError(f"jump has shape {jump.shape}, expected "
                         f"{(nq, ns, mesh.dim)}")
    sfac = mesh.face_measures[fid] / _REF_FACE_MEASURE[mesh.dim]
    out = np.zeros((2, ns, mesh.dim, space.nb))
    sides = [0, 1] if mesh.face_elems[fid, 1] >= 0 else [0]
    if one_sided:
        if mesh.face_elems[fid, 1] < 0:
            sides = [0]
        else:
            vi, vo = (mesh.volumes[mesh.face_elems[fid, 0]],
                      mesh.volumes[mesh.face_elems[fid, 1]])
            sides = [1] if minus_is_outside(
                vi, vo, mesh.face_elems[fid, 0],
                mesh.face_elems[fid, 1]) else [0]
    half = 1.0 if one_sided else 0.5
    for side in sides:
        elem = int(mesh.face_elems[fid, side])
        lf = int(mesh.face_local[fid, side])
        pm = int(mesh.face_perm[fid, side])
        xi = face_reference_points(mesh.dim, lf, pm, rule.points)
        phi = space.basis.eval(xi)                       # (nq, nb)
        detJ = space.detJ[elem]
        out[side] = -(half * sfac / detJ) * np.einsum(
            "q,qsd,qi->sdi", rule.weights, jump, phi)
    return out


def diffusion_normal_flux(scheme: FluxScheme, space: DGSpace, fid: int,
                          tp: TracePair, diffusivity: np.ndarray,
                          rule: QuadRule | None = None) -> np.ndarray:
    """Normal component of the diffusive numerical flux A_hat . n_in,
    shape (nq, ns).  Face-local reference implementation; the discrete
    operator evaluates the same formulas in batched form."""
    mesh = space.mesh
    if rule is None:
        rule = face_rule(mesh.dim, 2 * space.order + 2)
    _, jump = average_jump(tp)
    if scheme.name == "bo":
        return np.zeros(tp.u_in.shape)
    if scheme.name == "ip":
        e_in, e_out = mesh.face_elems[fid]
        h = mesh.diameters[e_in]
        if e_out >= 0:
            h = min(h, mesh.diameters[e_out])
        eta = scheme.ip_eta0 * max(space.order, 1) ** 2
        return -(eta / h) * diffusivity[None, :] * (tp.u_in - tp.u_out)
    chi_e = chi_factor(mesh.dim)
    coeffs = lifting_coeffs(space, fid, jump, rule,
                            one_sided=(scheme.name == "cdg"))
    e_in, e_out = mesh.face_elems[fid]
    if e_out < 0:
        side = 0
    elif scheme.name in ("cdg2", "cdg"):
        side = 1 if minus_is_outside(mesh.volumes[e_in], mesh.volumes[e_out],
                                     e_in, e_out) else 0
    else:
        side = None  # br2 averages both sides

    def values(side_idx):
        elem = int(mesh.face_elems[fid, side_idx])
        lf = int(mesh.face_local[fid, side_idx])
        pm = int(mesh.face_perm[fid, side_idx])
        xi = face_reference_points(mesh.dim, lf, pm, rule.points)
        phi = space.basis.eval(xi)
        vals = np.einsum("sdi,qi->qsd", coeffs[side_idx], phi)
        return np.einsum("qsd,d->qs", vals, tp.normal)

    if scheme.name == "br2":
        if e_out < 0:
            rn = values(0)
        else:
            rn = 0.5 * (values(0) + values(1))
        return 2.0 * chi_e * diffusivity[None, :] * rn
    return 2.0 * chi_e * diffusivity[None, :] * values(side)
