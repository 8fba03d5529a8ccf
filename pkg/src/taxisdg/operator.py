r"""Matrix-free assembly of the semidiscrete right-hand side.

For coefficients U of a DG function the operator returns the weak
residual R with entries

.. math::

    R_{K,s,i} = \int_K (\Sigma(U) : \nabla\varphi_i + S(U)\,\varphi_i)
    + \sum_{e \subset \partial K} \text{(surface terms)},

where Sigma = F(U, grad U) - A grad U is the total flux.  Dividing by
the diagonal mass matrix (`apply_f`) gives dU/dt of the method of
lines.  Surface terms per interior face, with n the inside normal and
dU = u_in - u_out:

- exchange of the numerical normal flux q = fhat_LLF - Ahat.n
  (subtracted on the inside row, added on the outside row),
- the adjoint consistency term s_adj * (A grad phi . n) dU / 2 with the
  same sign on both rows (s_adj = -1 for the bo scheme, +1 otherwise),
- the primal consistency term (A {grad u} . n) phi / 2, opposite signs.

Boundary faces come in two closures.  Models that prescribe diffusive
boundary fluxes (plaque family) contribute -q_presc * phi with
q_presc the inward-normal prescription, and the convective numerical
flux vanishes there.  Models with a Dirichlet data function are closed
by a mirrored exterior trace u_out = 2 g - u_in, grad_out = grad_in,
pushed through the unmodified interior kernel with no outside writes;
this reproduces the standard penalized boundary treatment.

Threading is owner-computes: elements are split into parts (recursive
coordinate bisection), each part assembles volume terms for its
elements and all terms of faces whose inside element it owns into a
private full-size buffer, and buffers are merged in fixed part order.
The result is bitwise independent of the thread count; the partition
count changes grouping but not ownership or merge order.

Faces are processed in batches keyed by their local-face/orientation
signature, so each batch uses one set of reference trace tables and
every element appears at most once per batch side, making vectorized
scatter-accumulation race-free.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .fespace import DGSpace, face_reference_points
from .flux import FluxScheme, chi_factor, minus_is_outside
from .quadrature import face_rule, volume_rule

__all__ = ["DiscreteOperator"]


class _FaceGroup:
    """Faces sharing one trace-table signature, struct-of-arrays."""

    __slots__ = ("kind", "lf_in", "pm_in", "lf_out", "pm_out", "tag",
                 "fids", "e_in", "e_out", "normals", "sfac", "h",
                 "minus_in", "X", "part_index")

    def __init__(self, kind, lf_in, pm_in, lf_out=-1, pm_out=-1, tag=0):
        self.kind = kind
        self.lf_in = lf_in
        self.pm_in = pm_in
        self.lf_out = lf_out
        self.pm_out = pm_out
        self.tag = tag
        self.fids = []
        self.part_index = None


_REF_FACE_MEASURE = {2: 1.0, 3: 0.5}


class DiscreteOperator:
    """Weak-residual evaluator for one model/space/flux combination.

    Quadrature defaults: volume degree 3k+1, face degree 3k+2 with k
    the polynomial order, enough for the quadratic-over-linear taxis
    nonlinearities in practice.
    """

    def __init__(self, space: DGSpace, model, scheme: FluxScheme,
                 nthreads: int = 1, npartitions: int | None = None,
                 vol_degree: int | None = None,
                 face_degree: int | None = None):
        if model.n_species != space.n_species:
            raise ValueError(
                f"model has {model.n_species} species, space has "
                f"{space.n_species}")
        self.space = space
        self.model = model
        self.scheme = scheme
        mesh = space.mesh
        self.mesh = mesh
        dim = mesh.dim
        k = space.order

        self._diff = np.asarray(model.diffusivity(), dtype=float)
        self._chi = chi_factor(dim)
        self._adj_sign = scheme.adjoint_sign
        self._eta = scheme.ip_eta0 * max(k, 1) ** 2

        self._vrule = volume_rule(dim, vol_degree if vol_degree is not None
                                  else 3 * k + 1)
        self._frule = face_rule(dim, face_degree if face_degree is not None
                                else 3 * k + 2)
        self._wvol = self._vrule.weights
        self._wface = self._frule.weights

        basis = space.basis
        self._Phi = basis.eval(self._vrule.points)
        self._Gref = basis.grad(self._vrule.points)
        nb = space.nb
        # flattened layouts so the hot loops run as plain matmuls
        self._PhiW = self._wvol[:, None] * self._Phi
        self._GvolT = self._Gref.transpose(1, 0, 2).reshape(nb, -1)
        self._GvolW = (self._wvol[:, None, None] * self._Gref) \
            .transpose(0, 2, 1).reshape(-1, nb)
        J, detJ, Jinv = mesh.jacobians()
        self._detJ = detJ
        self._Jinv = Jinv
        v0 = mesh.vertices[mesh.elements[:, 0]]
        self._Xvol = v0[:, None, :] + np.einsum(
            "eij,qj->eqi", J, self._vrule.points)

        # reference trace tables per (local face, orientation)
        self._tables = {}
        for lf in range(dim + 1):
            nperm = 2 if dim == 2 else 6
            for pm in range(nperm):
                xi = face_reference_points(dim, lf, pm, self._frule.points)
                B = basis.eval(xi)
                G = basis.grad(xi)
                Pw = (B @ B.T) * self._wface[None, :]
                Gflat = G.transpose(1, 0, 2).reshape(nb, -1)
                GT = G.transpose(2, 0, 1).reshape(dim, -1)
                self._tables[lf, pm] = (B, G, Pw, Gflat, GT)

        self._build_groups()
        self.set_threads(nthreads, npartitions)

    # -- setup ----------------------------------------------------------

    def _build_groups(self):
        mesh = self.mesh
        model = self.model
        has_flux_bc = getattr(model, "boundary_flux", None) is not None
        has_dirichlet = getattr(model, "dirichlet_value", None) is not None

        groups: dict[tuple, _FaceGroup] = {}
        for fid in range(mesh.n_faces):
            e_out = mesh.face_elems[fid, 1]
            lf_in = int(mesh.face_local[fid, 0])
            pm_in = int(mesh.face_perm[fid, 0])
            if e_out >= 0:
                key = ("i", lf_in, pm_in, int(mesh.face_local[fid, 1]),
                       int(mesh.face_perm[fid, 1]))
                if key not in groups:
                    groups[key] = _FaceGroup("interior", *key[1:])
            else:
                tag = int(mesh.face_tags[fid])
                if has_flux_bc:
                    kind = "flux"
                elif has_dirichlet:
                    kind = "dirichlet"
                else:
                    raise ValueError(
                        "mesh has boundary faces but the model provides "
                        "neither boundary_flux nor dirichlet_value")
                key = (kind[0], lf_in, pm_in, tag)
                if key not in groups:
                    groups[key] = _FaceGroup(kind, lf_in, pm_in, tag=tag)
            groups[key].fids.append(fid)

        ref_face = _REF_FACE_MEASURE[mesh.dim]
        for g in groups.values():
            fids = np.asarray(g.fids, dtype=np.int64)
            g.fids = fids
            g.e_in = mesh.face_elems[fids, 0]
            g.e_out = mesh.face_elems[fids, 1]
            g.normals = mesh.face_normals[fids]
            g.sfac = mesh.face_measures[fids] / ref_face
            h = mesh.diameters[g.e_in].copy()
            if g.kind == "interior":
                np.minimum(h, mesh.diameters[g.e_out], out=h)
                g.minus_in = ~minus_is_outside(
                    mesh.volumes[g.e_in], mesh.volumes[g.e_out],
                    g.e_in, g.e_out)
            else:
                g.minus_in = np.ones(len(fids), dtype=bool)
            g.h = h
            if g.kind == "dirichlet":
                J, _, _ = mesh.jacobians()
                xi = face_reference_points(mesh.dim, g.lf_in, g.pm_in,
                                           self._frule.points)
                v0 = mesh.vertices[mesh.elements[g.e_in, 0]]
                g.X = v0[:, None, :] + np.einsum(
                    "fij,qj->fqi", J[g.e_in], xi)
            else:
                g.X = None

        self._group_keys = sorted(groups)
        self._groups = [groups[k] for k in self._group_keys]

    def set_threads(self, nthreads: int, npartitions: int | None = None):
        """Choose worker count and element partition count.

        The partition count fixes the work decomposition (and therefore
        the grouping of floating-point sums); the thread count only
        says how many workers execute it.
        """
        if nthreads < 1:
            raise ValueError("nthreads must be >= 1")
        self.nthreads = int(nthreads)
        self.npartitions = int(npartitions) if npartitions is not None \
            else self.nthreads
        if self.npartitions < 1:
            raise ValueError("npartitions must be >= 1")
        owner = self.mesh.partition(self.npartitions)
        self._elem_part = owner
        self._part_elems = [np.flatnonzero(owner == p)
                            for p in range(self.npartitions)]
        for g in self._groups:
            face_owner = owner[g.e_in]
            g.part_index = [np.flatnonzero(face_owner == p)
                            for p in range(self.npartitions)]

    def audit_face_ownership(self) -> dict:
        """Coverage check: every element and face assembled exactly once."""
        ne = self.mesh.n_elements
        e_count = np.zeros(ne, dtype=int)
        for idx in self._part_elems:
            e_count[idx] += 1
        f_count = np.zeros(self.mesh.n_faces, dtype=int)
        for g in self._groups:
            for idx in g.part_index:
                f_count[g.fids[idx]] += 1
        return {
            "elements_ok": bool((e_count == 1).all()),
            "faces_ok": bool((f_count == 1).all()),
            "faces_per_part": [int(sum(len(idx) for idx in
                                       (g.part_index[p] for g in
                                        self._groups)))
                               for p in range(self.npartitions)],
            "elements_per_part": [len(x) for x in self._part_elems],
        }

    # -- application ----------------------------------------------------

    def apply(self, U, t: float = 0.0) -> np.ndarray:
        """Weak residual <phi, L_h(U)>, same shape as the coefficient
        array.  Accepts raw coefficients or a DiscreteFunction."""
        U = np.asarray(getattr(U, "coeffs", U), dtype=float)
        if U.shape != self.space.shape:
            raise ValueError(f"U has shape {U.shape}, expected "
                             f"{self.space.shape}")

        def work(p):
            buf = np.zeros_like(U)
            self._volume_part(U, t, p, buf)
            for g in self._groups:
                idx = g.part_index[p]
                if len(idx) == 0:
                    continue
                if g.kind == "interior":
                    self._interior_faces(U, t, g, idx, buf)
                elif g.kind == "flux":
                    self._flux_bc_faces(U, t, g, idx, buf)
                else:
                    self._dirichlet_faces(U, t, g, idx, buf)
            return buf

        if self.nthreads == 1 or self.npartitions == 1:
            bufs = [work(p) for p in range(self.npartitions)]
        else:
            with ThreadPoolExecutor(max_workers=self.nthreads) as ex:
                bufs = list(ex.map(work, range(self.npartitions)))
        R = bufs[0]
        for b in bufs[1:]:
            R += b
        return R

    def apply_f(self, U: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Mass-inverted residual: the method-of-lines dU/dt."""
        return self.space.apply_inverse_mass(self.apply(U, t))

    # -- kernels --------------------------------------------------------

    def _volume_part(self, U, t, p, out):
        E = self._part_elems[p]
        nE = len(E)
        if nE == 0:
            return
        model = self.model
        ns = self.space.n_species
        dim = self.mesh.dim
        nq = len(self._wvol)
        cf = U[E]
        # u point-major (E,q,s) for the model calls, gradients
        # species-major (E,s,q,d) so projections are single matmuls
        u = np.matmul(self._Phi, cf.transpose(0, 2, 1))
        gref = np.matmul(cf, self._GvolT).reshape(nE, ns, nq, dim)
        Jinv = self._Jinv[E]
        uf = u.reshape(-1, ns)
        xf = self._Xvol[E].reshape(-1, dim)
        S = model.source(uf, xf, t).reshape(u.shape)
        gphys = np.matmul(gref.reshape(nE, ns * nq, dim), Jinv) \
            .reshape(nE, ns, nq, dim)
        if model.has_convection:
            gp = np.ascontiguousarray(gphys.transpose(0, 2, 1, 3))
            F = model.conv_flux(uf, gp.reshape(-1, ns, dim))
            F_sm = F.reshape(nE, nq, ns, dim).transpose(0, 2, 1, 3)
            sig = F_sm - self._diff[None, :, None, None] * gphys
        else:
            # Sigma = -A grad u; push the metric onto the test gradient
            sig = -self._diff[None, :, None, None] * gphys
        sig_ref = np.matmul(sig.reshape(nE, ns * nq, dim),
                            np.swapaxes(Jinv, 1, 2))
        r = np.matmul(sig_ref.reshape(nE, ns, nq * dim), self._GvolW)
        r += np.matmul(S.transpose(0, 2, 1), self._PhiW)
        out[E] += self._detJ[E][:, None, None] * r

    def _trace(self, U, elems, table):
        """Trace values (F,q,s) and reference-index gradients (F,s,q,d)
        of U on one face side."""
        cf = U[elems]
        u = np.matmul(table[0], cf.transpose(0, 2, 1))
        nF, ns, _ = cf.shape
        gref = np.matmul(cf, table[3]) \
            .reshape(nF, ns, -1, self.mesh.dim)
        return u, gref

    def _penalty(self, g, idx, dU, tab_in, tab_out):
        """Ahat . n_in per scheme, shape (F, nq, ns)."""
        name = self.scheme.name
        if name == "bo":
            return None
        diff = self._diff
        if name == "ip":
            return -(self._eta / g.h[idx])[:, None, None] * diff * dU
        sfac = g.sfac[idx]
        rho_in = np.matmul(tab_in[2], dU) * \
            (-0.5 * sfac / self._detJ[g.e_in[idx]])[:, None, None]
        if g.kind == "interior":
            rho_out = np.matmul(tab_out[2], dU) * \
                (-0.5 * sfac / self._detJ[g.e_out[idx]])[:, None, None]
            if name == "br2":
                rho = 0.5 * (rho_in + rho_out)
            else:
                rho = np.where(g.minus_in[idx, None, None], rho_in, rho_out)
        else:
            rho = rho_in
        fac = 4.0 * self._chi if name == "cdg" else 2.0 * self._chi
        return fac * diff * rho

    def _face_core(self, t, g, idx, out, e_in, tab_in, u_in, gref_in,
                   u_out, gref_out, e_out=None, tab_out=None):
        """Shared face-term assembly.

        gref_out: reference-index gradient of the outside trace, or
        None to reuse the inside one (Dirichlet mirror).  Writes outside
        rows only when e_out is given.
        """
        model = self.model
        ns = self.space.n_species
        dim = self.mesh.dim
        nq = len(self._wface)
        nF = len(e_in)
        n = g.normals[idx]
        wph = self._wface[None, :] * g.sfac[idx, None]
        Jinv_in = self._Jinv[e_in]
        jn_in = np.matmul(Jinv_in, n[:, :, None])[:, :, 0]
        dU = u_in - u_out
        two_sided = e_out is not None

        # normal derivatives kept species-major (F,s,q)
        gn_in = np.matmul(gref_in.reshape(nF, ns * nq, dim),
                          jn_in[:, :, None]).reshape(nF, ns, nq)
        if gref_out is None:
            jn_out = None
            gn_out = gn_in
        else:
            jn_out = np.matmul(self._Jinv[e_out], n[:, :, None])[:, :, 0]
            gn_out = np.matmul(gref_out.reshape(nF, ns * nq, dim),
                               jn_out[:, :, None]).reshape(nF, ns, nq)
        gavg_n = 0.5 * (gn_in + gn_out)

        a_n = self._penalty(g, idx, dU, tab_in, tab_out)
        q_tot = -a_n if a_n is not None else np.zeros_like(dU)
        if model.has_convection:
            gp_in = np.matmul(gref_in.reshape(nF, ns * nq, dim), Jinv_in)
            if gref_out is None:
                g_avg = gp_in
            else:
                gp_out = np.matmul(gref_out.reshape(nF, ns * nq, dim),
                                   self._Jinv[e_out])
                g_avg = 0.5 * (gp_in + gp_out)
            uf_in = u_in.reshape(-1, ns)
            uf_out = u_out.reshape(-1, ns)
            gf = np.ascontiguousarray(
                g_avg.reshape(nF, ns, nq, dim).transpose(0, 2, 1, 3)) \
                .reshape(-1, ns, dim)
            nf = np.repeat(n, nq, axis=0)
            lam = model.wave_speed(uf_in, uf_out, gf, nf).reshape(nF, nq)
            Fsum = model.conv_flux(uf_in, gf) + model.conv_flux(uf_out, gf)
            Fn = 0.5 * np.matmul(Fsum.reshape(nF, nq * ns, dim),
                                 n[:, :, None]).reshape(nF, nq, ns)
            q_tot += Fn + 0.5 * lam[:, :, None] * dU

        # weighted species-major integrands, one batched matmul per term
        wq = wph[:, None, :]
        coefT1 = 0.5 * self._adj_sign * self._diff
        Xd = wq * dU.transpose(0, 2, 1) * coefT1[None, :, None]
        Y = wq * (gavg_n * self._diff[None, :, None] -
                  q_tot.transpose(0, 2, 1))
        dphin_in = np.matmul(jn_in, tab_in[4]).reshape(nF, nq, -1)
        out[e_in] += np.matmul(Y, tab_in[0]) + np.matmul(Xd, dphin_in)
        if two_sided:
            dphin_out = np.matmul(jn_out, tab_out[4]).reshape(nF, nq, -1)
            out[e_out] += (np.matmul(-Y, tab_out[0]) +
                           np.matmul(Xd, dphin_out))

    def _interior_faces(self, U, t, g, idx, out):
        tab_in = self._tables[g.lf_in, g.pm_in]
        tab_out = self._tables[g.lf_out, g.pm_out]
        e_in = g.e_in[idx]
        e_out = g.e_out[idx]
        u_in, gref_in = self._trace(U, e_in, tab_in)
        u_out, gref_out = self._trace(U, e_out, tab_out)
        self._face_core(t, g, idx, out, e_in, tab_in, u_in, gref_in,
                        u_out, gref_out, e_out=e_out, tab_out=tab_out)

    def _dirichlet_faces(self, U, t, g, idx, out):
        tab_in = self._tables[g.lf_in, g.pm_in]
        e_in = g.e_in[idx]
        u_in, gref_in = self._trace(U, e_in, tab_in)
        gD = self.model.dirichlet_value(
            g.X[idx].reshape(-1, self.mesh.dim), t).reshape(u_in.shape)
        u_out = 2.0 * gD - u_in
        self._face_core(t, g, idx, out, e_in, tab_in, u_in, gref_in,
                        u_out, None)

    def _flux_bc_faces(self, U, t, g, idx, out):
        tab_in = self._tables[g.lf_in, g.pm_in]
        e_in = g.e_in[idx]
        B = tab_in[0]
        cf = U[e_in]
        u_in = np.matmul(B, cf.transpose(0, 2, 1))
        n = g.normals[idx]
        nf = np.repeat(n, len(self._wface), axis=0)
        ns = self.space.n_species
        q = self.model.boundary_flux(
            g.tag, u_in.reshape(-1, ns), nf, t).reshape(u_in.shape)
        wph = self._wface[None, :] * g.sfac[idx, None]
        out[e_in] -= np.matmul(wph[:, None, :] * q.transpose(0, 2, 1), B)
