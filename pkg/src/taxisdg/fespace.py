"""Discontinuous piecewise-polynomial spaces over simplicial meshes.

Coefficients are stored as (element, species, mode) arrays against the
orthonormal reference basis, so the element mass matrix is |det J| times
the identity and its inverse is a per-element scale.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .basis import BasisSet, basis_size
from .mesh import LOCAL_FACES, PERMUTATIONS, REF_VERTICES, Mesh
from .quadrature import QuadRule, volume_rule

__all__ = ["DGSpace", "DiscreteFunction", "face_reference_points"]

# reference measures of the unit simplices
_REF_MEASURE = {2: 0.5, 3: 1.0 / 6.0}


def face_reference_points(dim: int, local_face: int, perm: int,
                          face_points: np.ndarray) -> np.ndarray:
    """Map face-rule points into element reference coordinates.

    `face_points` live on the face's own reference domain ([0,1] or the
    unit triangle) parametrized over the face's canonical (sorted) vertex
    order; `perm` says how that order sits inside the element's local
    face.
    """
    pts = np.asarray(face_points, dtype=float)
    if dim == 2:
        s = pts[:, 0]
        lam = np.column_stack([1.0 - s, s])
    else:
        u, v = pts[:, 0], pts[:, 1]
        lam = np.column_stack([1.0 - u - v, u, v])
    lv = LOCAL_FACES[dim][local_face]
    p = PERMUTATIONS[dim][perm]
    corners = REF_VERTICES[dim][[lv[p[i]] for i in range(dim)]]
    return lam @ corners


class DGSpace:
    """Vector-valued DG space of total degree `order` with `n_species`
    components per point."""

    def __init__(self, mesh: Mesh, order: int, n_species: int = 1):
        if n_species < 1:
            raise ValueError(f"n_species must be >= 1, got {n_species}")
        self.mesh = mesh
        self.order = order
        self.n_species = n_species
        self.basis = BasisSet(mesh.dim, order)
        self.nb = self.basis.size
        _, detJ, Jinv = mesh.jacobians()
        self.detJ = detJ
        self.Jinv = Jinv
        self.ref_measure = _REF_MEASURE[mesh.dim]

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.mesh.n_elements, self.n_species, self.nb)

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_elements * self.n_species * self.nb

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def function(self, coeffs: np.ndarray | None = None) -> "DiscreteFunction":
        if coeffs is None:
            coeffs = self.zeros()
        return DiscreteFunction(self, coeffs)

    def constant(self, values) -> "DiscreteFunction":
        """The exact modal representation of a spatially constant state:
        only the mean mode carries a coefficient, so gradients and jumps
        vanish identically rather than to projection roundoff."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_species,):
            raise ValueError(f"expected {self.n_species} species values")
        coeffs = self.zeros()
        coeffs[:, :, 0] = values * np.sqrt(self.ref_measure)
        return DiscreteFunction(self, coeffs)

    def project(self, fn: Callable[[np.ndarray], np.ndarray],
                quad_degree: int | None = None) -> "DiscreteFunction":
        """L2 projection of fn(x) -> (npts, n_species).

        Exact for polynomial data up to the quadrature degree; the
        default degree 2*order + 4 leaves smooth data at the accuracy of
        the space itself.
        """
        degree = 2 * self.order + 4 if quad_degree is None else quad_degree
        rule = volume_rule(self.mesh.dim, degree)
        phi = self.basis.eval(rule.points)          # (nq, nb)
        x = self._physical_points(rule)             # (ne, nq, d)
        ne, nq = x.shape[0], x.shape[1]
        vals = np.asarray(fn(x.reshape(ne * nq, -1)), dtype=float)
        if vals.shape != (ne * nq, self.n_species):
            raise ValueError(
                f"projection data has shape {vals.shape}, expected "
                f"{(ne * nq, self.n_species)}")
        vals = vals.reshape(ne, nq, self.n_species)
        coeffs = np.einsum("q,eqs,qi->esi", rule.weights, vals, phi,
                           optimize=True)
        return DiscreteFunction(self, coeffs)

    def mass_diagonal(self) -> np.ndarray:
        """Element mass matrix entries: |det J| for every mode."""
        return self.detJ

    def apply_inverse_mass(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs / self.detJ[:, None, None]

    def _physical_points(self, rule: QuadRule) -> np.ndarray:
        mesh = self.mesh
        J, _, _ = mesh.jacobians()
        v0 = mesh.vertices[mesh.elements[:, 0]]
        return v0[:, None, :] + np.einsum("eij,qj->eqi", J, rule.points)


class DiscreteFunction:
    """A DG field: a space plus its coefficient array."""

    def __init__(self, space: DGSpace, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != space.shape:
            raise ValueError(
                f"coefficients have shape {coeffs.shape}, expected "
                f"{space.shape}")
        self.space = space
        self.coeffs = coeffs

    def copy(self) -> "DiscreteFunction":
        return DiscreteFunction(self.space, self.coeffs.copy())

    def eval_ref(self, elems: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Evaluate at reference points xi[i] in element elems[i]."""
        phi = self.space.basis.eval(xi)             # (n, nb)
        return np.einsum("nsi,ni->ns", self.coeffs[elems], phi)

    def eval_physical(self, elems: np.ndarray, x: np.ndarray) -> np.ndarray:
        xi = self.space.mesh.to_reference(elems, x)
        return self.eval_ref(elems, xi)

    def cell_means(self) -> np.ndarray:
        """(ne, n_species) element averages."""
        m = self.space.ref_measure
        return self.coeffs[:, :, 0] / np.sqrt(m)

    def vertex_values(self) -> np.ndarray:
        """(nv, n_species) vertex averages over incident elements."""
        mesh = self.space.mesh
        dim = mesh.dim
        corners = REF_VERTICES[dim]
        phi = self.space.basis.eval(corners)        # (d+1, nb)
        vals = np.einsum("esi,ci->ecs", self.coeffs, phi)
        out = np.zeros((mesh.n_vertices, self.space.n_species))
        count = np.zeros(mesh.n_vertices)
        for c in range(dim + 1):
            np.add.at(out, mesh.elements[:, c], vals[:, c, :])
            np.add.at(count, mesh.elements[:, c], 1.0)
        return out / count[:, None]

    def species_totals(self) -> np.ndarray:
        """Integrals of each species over the domain."""
        m = self.space.ref_measure
        return np.sqrt(m) * (self.space.detJ[:, None]
                             * self.coeffs[:, :, 0]).sum(axis=0)
