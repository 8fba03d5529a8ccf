"""Conforming simplicial meshes: topology, generators, refinement,
partitioning, and a Gmsh MSH 2.2 ASCII reader.

A mesh stores vertices and elements plus a face table built once at
construction.  Every element is stored with positive signed volume (the
constructor swaps two vertices where needed), every interior face knows
both adjacent elements, and every boundary face carries one of the four
boundary tags.  Meshes produced by `refine_uniform` keep a link to their
parent, which nested-mesh error evaluation relies on.

Example::

    mesh = unit_square(4)           # 32 triangles
    fine = mesh.refine_uniform()    # 128, children linked to parents
    parts = fine.partition(3)       # recursive coordinate bisection
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = [
    "BoundaryTag", "Face", "Mesh", "MeshError", "MeshFormatError",
    "MeshTopologyError", "unit_square", "unit_cube", "annulus_sector",
    "load_gmsh", "is_gamma1",
]


class MeshError(Exception):
    pass


class MeshFormatError(MeshError):
    pass


class MeshTopologyError(MeshError):
    pass


class BoundaryTag(IntEnum):
    """Boundary classification; 0 is reserved for interior faces."""

    GAMMA1 = 1      # inner / bottom wall
    GAMMA1_IN = 2   # inflow subset of GAMMA1
    GAMMA2 = 3      # outer / top wall
    NO_FLOW = 4


def is_gamma1(tag: int) -> bool:
    """GAMMA1_IN faces are GAMMA1 faces with extra inflow."""
    return tag in (BoundaryTag.GAMMA1, BoundaryTag.GAMMA1_IN)


# local face f of a d-simplex is the face opposite local vertex f
LOCAL_FACES = {
    2: ((1, 2), (2, 0), (0, 1)),
    3: ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)),
}

# vertex permutations mapping canonical (sorted) face order to the
# element-local ordering; the index stored per face side refers here
PERMUTATIONS = {
    2: ((0, 1), (1, 0)),
    3: tuple(itertools.permutations((0, 1, 2))),
}

# reference simplex vertices, row per vertex
REF_VERTICES = {
    2: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    3: np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                 [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
}


@dataclass(frozen=True)
class Face:
    """Read-only view of one mesh face."""

    id: int
    vertices: tuple[int, ...]
    inside: int
    outside: int            # -1 on the boundary
    local: tuple[int, int]  # local face index per side, -1 where absent
    perm: tuple[int, int]
    normal: np.ndarray      # unit, outward w.r.t. the inside element
    measure: float
    tag: int                # BoundaryTag value, 0 for interior faces


class Mesh:
    """Unstructured conforming simplicial mesh in 2 or 3 dimensions."""

    def __init__(self, vertices: np.ndarray, elements: np.ndarray,
                 boundary_tags: dict[tuple[int, ...], int] | None = None,
                 parent: tuple["Mesh", np.ndarray] | None = None,
                 default_tag: int = BoundaryTag.NO_FLOW):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        elements = np.ascontiguousarray(elements, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise MeshTopologyError(
                f"vertices must be (n, 2) or (n, 3), got {vertices.shape}")
        dim = vertices.shape[1]
        if elements.ndim != 2 or elements.shape[1] != dim + 1:
            raise MeshTopologyError(
                f"elements must be (n, {dim + 1}) for dim {dim}, "
                f"got {elements.shape}")
        if elements.size and (elements.min() < 0
                              or elements.max() >= len(vertices)):
            raise MeshTopologyError("element vertex index out of range")
        self.dim = dim
        self.vertices = vertices
        self.elements = self._orient_positive(vertices, elements)
        self.parent = parent
        self._build_geometry()
        self._build_faces(boundary_tags or {}, default_tag)
        self._jacobians = None

    # -- construction ---------------------------------------------------

    @staticmethod
    def _signed_volumes(vertices, elements):
        v0 = vertices[elements[:, 0]]
        edges = vertices[elements[:, 1:]] - v0[:, None, :]
        dim = vertices.shape[1]
        if dim == 2:
            det = (edges[:, 0, 0] * edges[:, 1, 1]
                   - edges[:, 0, 1] * edges[:, 1, 0])
            return det / 2.0
        det = np.linalg.det(edges)
        return det / 6.0

    def _orient_positive(self, vertices, elements):
        vols = self._signed_volumes(vertices, elements)
        scale = np.abs(vols).max(initial=1.0)
        if np.any(np.abs(vols) <= 1e-14 * scale):
            bad = int(np.argmin(np.abs(vols)))
            raise MeshTopologyError(
                f"element {bad} is degenerate (volume {vols[bad]:.3e})")
        flipped = elements.copy()
        neg = vols < 0
        flipped[neg, -2], flipped[neg, -1] = (elements[neg, -1],
                                              elements[neg, -2])
        return flipped

    def _build_geometry(self):
        self.volumes = self._signed_volumes(self.vertices, self.elements)
        self.centroids = self.vertices[self.elements].mean(axis=1)
        corners = self.vertices[self.elements]
        diam = np.zeros(len(self.elements))
        for a, b in itertools.combinations(range(self.dim + 1), 2):
            d = np.linalg.norm(corners[:, a] - corners[:, b], axis=1)
            np.maximum(diam, d, out=diam)
        self.diameters = diam

    def _build_faces(self, boundary_tags, default_tag):
        dim = self.dim
        local_faces = LOCAL_FACES[dim]
        perms = PERMUTATIONS[dim]
        touch: dict[tuple[int, ...], list[tuple[int, int]]] = {}
        for e in range(len(self.elements)):
            elem = self.elements[e]
            for lf, lv in enumerate(local_faces):
                key = tuple(sorted(int(elem[i]) for i in lv))
                touch.setdefault(key, []).append((e, lf))
        for key, sides in touch.items():
            if len(sides) > 2:
                raise MeshTopologyError(
                    f"face {key} shared by {len(sides)} elements "
                    f"{[s[0] for s in sides]}; mesh is not conforming")

        nf = len(touch)
        self.face_vertices = np.empty((nf, dim), dtype=np.int64)
        self.face_elems = np.full((nf, 2), -1, dtype=np.int64)
        self.face_local = np.full((nf, 2), -1, dtype=np.int8)
        self.face_perm = np.full((nf, 2), -1, dtype=np.int8)
        self.face_normals = np.empty((nf, dim))
        self.face_measures = np.empty(nf)
        self.face_tags = np.zeros(nf, dtype=np.int8)

        # deterministic face ordering: first touch during the element scan
        order = sorted(touch.items(), key=lambda kv: (kv[1][0], kv[0]))
        for fid, (key, sides) in enumerate(order):
            self.face_vertices[fid] = key
            for col, (e, lf) in enumerate(sides):
                self.face_elems[fid, col] = e
                self.face_local[fid, col] = lf
                elem = self.elements[e]
                ef = tuple(int(elem[i]) for i in LOCAL_FACES[dim][lf])
                for pidx, p in enumerate(perms):
                    if tuple(ef[p[i]] for i in range(dim)) == key:
                        self.face_perm[fid, col] = pidx
                        break
                else:
                    raise MeshTopologyError(
                        f"face {key}: no vertex permutation matches "
                        f"element {e}")
            self._face_geometry(fid)
            if len(sides) == 1:
                tag = boundary_tags.get(key, default_tag)
                if tag not in set(int(t) for t in BoundaryTag):
                    raise MeshTopologyError(
                        f"face {key}: invalid boundary tag {tag}")
                self.face_tags[fid] = tag
        for key in boundary_tags:
            if tuple(sorted(key)) not in touch or len(touch[tuple(sorted(key))]) != 1:
                raise MeshTopologyError(
                    f"tagged boundary face {key} is not a boundary face "
                    f"of the mesh")

    def _face_geometry(self, fid):
        key = self.face_vertices[fid]
        pts = self.vertices[key]
        if self.dim == 2:
            t = pts[1] - pts[0]
            measure = float(np.linalg.norm(t))
            normal = np.array([t[1], -t[0]]) / measure
        else:
            cr = np.cross(pts[1] - pts[0], pts[2] - pts[0])
            nrm = float(np.linalg.norm(cr))
            measure = nrm / 2.0
            normal = cr / nrm
        # orient outward w.r.t. the inside element
        e, lf = self.face_elems[fid, 0], self.face_local[fid, 0]
        opp = self.vertices[self.elements[e, lf]]
        if np.dot(normal, pts.mean(axis=0) - opp) < 0:
            normal = -normal
        self.face_normals[fid] = normal
        self.face_measures[fid] = measure

    # -- queries --------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_faces(self) -> int:
        return len(self.face_vertices)

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.face_elems[:, 1] < 0

    def face(self, fid: int) -> Face:
        return Face(
            id=fid,
            vertices=tuple(int(v) for v in self.face_vertices[fid]),
            inside=int(self.face_elems[fid, 0]),
            outside=int(self.face_elems[fid, 1]),
            local=(int(self.face_local[fid, 0]), int(self.face_local[fid, 1])),
            perm=(int(self.face_perm[fid, 0]), int(self.face_perm[fid, 1])),
            normal=self.face_normals[fid].copy(),
            measure=float(self.face_measures[fid]),
            tag=int(self.face_tags[fid]),
        )

    def jacobians(self):
        """Affine maps x = v0 + J xi: returns (J, detJ, Jinv)."""
        if self._jacobians is None:
            v0 = self.vertices[self.elements[:, 0]]
            J = np.swapaxes(
                self.vertices[self.elements[:, 1:]] - v0[:, None, :], 1, 2)
            detJ = np.linalg.det(J)
            Jinv = np.linalg.inv(J)
            self._jacobians = (np.ascontiguousarray(J), detJ,
                               np.ascontiguousarray(Jinv))
        return self._jacobians

    def to_reference(self, elems: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Map physical points to reference coordinates, per element."""
        J, _, Jinv = self.jacobians()
        v0 = self.vertices[self.elements[elems, 0]]
        return np.einsum("eij,ej->ei", Jinv[elems], x - v0)

    def from_reference(self, elems: np.ndarray, xi: np.ndarray) -> np.ndarray:
        J, _, _ = self.jacobians()
        v0 = self.vertices[self.elements[elems, 0]]
        return v0 + np.einsum("eij,ej->ei", J[elems], xi)

    def boundary_measure(self, tag: int) -> float:
        return float(self.face_measures[self.face_tags == tag].sum())

    # -- refinement -----------------------------------------------------

    def refine_uniform(self) -> "Mesh":
        """Red refinement: 4 children per triangle, 8 per tetrahedron."""
        if self.dim == 2:
            verts, elems, parents = self._refine_tri()
        else:
            verts, elems, parents = self._refine_tet()
        tags = self._child_boundary_tags(verts, elems)
        return Mesh(verts, elems, boundary_tags=tags,
                    parent=(self, parents))

    def _edge_midpoints(self):
        verts = list(self.vertices)
        mid: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            idx = mid.get(key)
            if idx is None:
                idx = len(verts)
                verts.append((self.vertices[key[0]]
                              + self.vertices[key[1]]) / 2.0)
                mid[key] = idx
            return idx

        return verts, midpoint

    def _refine_tri(self):
        verts, midpoint = self._edge_midpoints()
        elems = []
        parents = []
        for e, (v0, v1, v2) in enumerate(self.elements):
            m01 = midpoint(v0, v1)
            m12 = midpoint(v1, v2)
            m02 = midpoint(v0, v2)
            elems += [(v0, m01, m02), (m01, v1, m12),
                      (m02, m12, v2), (m01, m12, m02)]
            parents += [e] * 4
        return (np.array(verts), np.array(elems, dtype=np.int64),
                np.array(parents, dtype=np.int64))

    # octahedron diagonals and the matching equator cycles, in terms of
    # edge midpoints m[a][b] of the parent tet
    _OCT_DIAGONALS = (((0, 1), (2, 3), ((0, 2), (0, 3), (1, 3), (1, 2))),
                      ((0, 2), (1, 3), ((0, 1), (0, 3), (2, 3), (1, 2))),
                      ((0, 3), (1, 2), ((0, 1), (0, 2), (2, 3), (1, 3))))

    def _refine_tet(self):
        verts, midpoint = self._edge_midpoints()
        elems = []
        parents = []
        for e, tet in enumerate(self.elements):
            tet = [int(v) for v in tet]
            m = {}
            for a, b in itertools.combinations(range(4), 2):
                m[(a, b)] = midpoint(tet[a], tet[b])
            for c in range(4):
                others = [x for x in range(4) if x != c]
                child = [tet[c]] + [m[tuple(sorted((c, o)))] for o in others]
                elems.append(tuple(child))
                parents.append(e)
            # split the central octahedron along its shortest diagonal;
            # ties resolved by the lexicographically smallest global pair
            best = None
            for da, db, cycle in self._OCT_DIAGONALS:
                ga, gb = m[da], m[db]
                length = float(np.dot(verts[ga] - verts[gb],
                                      verts[ga] - verts[gb]))
                cand = (length, tuple(sorted((ga, gb))), (da, db, cycle))
                if best is None or cand[:2] < best[:2]:
                    best = cand
            da, db, cycle = best[2]
            eq = [m[c] for c in cycle]
            for i in range(4):
                elems.append((m[da], m[db], eq[i], eq[(i + 1) % 4]))
                parents.append(e)
        return (np.array(verts), np.array(elems, dtype=np.int64),
                np.array(parents, dtype=np.int64))

    def _child_boundary_tags(self, verts, elems):
        """Tag child boundary faces from the parent face they lie in."""
        parent_face_tag = {}
        for fid in range(self.n_faces):
            if self.face_elems[fid, 1] < 0:
                e = int(self.face_elems[fid, 0])
                lf = int(self.face_local[fid, 0])
                parent_face_tag[(e, lf)] = int(self.face_tags[fid])
        if not parent_face_tag:
            return {}
        # rebuild child face keys the same way Mesh will
        child = {}
        nchild = 4 if self.dim == 2 else 8
        local_faces = LOCAL_FACES[self.dim]
        counts: dict[tuple[int, ...], int] = {}
        owner: dict[tuple[int, ...], tuple[int, int]] = {}
        for ce, elem in enumerate(elems):
            for lf, lv in enumerate(local_faces):
                key = tuple(sorted(int(elem[i]) for i in lv))
                counts[key] = counts.get(key, 0) + 1
                owner.setdefault(key, (ce, lf))
        _, _, Jinv = self.jacobians()
        v0 = self.vertices[self.elements[:, 0]]
        for key, cnt in counts.items():
            if cnt != 1:
                continue
            ce, lf = owner[key]
            pe = ce // nchild
            # barycentric coordinates of the child-face corners in the
            # parent element; the coordinate that vanishes on all of them
            # identifies the parent local face
            pts = np.array([verts[v] for v in key])
            xi = (pts - v0[pe]) @ Jinv[pe].T
            lam = np.column_stack([1.0 - xi.sum(axis=1), xi])
            on = np.all(np.abs(lam) < 1e-9, axis=0)
            hits = np.flatnonzero(on)
            if len(hits) != 1:
                continue  # interior to the parent, not a boundary face
            tag = parent_face_tag.get((pe, int(hits[0])))
            if tag is not None:
                child[key] = tag
        return child

    def ancestor_map(self, coarse: "Mesh") -> np.ndarray:
        """Element index map from this mesh to an ancestor mesh."""
        if coarse is self:
            return np.arange(self.n_elements, dtype=np.int64)
        chain = np.arange(self.n_elements, dtype=np.int64)
        mesh = self
        while mesh.parent is not None:
            parent_mesh, parent_ids = mesh.parent
            chain = parent_ids[chain]
            mesh = parent_mesh
            if mesh is coarse:
                return chain
        raise MeshError("meshes are not related by refinement")

    # -- partitioning ---------------------------------------------------

    def partition(self, nparts: int) -> np.ndarray:
        """Recursive coordinate bisection on element centroids.

        Deterministic: the split axis is always the widest coordinate
        spread, elements are ordered by (coordinate, element id).
        Part sizes differ by at most one from the even split.
        """
        if nparts < 1:
            raise ValueError(f"nparts must be >= 1, got {nparts}")
        parts = np.zeros(self.n_elements, dtype=np.int64)
        stack = [(np.arange(self.n_elements), 0, nparts)]
        while stack:
            idx, first, count = stack.pop()
            if count == 1:
                parts[idx] = first
                continue
            cen = self.centroids[idx]
            axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
            order = np.lexsort((idx, cen[:, axis]))
            left_parts = count // 2
            nleft = len(idx) * left_parts // count
            stack.append((idx[order[:nleft]], first, left_parts))
            stack.append((idx[order[nleft:]], first + left_parts,
                          count - left_parts))
        return parts


# ---------------------------------------------------------------------------
# generators


def unit_square(nx: int, ny: int | None = None,
                gamma1_in: tuple[float, float] = (0.25, 0.75)) -> Mesh:
    """Structured triangulation of [0,1]^2, two triangles per cell.

    The bottom edge (y=0) is GAMMA1 with the x-interval `gamma1_in`
    tagged GAMMA1_IN (by face midpoint), the top edge is GAMMA2, the
    sides are NO_FLOW.
    """
    if ny is None:
        ny = nx
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be >= 1")
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    vid = lambda i, j: j * (nx + 1) + i
    verts = np.array([[x, y] for y in ys for x in xs])
    elems = []
    for j in range(ny):
        for i in range(nx):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            elems += [(a, b, c), (a, c, d)]
    tags = {}
    for i in range(nx):
        mid = 0.5 * (xs[i] + xs[i + 1])
        low = (BoundaryTag.GAMMA1_IN
               if gamma1_in[0] <= mid <= gamma1_in[1] else BoundaryTag.GAMMA1)
        tags[tuple(sorted((vid(i, 0), vid(i + 1, 0))))] = low
        tags[tuple(sorted((vid(i, ny), vid(i + 1, ny))))] = BoundaryTag.GAMMA2
    for j in range(ny):
        tags[tuple(sorted((vid(0, j), vid(0, j + 1))))] = BoundaryTag.NO_FLOW
        tags[tuple(sorted((vid(nx, j), vid(nx, j + 1))))] = BoundaryTag.NO_FLOW
    return Mesh(verts, np.array(elems, dtype=np.int64), boundary_tags=tags)


# the six tetrahedra of the Kuhn triangulation of a cube, as vertex
# bitmasks (bit 0 = +x, bit 1 = +y, bit 2 = +z) along monotone paths
_KUHN_PATHS = [(0, 1 << p0, (1 << p0) | (1 << p1), 7)
               for p0, p1, _ in itertools.permutations((0, 1, 2))]


def unit_cube(nx: int, ny: int | None = None, nz: int | None = None,
              gamma1_in: tuple[float, float, float, float]
              = (0.25, 0.75, 0.25, 0.75)) -> Mesh:
    """Kuhn triangulation of [0,1]^3, six tetrahedra per cell.

    The bottom face (z=0) is GAMMA1 with the axis-aligned rectangle
    gamma1_in = (x0, x1, y0, y1) tagged GAMMA1_IN (by face centroid),
    the top face is GAMMA2, the sides are NO_FLOW.
    """
    if ny is None:
        ny = nx
    if nz is None:
        nz = nx
    if min(nx, ny, nz) < 1:
        raise ValueError("nx, ny, nz must be >= 1")
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    zs = np.linspace(0.0, 1.0, nz + 1)
    vid = lambda i, j, k: (k * (ny + 1) + j) * (nx + 1) + i
    verts = np.array([[x, y, z] for z in zs for y in ys for x in xs])
    elems = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                corner = lambda b: vid(i + (b & 1), j + ((b >> 1) & 1),
                                       k + ((b >> 2) & 1))
                for path in _KUHN_PATHS:
                    elems.append(tuple(corner(b) for b in path))
    mesh_elems = np.array(elems, dtype=np.int64)
    tags = {}
    x0, x1, y0, y1 = gamma1_in

    def tag_patch(k, tag_of):
        for j in range(ny):
            for i in range(nx):
                quad = [vid(i, j, k), vid(i + 1, j, k),
                        vid(i + 1, j + 1, k), vid(i, j + 1, k)]
                cx = 0.5 * (xs[i] + xs[i + 1])
                cy = 0.5 * (ys[j] + ys[j + 1])
                # the cell face splits into two triangles along the Kuhn
                # diagonal (low corner -> high corner)
                for tri in ((quad[0], quad[1], quad[2]),
                            (quad[0], quad[2], quad[3])):
                    tags[tuple(sorted(tri))] = tag_of(cx, cy)

    tag_patch(0, lambda cx, cy: (BoundaryTag.GAMMA1_IN
                                 if x0 <= cx <= x1 and y0 <= cy <= y1
                                 else BoundaryTag.GAMMA1))
    tag_patch(nz, lambda cx, cy: BoundaryTag.GAMMA2)
    return Mesh(verts, mesh_elems, boundary_tags=tags,
                default_tag=BoundaryTag.NO_FLOW)


def annulus_sector(r_inner: float = 1.0, r_outer: float = 1.5,
                   span_deg: float = 300.0, nr: int = 2, ntheta: int = 20,
                   corner_deg: float = 171.0,
                   gamma1_in_deg: tuple[float, float] = (120.0, 180.0)) -> Mesh:
    """Polygonal annulus sector with a re-entrant corner on the outer wall.

    The domain is a polar grid of quads split into triangles.  At the
    mid-span grid angle the outer-boundary vertex is pulled inward so the
    two boundary segments meeting there enclose `corner_deg` degrees
    (measured through the notch); seen from inside the domain the corner
    angle is 360 - corner_deg degrees, i.e. re-entrant for corner_deg
    below 180.  Refinement is affine, so the corner angle is preserved on
    all refinement levels.

    The inner arc is GAMMA1 (GAMMA1_IN for face-midpoint angles inside
    `gamma1_in_deg`), the outer arc including the notch is GAMMA2, and
    the two radial cut edges are NO_FLOW.  Defaults give 2*nr*ntheta = 80
    elements.
    """
    if not 0 < span_deg < 360:
        raise ValueError("span_deg must be in (0, 360)")
    if not 0 < corner_deg < 180:
        raise ValueError("corner_deg must be in (0, 180)")
    if nr < 1 or ntheta < 2:
        raise ValueError("need nr >= 1 and ntheta >= 2")
    if r_inner <= 0 or r_outer <= r_inner:
        raise ValueError("need 0 < r_inner < r_outer")
    span = math.radians(span_deg)
    dtheta = span / ntheta
    radii = np.linspace(r_inner, r_outer, nr + 1)
    thetas = np.linspace(0.0, span, ntheta + 1)

    mid_idx = ntheta // 2
    alpha = math.radians(corner_deg)
    rho = r_outer * (math.cos(dtheta)
                     - math.sin(dtheta) / math.tan(alpha / 2.0))
    if rho <= radii[nr - 1] + 0.05 * (radii[nr] - radii[nr - 1]):
        raise MeshTopologyError(
            f"corner_deg={corner_deg} pulls the notch vertex to radius "
            f"{rho:.4f}, inside the r={radii[nr - 1]:.4f} grid ring; "
            f"use a wider corner angle or more radial layers")

    vid = lambda ri, ti: ri * (ntheta + 1) + ti
    verts = np.empty(((nr + 1) * (ntheta + 1), 2))
    for ri, r in enumerate(radii):
        for ti, th in enumerate(thetas):
            rr = rho if (ri == nr and ti == mid_idx) else r
            verts[vid(ri, ti)] = (rr * math.cos(th), rr * math.sin(th))
    elems = []
    for ri in range(nr):
        for ti in range(ntheta):
            a, b = vid(ri, ti), vid(ri + 1, ti)
            c, d = vid(ri + 1, ti + 1), vid(ri, ti + 1)
            elems += [(a, b, c), (a, c, d)]
    tags = {}
    lo, hi = (math.radians(gamma1_in_deg[0]), math.radians(gamma1_in_deg[1]))
    for ti in range(ntheta):
        mid = 0.5 * (thetas[ti] + thetas[ti + 1])
        inner = (BoundaryTag.GAMMA1_IN if lo <= mid <= hi
                 else BoundaryTag.GAMMA1)
        tags[tuple(sorted((vid(0, ti), vid(0, ti + 1))))] = inner
        tags[tuple(sorted((vid(nr, ti), vid(nr, ti + 1))))] = BoundaryTag.GAMMA2
    for ri in range(nr):
        tags[tuple(sorted((vid(ri, 0), vid(ri + 1, 0))))] = BoundaryTag.NO_FLOW
        tags[tuple(sorted((vid(ri, ntheta),
                           vid(ri + 1, ntheta))))] = BoundaryTag.NO_FLOW
    return Mesh(verts, np.array(elems, dtype=np.int64), boundary_tags=tags)


# ---------------------------------------------------------------------------
# Gmsh MSH 2.2 ASCII reader

_GMSH_TRI = 2
_GMSH_TET = 4
_GMSH_LINE = 1
_GMSH_POINT = 15
_GMSH_NNODES = {_GMSH_LINE: 2, _GMSH_TRI: 3, _GMSH_TET: 4, _GMSH_POINT: 1}

_TAG_NAMES = {
    "gamma1": BoundaryTag.GAMMA1,
    "gamma1in": BoundaryTag.GAMMA1_IN,
    "gamma2": BoundaryTag.GAMMA2,
    "noflow": BoundaryTag.NO_FLOW,
}
_TAG_NUMBERS = {1: BoundaryTag.GAMMA1, 2: BoundaryTag.GAMMA2,
                3: BoundaryTag.GAMMA1_IN, 4: BoundaryTag.NO_FLOW}


def load_gmsh(path) -> Mesh:
    """Read a Gmsh MSH 2.2 ASCII file.

    Supported element types: 2-node lines, triangles, tetrahedra and
    points.  If tetrahedra are present the mesh is 3D and triangles are
    treated as tagged boundary faces; otherwise lines tag triangle
    edges.  Physical names Gamma1 / Gamma1In / Gamma2 / NoFlow (case and
    underscore insensitive) map to boundary tags; without a
    $PhysicalNames section the physical ids 1..4 map to Gamma1, Gamma2,
    Gamma1In, NoFlow in that order.  Untagged boundary faces default to
    NoFlow.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()

    def fail(i, msg):
        raise MeshFormatError(f"{path}:{i + 1}: {msg}")

    sections: dict[str, tuple[int, list[str]]] = {}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if not line.startswith("$"):
            fail(i, f"expected a section header, got {line!r}")
        name = line[1:]
        end = f"$End{name}"
        j = i + 1
        body = []
        while j < len(lines) and lines[j].strip() != end:
            body.append((j, lines[j].strip()))
            j += 1
        if j == len(lines):
            fail(i, f"unterminated section {line!r}")
        sections[name] = (i, body)
        i = j + 1

    if "MeshFormat" not in sections:
        raise MeshFormatError(f"{path}: missing $MeshFormat section")
    idx, body = sections["MeshFormat"]
    if not body or not body[0][1].startswith("2.2"):
        fail(idx, "only MSH format 2.2 ASCII is supported")

    phys_names: dict[int, int] = {}
    if "PhysicalNames" in sections:
        _, body = sections["PhysicalNames"]
        for k, (ln, text) in enumerate(body):
            if k == 0:
                continue
            parts = text.split(None, 2)
            if len(parts) != 3:
                fail(ln, f"malformed physical name: {text!r}")
            name = parts[2].strip().strip('"').lower().replace("_", "")
            if name not in _TAG_NAMES:
                fail(ln, f"unknown physical name {parts[2]!r}; expected "
                         f"one of Gamma1, Gamma1In, Gamma2, NoFlow")
            phys_names[int(parts[1])] = _TAG_NAMES[name]

    if "Nodes" not in sections:
        raise MeshFormatError(f"{path}: missing $Nodes section")
    _, body = sections["Nodes"]
    node_ids = {}
    coords = []
    for k, (ln, text) in enumerate(body):
        if k == 0:
            continue
        parts = text.split()
        if len(parts) != 4:
            fail(ln, f"malformed node line: {text!r}")
        node_ids[int(parts[0])] = len(coords)
        coords.append([float(parts[1]), float(parts[2]), float(parts[3])])
    coords = np.array(coords)

    if "Elements" not in sections:
        raise MeshFormatError(f"{path}: missing $Elements section")
    _, body = sections["Elements"]
    cells: dict[int, list[tuple[int, tuple[int, ...]]]] = {
        _GMSH_LINE: [], _GMSH_TRI: [], _GMSH_TET: []}
    for k, (ln, text) in enumerate(body):
        if k == 0:
            continue
        parts = [int(p) for p in text.split()]
        if len(parts) < 3:
            fail(ln, f"malformed element line: {text!r}")
        etype, ntags = parts[1], parts[2]
        if etype == _GMSH_POINT:
            continue
        if etype not in _GMSH_NNODES:
            fail(ln, f"unsupported element type {etype}")
        nn = _GMSH_NNODES[etype]
        if len(parts) != 3 + ntags + nn:
            fail(ln, f"element line has {len(parts) - 3 - ntags} nodes, "
                     f"expected {nn}")
        phys = parts[3] if ntags >= 1 else 0
        try:
            nodes = tuple(node_ids[p] for p in parts[3 + ntags:])
        except KeyError as exc:
            fail(ln, f"element references unknown node {exc.args[0]}")
        cells[etype].append((phys, nodes))

    if cells[_GMSH_TET]:
        dim, bnd_type = 3, _GMSH_TRI
    elif cells[_GMSH_TRI]:
        dim, bnd_type = 2, _GMSH_LINE
    else:
        raise MeshFormatError(f"{path}: no triangles or tetrahedra found")
    vol_type = _GMSH_TET if dim == 3 else _GMSH_TRI

    elements = np.array([nodes for _, nodes in cells[vol_type]],
                        dtype=np.int64)
    used = np.unique(elements)
    remap = -np.ones(len(coords), dtype=np.int64)
    remap[used] = np.arange(len(used))
    elements = remap[elements]
    verts = coords[used][:, :dim]
    if dim == 2 and np.any(np.abs(coords[used][:, 2]) > 1e-12):
        raise MeshFormatError(f"{path}: 2D mesh has nonzero z coordinates")

    tags = {}
    for phys, nodes in cells[bnd_type]:
        if phys in phys_names:
            tag = phys_names[phys]
        elif phys in _TAG_NUMBERS and not phys_names:
            tag = _TAG_NUMBERS[phys]
        else:
            raise MeshFormatError(
                f"{path}: boundary element has unmapped physical id {phys}")
        mapped = tuple(sorted(int(remap[n]) for n in nodes))
        if any(m < 0 for m in mapped):
            raise MeshTopologyError(
                f"{path}: boundary element {nodes} uses nodes not in any "
                f"volume element")
        tags[mapped] = int(tag)
    return Mesh(verts, elements, boundary_tags=tags)
