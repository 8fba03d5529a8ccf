"""Legacy ASCII VTK output for DG fields.

One unstructured grid per file: triangles (cell type 5) or tetrahedra
(type 10).  Each species is written twice, as per-cell data (the
element average, honest to the discontinuous representation) and as a
vertex-averaged point field which renders smoothly.  Legacy ASCII
rather than the XML formats so snapshots stay greppable.
"""

from __future__ import annotations

import numpy as np

from .fespace import DiscreteFunction

__all__ = ["write_vtk"]

_CELL_TYPE = {2: 5, 3: 10}


def _data_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "_-" else "_"
                   for ch in name) or "field"


def write_vtk(path, fn: DiscreteFunction, names=None,
              title: str = "taxisdg snapshot"):
    """Write one snapshot; returns the path.

    names: per-species field names (defaults to the model convention
    f0, f1, ... when not supplied).
    """
    space = fn.space
    mesh = space.mesh
    ns = space.n_species
    if names is None:
        names = [f"f{s}" for s in range(ns)]
    if len(names) != ns:
        raise ValueError(f"{len(names)} names for {ns} species")
    names = [_data_name(n) for n in names]

    cell = fn.cell_means()        # (ne, ns)
    point = fn.vertex_values()    # (nv, ns)
    if not (np.isfinite(cell).all() and np.isfinite(point).all()):
        raise ValueError("refusing to write non-finite field data")

    verts = mesh.vertices
    if mesh.dim == 2:
        verts = np.column_stack([verts, np.zeros(len(verts))])
    elems = mesh.elements
    npe = elems.shape[1]

    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(verts)} double"]
    lines += [" ".join(f"{c:.10g}" for c in v) for v in verts]
    lines.append(f"CELLS {len(elems)} {len(elems) * (npe + 1)}")
    lines += [f"{npe} " + " ".join(map(str, e)) for e in elems]
    lines.append(f"CELL_TYPES {len(elems)}")
    ct = _CELL_TYPE[mesh.dim]
    lines += [str(ct)] * len(elems)

    lines.append(f"CELL_DATA {len(elems)}")
    for s, name in enumerate(names):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [f"{v:.10g}" for v in cell[:, s]]
    lines.append(f"POINT_DATA {len(verts)}")
    for s, name in enumerate(names):
        lines.append(f"SCALARS {name}_vertex double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [f"{v:.10g}" for v in point[:, s]]

    with open(path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
    return path
