"""Snapshot writer output structure."""
import numpy as np
import pytest

from taxisdg.fespace import DGSpace
from taxisdg.mesh import unit_cube, unit_square
from taxisdg.vtkio import write_vtk


def _field(mesh, ns=2, order=2):
    space = DGSpace(mesh, order, ns)

    def f(x):
        cols = [x[..., 0] + 0.5 * d for d in range(ns)]
        return np.stack(cols, axis=-1)

    return space.project(f)


def test_snapshot_structure(tmp_path):
    mesh = unit_square(3)
    fn = _field(mesh)
    path = write_vtk(tmp_path / "snap.vtk", fn, names=["smc", "lipid"])
    text = path.read_text()
    lines = text.splitlines()
    assert lines[0].startswith("# vtk DataFile")
    assert "ASCII" in lines
    assert f"POINTS {mesh.n_vertices} double" in lines
    assert f"CELLS {mesh.n_elements} {mesh.n_elements * 4}" in lines
    assert f"CELL_TYPES {mesh.n_elements}" in lines
    assert f"CELL_DATA {mesh.n_elements}" in lines
    assert f"POINT_DATA {mesh.n_vertices}" in lines
    assert "SCALARS smc double 1" in lines
    assert "SCALARS lipid double 1" in lines
    assert "SCALARS smc_vertex double 1" in lines
    # every triangle is written as cell type 5
    ct = lines.index(f"CELL_TYPES {mesh.n_elements}")
    assert all(l == "5" for l in lines[ct + 1:ct + 1 + mesh.n_elements])


def test_cell_data_values(tmp_path):
    mesh = unit_square(2)
    fn = _field(mesh, ns=1, order=1)
    path = write_vtk(tmp_path / "snap.vtk", fn)
    lines = path.read_text().splitlines()
    i = lines.index("SCALARS f0 double 1") + 2
    got = np.array([float(v) for v in lines[i:i + mesh.n_elements]])
    centroids = mesh.vertices[mesh.elements].mean(axis=1)
    assert np.allclose(got, centroids[:, 0], atol=1e-9)


def test_tet_cell_type(tmp_path):
    fn = _field(unit_cube(1), ns=1, order=1)
    text = write_vtk(tmp_path / "cube.vtk", fn).read_text()
    assert "CELL_TYPES 6" in text
    assert "\n10\n" in text


def test_default_names_and_sanitization(tmp_path):
    fn = _field(unit_square(2), ns=2)
    text = write_vtk(tmp_path / "a.vtk", fn).read_text()
    assert "SCALARS f0 double 1" in text and "SCALARS f1 double 1" in text
    text = write_vtk(tmp_path / "b.vtk", fn,
                     names=["foam cells", "ox-LDL"]).read_text()
    assert "SCALARS foam_cells double 1" in text
    assert "SCALARS ox-LDL double 1" in text


def test_name_count_mismatch(tmp_path):
    fn = _field(unit_square(2), ns=2)
    with pytest.raises(ValueError, match="names for"):
        write_vtk(tmp_path / "a.vtk", fn, names=["only_one"])


def test_nonfinite_data_refused(tmp_path):
    fn = _field(unit_square(2), ns=1)
    fn.coeffs[0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        write_vtk(tmp_path / "a.vtk", fn)
