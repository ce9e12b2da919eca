import numpy as np
import pytest

from viscosw.diagnostics import cross_section
from viscosw.engine import FieldState
from viscosw.errors import IoError
from viscosw.io import (
    FIELD_COLUMNS, emit_plot_script, fields_to_conserved, read_fields_csv, write_fields, write_profile,
    write_profile_1d,
)
from viscosw.mesh import build_cartesian_mesh
from viscosw.state import PhysParams

from helpers import random_field


@pytest.fixture
def field():
    mesh = build_cartesian_mesh(5, 4)
    p = random_field(5)
    p = type(p)(*(getattr(p, f)[:, :4] for f in ("h", "u", "v", "cxx", "cyy", "cxy", "czz")))
    return mesh, FieldState.from_primitive(p)


def test_csv_round_trip_is_exact(tmp_path, field):
    mesh, state = field
    path = tmp_path / "f.csv"
    write_fields(state, mesh, "csv", path, PhysParams(), "svtm")
    cols = read_fields_csv(path)
    assert list(cols) == list(FIELD_COLUMNS)
    assert len(cols["h"]) == mesh.n_cells
    q = fields_to_conserved(cols, mesh)
    np.testing.assert_allclose(q, state.q, rtol=1e-15, atol=1e-16)
    # rows run with i slow and j fast
    assert cols["x"][0] == cols["x"][1] and cols["y"][0] < cols["y"][1]


def test_vtk_layout(tmp_path, field):
    mesh, state = field
    path = tmp_path / "f.vtk"
    write_fields(state, mesh, "vtk", path)
    text = path.read_text().splitlines()
    assert text[0].startswith("# vtk DataFile")
    assert "DIMENSIONS 6 5 1" in text and "CELL_DATA 20" in text
    assert "TENSORS conformation double" in text and "VECTORS velocity double" in text
    i = text.index("SCALARS h double 1")
    # x runs fastest in VTK order
    assert float(text[i + 3]) == pytest.approx(state.q[1, 0, 0])


def test_unknown_format(tmp_path, field):
    mesh, state = field
    with pytest.raises(IoError):
        write_fields(state, mesh, "hdf5", tmp_path / "f.h5")


def test_write_failure_is_io_error(tmp_path, field):
    mesh, state = field
    with pytest.raises(IoError):
        write_fields(state, mesh, "csv", tmp_path / "missing" / "f.csv")


def test_read_missing_file(tmp_path):
    with pytest.raises(IoError):
        read_fields_csv(tmp_path / "nope.csv")


def test_profiles_and_plot_script(tmp_path, field):
    mesh, state = field
    write_profile(cross_section(state.q, mesh, "diagonal"), tmp_path / "diag.csv")
    write_profile_1d(np.linspace(0, 1, 5), {"h": np.ones(5), "un": np.zeros(5)}, tmp_path / "ref.csv")
    header = (tmp_path / "diag.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["s", "x", "y"] and "cnn" in header
    script = tmp_path / "plots" / "cmp.gp"
    script.parent.mkdir()
    emit_plot_script([("2D", tmp_path / "diag.csv"), ("1D", tmp_path / "ref.csv")], ["h", "un"], script,
                     image="cmp.png")
    text = script.read_text()
    assert "set multiplot layout 2,2" in text and "'../diag.csv'" in text and "title '1D'" in text
    assert str(tmp_path) not in text


def test_plot_script_rejects_missing_column(tmp_path):
    write_profile_1d(np.linspace(0, 1, 3), {"h": np.ones(3)}, tmp_path / "a.csv")
    with pytest.raises(IoError):
        emit_plot_script([tmp_path / "a.csv"], ["czz"], tmp_path / "a.gp")
    with pytest.raises(IoError):
        emit_plot_script([tmp_path / "b.csv"], ["h"], tmp_path / "a.gp")
