import numpy as np
import pytest

from viscosw.errors import BadDimensions
from viscosw.mesh import (
    BoundarySpec, NoSlipWall, Outflow, SlipWall, TranslationInvariant, build_cartesian_mesh, ghost_state, padded,
)
from viscosw.state import PrimitiveState, conserved_to_primitive, primitive_to_conserved

from helpers import random_field


def test_mesh_geometry():
    m = build_cartesian_mesh(4, 2, 2.0, 1.0)
    assert (m.dx, m.dy, m.n_cells, m.cell_area) == (0.5, 0.5, 8, 0.25)
    np.testing.assert_allclose(m.xc, [0.25, 0.75, 1.25, 1.75])
    x, y = m.centers()
    assert x.shape == (4, 2) and y[0, 1] == 0.75
    assert m.inverse_capacity == pytest.approx(8.0)


@pytest.mark.parametrize("args", [(0, 3), (3, -1), (3, 3, 0.0, 1.0), (3, 3, 1.0, -2.0)])
def test_bad_dimensions(args):
    with pytest.raises(BadDimensions):
        build_cartesian_mesh(*args)


def test_face_topology():
    m = build_cartesian_mesh(3, 2)
    f = m.faces()
    assert len(f["normal"]) == (m.nx + 1) * m.ny + m.nx * (m.ny + 1)
    assert np.sum(f["boundary"] != "") == 2 * (m.nx + m.ny)
    interior = f["boundary"] == ""
    assert np.all(f["left"][interior] >= 0) and np.all(f["right"][interior] >= 0)


STATE = PrimitiveState(1.5, 0.7, -0.3, 1.4, 0.9, 0.25, 1.2)


def test_slip_wall_reflects_normal_components():
    q = primitive_to_conserved(STATE)
    g = conserved_to_primitive(ghost_state(q, SlipWall(), (1.0, 0.0)))
    got = [g.h, g.u, g.v, g.cxx, g.cyy, g.cxy, g.czz]
    np.testing.assert_allclose(got, [1.5, -0.7, -0.3, 1.4, 0.9, -0.25, 1.2], rtol=1e-15)


def test_no_slip_wall_at_rest_reverses_velocity():
    q = primitive_to_conserved(STATE)
    g = conserved_to_primitive(ghost_state(q, NoSlipWall(0.0), (0.0, 1.0)))
    assert g.u == pytest.approx(-0.7, abs=1e-15) and g.v == pytest.approx(0.3, abs=1e-15)


def test_moving_lid_sets_mean_tangential_velocity():
    q = primitive_to_conserved(PrimitiveState.rest())
    g = conserved_to_primitive(ghost_state(q, NoSlipWall(1.0), (0.0, 1.0)))
    # the face average of interior and ghost velocity equals the lid velocity (1, 0)
    assert 0.5 * (g.u + 0.0) == pytest.approx(1.0) and g.v == pytest.approx(0.0, abs=1e-15)


def test_regularized_lid_vanishes_at_corners():
    q = primitive_to_conserved(PrimitiveState.rest(shape=(3,)))
    s = np.array([0.0, 0.5, 1.0])
    g = conserved_to_primitive(ghost_state(q, NoSlipWall(1.0, regularized=True), (0.0, 1.0), s))
    np.testing.assert_allclose(0.5 * g.u, [0.0, 1.0, 0.0], atol=1e-15)
    with pytest.raises(ValueError):
        ghost_state(q, NoSlipWall(1.0, regularized=True), (0.0, 1.0))


def test_outflow_copies_interior():
    q = primitive_to_conserved(STATE)
    np.testing.assert_array_equal(ghost_state(q, Outflow(), (-1.0, 0.0)), q)


def test_padded_translation_invariant_along_diagonal():
    m = build_cartesian_mesh(5, 5)
    x, y = m.centers()
    # a field constant along x + y = const is extended consistently by the ghosts
    p = PrimitiveState(1.0 + x + y, 0 * x, 0 * x, 1 + 0 * x, 1 + 0 * x, 0 * x, 1 + 0 * x)
    pad = padded(primitive_to_conserved(p), m, BoundarySpec.uniform(TranslationInvariant((1, -1))))
    h = pad[..., 0]
    xs = (np.arange(-1, 6) + 0.5) * m.dx
    expected = 1.0 + xs[:, None] + xs[None, :]
    # every edge ghost whose displaced source lies inside the grid is exact
    np.testing.assert_allclose(h[0, 2:-1], expected[0, 2:-1])
    np.testing.assert_allclose(h[-1, 1:-2], expected[-1, 1:-2])
    np.testing.assert_allclose(h[2:-1, 0], expected[2:-1, 0])
    np.testing.assert_allclose(h[1:-2, -1], expected[1:-2, -1])


def test_padded_shape_and_interior():
    m = build_cartesian_mesh(4, 3)
    q = primitive_to_conserved(random_field(4)).copy()[:, :3]
    pad = padded(q, m, BoundarySpec.uniform(SlipWall()))
    assert pad.shape == (6, 5, 7)
    np.testing.assert_array_equal(pad[1:-1, 1:-1], q)
