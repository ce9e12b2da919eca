import csv

import numpy as np
import pytest

from viscosw.bench import stoker_ic
from viscosw.diagnostics import (
    DIAG_COLUMNS, StepDiagnostics, cross_section, entropy_budget, fuzz_audit, invariant_audit, totals,
    write_diagnostics_csv,
)
from viscosw.engine import initial_state
from viscosw.mesh import build_cartesian_mesh
from viscosw.rheology import ModelKind
from viscosw.riemann import LocalPair, solve_pair
from viscosw.state import PhysParams, PrimitiveState, primitive_to_conserved

PARAMS = PhysParams(g=10.0, G=10.0)


def _vec(p):
    return PrimitiveState(*(np.atleast_1d(np.asarray(x, dtype=float)) for x in
                            (p.h, p.u, p.v, p.cxx, p.cyy, p.cxy, p.czz)))


def test_totals_uniform_rest():
    m = build_cartesian_mesh(7, 5)
    q = primitive_to_conserved(PrimitiveState.rest(1.0, shape=(7, 5)))
    mass, mom, ent = totals(q, m, PARAMS)
    assert mass == pytest.approx(1.0, rel=1e-14)
    assert mom == (0.0, 0.0)
    assert ent == pytest.approx(5.0, rel=1e-14)


def test_totals_stoker_staircase():
    m = build_cartesian_mesh(33, 33)
    q = initial_state(m, stoker_ic).q
    x, y = m.centers()
    expected = np.where(x + y < 1.0, 3.0, 1.0).sum() * m.cell_area
    assert totals(q, m, PARAMS)[0] == pytest.approx(expected, rel=1e-14)
    assert abs(expected - 2.0) < 0.1


def test_entropy_budget_equilibrium_is_zero():
    q = primitive_to_conserved(PrimitiveState.rest(1.0, shape=(3,)))
    res = entropy_budget(q, q.copy(), np.zeros(3), 0.1, PARAMS)
    np.testing.assert_array_equal(res, 0.0)


def test_entropy_budget_source_only_is_dissipative():
    from viscosw.rheology import relax_source_step
    from viscosw.state import conserved_to_primitive
    p = PrimitiveState(np.ones(4), np.zeros(4), np.zeros(4), np.array([2.0, 0.5, 1.0, 3.0]),
                       np.array([1.0, 2.0, 0.7, 1.0]), np.array([0.1, -0.2, 0.0, 0.5]), np.array([1.5, 0.8, 2.0, 1.0]))
    params = PhysParams(g=10.0, G=10.0, lam=0.5)
    q = primitive_to_conserved(p)
    tau = 0.1
    after = primitive_to_conserved(relax_source_step(conserved_to_primitive(q), tau, params))
    assert np.all(entropy_budget(q, after, np.zeros(4), tau, params) < 0)


@pytest.mark.parametrize("model", list(ModelKind))
def test_invariant_audit_equal_state(model):
    s = _vec(PrimitiveState(1.2, 0.3, -0.1, 1.3, 0.9, 0.2, 1.1))
    assert invariant_audit(solve_pair(LocalPair(s, s), PARAMS, model), model)[0] <= 1e-15


@pytest.mark.parametrize("model", list(ModelKind))
def test_invariant_audit_stoker(model):
    fan = solve_pair(LocalPair(_vec(PrimitiveState.rest(3.0)), _vec(PrimitiveState.rest(1.0))), PARAMS, model)
    assert invariant_audit(fan, model)[0] <= 1e-12
    detail = invariant_audit(fan, model, detailed=True)
    assert detail and all(np.all(v <= 1e-12) for v in detail.values())


@pytest.mark.parametrize("model", list(ModelKind))
def test_fuzz_audit_small(model):
    rep = fuzz_audit(2000, 7, model, PARAMS)
    assert rep.pairs == 2000 and rep.passed()


def test_cross_section_uniform_and_step():
    m = build_cartesian_mesh(9, 9)
    q = primitive_to_conserved(PrimitiveState.rest(2.0, shape=(9, 9)))
    prof = cross_section(q, m, "diagonal")
    np.testing.assert_array_equal(prof.fields["h"], 2.0)
    q = initial_state(m, stoker_ic).q
    prof = cross_section(q, m, "diagonal")
    np.testing.assert_array_equal(prof.fields["h"], np.where(prof.s < 1 / np.sqrt(2), 3.0, 1.0))
    assert set(prof.fields) >= {"un", "ut", "cnn", "ctt"}


def test_cross_section_axis_lines():
    m = build_cartesian_mesh(4, 6)
    q = initial_state(m, stoker_ic).q
    prof = cross_section(q, m, ("x", 0.5))
    assert prof.s.shape == (6,) and np.all(prof.x == 0.625)
    prof = cross_section(q, m, ("y", 0.1))
    np.testing.assert_allclose(prof.s, m.xc)
    with pytest.raises(ValueError):
        cross_section(q, m, ("z", 0.5))


def test_diagnostics_csv(tmp_path):
    rows = [StepDiagnostics(t=0.1, tau=0.1, mass=1.0, momentum=(0.5, -0.5), entropy=2.0, failed_faces=3)]
    path = tmp_path / "d.csv"
    write_diagnostics_csv(rows, path)
    data = list(csv.reader(path.open()))
    assert data[0] == DIAG_COLUMNS
    assert [float(x) for x in data[1]] == [0.1, 0.1, 1.0, 0.5, -0.5, 2.0, 0.0, 3.0]
