import numpy as np
import pytest
from hypothesis import given, strategies as st

from viscosw.rheology import (
    ModelKind, dissipation, js_eigenvalues, js_real_condition, model_coefficients,
    relax_source_step, strong_invariants, stress,
)
from viscosw.state import PhysParams, PrimitiveState, free_energy

from conftest import primitive_states

SVTM, SVUCM = ModelKind.SVTM, ModelKind.SVUCM


def test_model_parse():
    assert ModelKind.parse("SVTM") is SVTM
    assert ModelKind.parse(SVUCM) is SVUCM
    with pytest.raises(ValueError):
        ModelKind.parse("oldroyd")


@pytest.mark.parametrize("model", list(ModelKind))
def test_stress_vanishes_at_identity(model):
    (sxx, syy, sxy), szz = stress(PrimitiveState.rest(), 10.0, model)
    assert (sxx, syy, sxy, szz) == (0.0, 0.0, 0.0, 0.0)


def test_stress_sign_convention():
    p = PrimitiveState(1, 0, 0, 2, 1, 0, 1)
    assert stress(p, 10.0, SVUCM)[0][0] == 10.0
    assert stress(p, 10.0, SVTM)[0][0] == -10.0


def test_model_coefficients_examples():
    params = PhysParams(g=10.0, G=10.0)
    c = model_coefficients(PrimitiveState.rest(), params, SVTM)
    assert (c.p_par, c.p_perp, c.c_par_sq, c.c_perp_sq, c.a_sq, c.b) == (5.0, 0.0, 50.0, 10.0, 1.0, 0.0)
    c = model_coefficients(PrimitiveState.rest(3.0), params, SVUCM)
    assert c.p_par == 45.0 and c.c_par_sq == 630.0 and c.b == 0.0
    c = model_coefficients(PrimitiveState(1, 0, 0, 1, 1, 0.5, 1), params, SVTM)
    assert c.b == 10.0 and c.p_perp == 5.0


def test_strong_invariants_examples():
    p = PrimitiveState.rest(2.0)
    assert strong_invariants(p, SVTM) == (0.25, 4.0, 1.0)
    assert strong_invariants(p, SVUCM) == (4.0, 0.25, 1.0)
    assert strong_invariants(PrimitiveState(1, 0, 0, 4, 2, 2, 1), SVTM)[2] == 1.0


@given(primitive_states())
def test_strong_invariants_model_swap(p):
    swapped = PrimitiveState(p.h, p.u, p.v, p.czz, p.cyy, p.cxy * np.sqrt(p.czz / p.cxx), p.cxx)
    a = strong_invariants(p, SVTM)[:2]
    b = strong_invariants(swapped, SVUCM)[:2]
    np.testing.assert_allclose(a, b[::-1], rtol=1e-14)


def test_relax_source_step_examples():
    params = PhysParams(lam=1.0, k=0.0)
    out = relax_source_step(PrimitiveState(1, 0, 0, 3, 1, 0, 2), 1.0, params)
    assert (out.cxx, out.cyy, out.cxy, out.czz) == (2.0, 1.0, 0.0, 1.5)
    out = relax_source_step(PrimitiveState(1, 2, 0, 1, 1, 0, 1), 1.0, PhysParams(k=1.0))
    assert out.u == 1.0
    with pytest.raises(ValueError):
        relax_source_step(PrimitiveState.rest(), -1.0, params)


@given(primitive_states(), st.floats(0.0, 100.0), st.floats(0.01, 10.0))
def test_relax_source_step_admissible_and_dissipative(p, tau, lam):
    params = PhysParams(G=10.0, lam=lam)
    out = relax_source_step(p, tau, params)
    assert out.h == p.h and out.cxx > 0 and out.czz > 0 and out.det > 0
    assert free_energy(out, params) <= free_energy(p, params) + 1e-12 * abs(free_energy(p, params))


def test_dissipation_examples():
    params = PhysParams(G=10.0, lam=1.0)
    assert dissipation(PrimitiveState.rest(), params) == 0.0
    assert dissipation(PrimitiveState(1, 0, 0, 2, 0.5, 0, 1), params) == pytest.approx(5.0, rel=1e-15)


@given(primitive_states())
def test_dissipation_non_negative(p):
    assert dissipation(p, PhysParams(G=10.0)) >= -1e-12


def test_js_eigenvalues_at_zero_slip():
    res = js_eigenvalues(PrimitiveState.rest(), PhysParams(g=10.0, G=10.0), 0.0)
    assert res.hyperbolic
    np.testing.assert_allclose(res.values, [-np.sqrt(50), -np.sqrt(10), np.sqrt(10), np.sqrt(50)], rtol=1e-15)


@given(primitive_states())
def test_js_zero_slip_always_real(p):
    params = PhysParams(g=10.0, G=10.0)
    res = js_eigenvalues(p, params, 0.0)
    assert res.hyperbolic
    outer = np.sqrt(params.g * p.h + params.G * (3 * p.czz + p.cxx))
    inner = np.sqrt(params.G * p.cxx)
    np.testing.assert_allclose(res.values, [p.u - outer, p.u - inner, p.u + inner, p.u + outer], rtol=1e-12)


def test_js_hyperbolicity_flag_flips_with_condition():
    # with c_xx = c_yy = c_zz = 1 the determinant bound fails once c_xy is large enough;
    # c_xy is not tied to admissibility here because only the real-root test is probed
    params = PhysParams(g=10.0, G=10.0)
    flags = []
    for cxy in np.linspace(0.0, 5.0, 501):
        p = PrimitiveState(0.01, 0.0, 0.0, 1.0, 1.0, cxy, 1.0)
        res = js_eigenvalues(p, params, 1.0)
        assert res.hyperbolic == js_real_condition(p, params, 1.0)
        flags.append(res.hyperbolic)
    assert flags[0] and not flags[-1]
    first_false = flags.index(False)
    assert not any(flags[first_false:])
