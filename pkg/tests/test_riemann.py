import numpy as np
import pytest
from hypothesis import given, strategies as st

from viscosw.diagnostics import invariant_audit, random_admissible_states
from viscosw.errors import CapTooSmall
from viscosw.rheology import ModelKind
from viscosw.riemann import (
    LocalPair, check_entropy_conditions, exact_normal_flux, from_local_frame, interface_update,
    select_params, solve_fan, solve_pair, to_local_frame,
)
from viscosw.state import PhysParams, PrimitiveState, primitive_to_conserved

from conftest import primitive_states

PARAMS = PhysParams(g=10.0, G=10.0, lam=1.0)
MODELS = list(ModelKind)


def _vec(p: PrimitiveState) -> PrimitiveState:
    return PrimitiveState(*(np.atleast_1d(np.asarray(getattr(p, f), dtype=float))
                            for f in ("h", "u", "v", "cxx", "cyy", "cxy", "czz")))


def stoker_pair():
    return LocalPair(_vec(PrimitiveState.rest(3.0)), _vec(PrimitiveState.rest(1.0)))


def test_to_local_frame_examples():
    q = primitive_to_conserved(PrimitiveState(2.0, 1.0, -0.5, 3.0, 1.5, 0.7, 2.0))
    p = to_local_frame(q, (1.0, 0.0))
    np.testing.assert_allclose([p.u, p.v, p.cxx, p.cyy, p.cxy], [1.0, -0.5, 3.0, 1.5, 0.7], rtol=1e-15)
    p = to_local_frame(q, (0.0, 1.0))
    np.testing.assert_allclose([p.u, p.v, p.cxx, p.cyy, p.cxy], [-0.5, -1.0, 1.5, 3.0, -0.7], rtol=1e-15)


@given(primitive_states(), st.floats(0.0, 2 * np.pi))
def test_local_frame_preserves_invariants_and_round_trips(p, angle):
    n = (np.cos(angle), np.sin(angle))
    q = primitive_to_conserved(p)
    loc = to_local_frame(q, n)
    assert loc.cxx + loc.cyy == pytest.approx(p.cxx + p.cyy, rel=1e-14)
    assert loc.det == pytest.approx(p.det, rel=1e-12, abs=1e-14 * (p.cxx * p.cyy))
    np.testing.assert_allclose(from_local_frame(loc, n), q, rtol=1e-13, atol=1e-14 * np.max(np.abs(q)))


def test_select_params_equal_rest_states():
    s = _vec(PrimitiveState.rest(1.0))
    rp = select_params(LocalPair(s, s), PARAMS, ModelKind.SVTM)
    assert rp.c_par_l[0] == pytest.approx(np.sqrt(50.0), rel=1e-15)
    assert rp.c_par_r[0] == pytest.approx(np.sqrt(50.0), rel=1e-15)


def test_select_params_stoker_svucm():
    rp = select_params(stoker_pair(), PARAMS, ModelKind.SVUCM)
    assert rp.c_par_l[0] == pytest.approx(25.099800796022265, rel=1e-14)
    assert rp.c_par_r[0] == pytest.approx(9.557789602783654, rel=1e-14)
    assert rp.b_l[0] == 0.0 and rp.b_r[0] == 0.0
    assert rp.c_perp_l[0] <= rp.c_par_l[0] and rp.c_perp_r[0] <= rp.c_par_r[0]


def test_solve_fan_stoker_svucm_star_state():
    pair = stoker_pair()
    rp = select_params(pair, PARAMS, ModelKind.SVUCM)
    fan = solve_fan(pair, rp, PARAMS, ModelKind.SVUCM)
    star_l, star_r = fan.states[1], fan.states[4]
    assert star_l.u[0] == pytest.approx(1.1541483276742213, rel=1e-13)
    assert star_l.pi_par[0] == pytest.approx(16.03110688631481, rel=1e-13)
    assert star_l.h[0] == pytest.approx(2.636326392909594, rel=1e-13)
    assert star_r.h[0] == pytest.approx(1.1373390759899127, rel=1e-13)
    np.testing.assert_allclose(fan.speeds[0, [0, 4]], [-8.366600265340756, 9.557789602783654], rtol=1e-13)


def test_any_svucm_pair_has_zero_coupling(rng):
    left, right = random_admissible_states(rng, 500), random_admissible_states(rng, 500)
    rp = select_params(LocalPair(left, right), PARAMS, ModelKind.SVUCM)
    assert np.all(rp.b_l == 0) and np.all(rp.b_r == 0)
    assert np.all(rp.c_perp_l <= rp.c_par_l) and np.all(rp.c_perp_r <= rp.c_par_r)


@pytest.mark.parametrize("model", MODELS)
def test_equal_state_fan_is_constant(model):
    s = _vec(PrimitiveState(1.3, 0.4, -0.2, 1.5, 0.8, 0.3, 1.2))
    fan = solve_pair(LocalPair(s, s), PARAMS, model)
    for st_ in fan.states:
        for f in ("h", "u", "v", "cxx", "cyy", "cxy", "czz"):
            assert getattr(st_, f)[0] == pytest.approx(getattr(s, f)[0], rel=1e-14, abs=1e-15)
    assert invariant_audit(fan, model)[0] <= 1e-14
    rp = fan.params
    expected = 0.4 + np.array([-rp.c_par_l[0], -rp.c_perp_l[0], 0.0, rp.c_perp_r[0], rp.c_par_r[0]]) / 1.3
    np.testing.assert_allclose(fan.speeds[0], expected, rtol=1e-14)


@pytest.mark.parametrize("model", MODELS)
def test_strong_invariants_constant_per_side(model, rng):
    from viscosw.rheology import strong_invariants
    fan = solve_pair(LocalPair(random_admissible_states(rng, 1000), random_admissible_states(rng, 1000)),
                     PARAMS, model)
    for side in ((0, 1, 2), (5, 4, 3)):
        ref = strong_invariants(fan.states[side[0]].primitive(), model)
        for k in side[1:]:
            got = strong_invariants(fan.states[k].primitive(), model)
            for a, b in zip(ref, got):
                np.testing.assert_allclose(b, a, rtol=1e-12)


@pytest.mark.parametrize("model", MODELS)
def test_speeds_ordered_and_depths_positive(model, rng):
    fan = solve_pair(LocalPair(random_admissible_states(rng, 5000), random_admissible_states(rng, 5000)),
                     PARAMS, model)
    assert np.all(np.diff(fan.speeds, axis=1) >= 0)
    for s in fan.states:
        assert np.all(s.h > 0)


@pytest.mark.parametrize("model", MODELS)
def test_stoker_conditions_hold(model):
    pair = stoker_pair()
    rp = select_params(pair, PARAMS, model)
    rep = check_entropy_conditions(pair, rp, None, model, PARAMS)
    assert rep.entropy_ok.all()
    for name, m in rep.margins.items():
        assert np.all(m >= -1e-12 * rep.scales[name]), name


def test_svucm_transverse_condition_margin_non_negative(rng):
    pair = LocalPair(random_admissible_states(rng, 2000), random_admissible_states(rng, 2000))
    rp = select_params(pair, PARAMS, ModelKind.SVUCM)
    rep = check_entropy_conditions(pair, rp, None, ModelKind.SVUCM, PARAMS)
    for side in ("l", "r"):
        key = f"cond3_{side}"
        assert np.all(rep.margins[key] >= -1e-12 * rep.scales[key])


@pytest.mark.parametrize("model", MODELS)
def test_interface_update_rest_state(model):
    s = _vec(PrimitiveState.rest(1.0))
    fan = solve_pair(LocalPair(s, s), PARAMS, model)
    upd = interface_update(fan)
    assert np.all(upd.delta_left == 0) and np.all(upd.delta_right == 0)
    assert upd.entropy_flux[0] == 0.0


@pytest.mark.parametrize("model", MODELS)
def test_interface_update_equal_moving_state_matches_exact_flux(model):
    p = PrimitiveState(1.7, 0.9, -0.4, 1.4, 0.9, 0.2, 1.1)
    s = _vec(p)
    fan = solve_pair(LocalPair(s, s), PARAMS, model)
    upd = interface_update(fan)
    assert np.max(np.abs(upd.delta_left)) <= 1e-13 and np.max(np.abs(upd.delta_right)) <= 1e-13
    exact = exact_normal_flux(p, PARAMS, model)
    assert upd.entropy_flux[0] == pytest.approx(exact[3], rel=1e-13)
    np.testing.assert_allclose(upd.flux[0], exact[:3], rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("model", MODELS)
def test_interface_update_conserves_mass_and_momentum(model, rng):
    left, right = random_admissible_states(rng, 2000), random_admissible_states(rng, 2000)
    fan = solve_pair(LocalPair(left, right), PARAMS, model)
    upd = interface_update(fan)
    fl = np.stack(exact_normal_flux(left, PARAMS, model)[:3], axis=-1)
    fr = np.stack(exact_normal_flux(right, PARAMS, model)[:3], axis=-1)
    # left cell loses F* - F_l, right cell gains F* - F_r: the increments sum to F_l - F_r
    total = upd.delta_left[:, :3] + upd.delta_right[:, :3]
    scale = np.abs(fl) + np.abs(fr) + 1.0
    assert np.max(np.abs(total - (fl - fr)) / scale) <= 1e-12


def test_stoker_mass_conservation():
    pair = stoker_pair()
    fan = solve_pair(pair, PARAMS, ModelKind.SVUCM)
    upd = interface_update(fan)
    # both states are at rest: the mass increments cancel exactly up to round-off
    assert abs(upd.delta_left[0, 0] + upd.delta_right[0, 0]) <= 1e-13


def test_cap_too_small():
    fan = solve_pair(stoker_pair(), PARAMS, ModelKind.SVUCM)
    with pytest.raises(CapTooSmall):
        interface_update(fan, cap=1.0)


@pytest.mark.parametrize("model", MODELS)
def test_galilean_shift(model, rng):
    left, right = random_admissible_states(rng, 500), random_admissible_states(rng, 500)
    w = 1.75
    shifted = [PrimitiveState(s.h, s.u + w, s.v, s.cxx, s.cyy, s.cxy, s.czz) for s in (left, right)]
    a = solve_pair(LocalPair(left, right), PARAMS, model)
    b = solve_pair(LocalPair(*shifted), PARAMS, model)
    np.testing.assert_allclose(b.speeds, a.speeds + w, rtol=1e-12, atol=1e-12)
    for sa, sb in zip(a.states, b.states):
        np.testing.assert_allclose(sb.u, sa.u + w, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(sb.h, sa.h, rtol=1e-12)
        np.testing.assert_allclose(sb.pi_par, sa.pi_par, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(sb.pi_perp, sa.pi_perp, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(sb.psi, sa.psi, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("model", MODELS)
def test_rotation_invariance_of_increments(model, rng):
    n_pairs = 300
    left, right = random_admissible_states(rng, n_pairs), random_admissible_states(rng, n_pairs)
    ql, qr = primitive_to_conserved(left), primitive_to_conserved(right)
    base = interface_update(solve_pair(LocalPair.from_conserved(ql, qr, (1.0, 0.0)), PARAMS, model),
                            normal=(1.0, 0.0), q_left=ql, q_right=qr)
    for angle in (0.3, 1.1, 2.5):
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        n = rot @ np.array([1.0, 0.0])

        def rotate(q):
            p = to_local_frame(q, (c, -s))  # components of the rotated state R q
            return from_local_frame(p, (1.0, 0.0))

        rl, rr = rotate(ql), rotate(qr)
        upd = interface_update(solve_pair(LocalPair.from_conserved(rl, rr, n), PARAMS, model),
                               normal=n, q_left=rl, q_right=rr)
        # momentum increments rotate with the frame; the scalars do not change
        np.testing.assert_allclose(upd.delta_left[:, 0], base.delta_left[:, 0], rtol=1e-11, atol=1e-11)
        mom = upd.delta_left[:, 1:3] @ rot
        np.testing.assert_allclose(mom, base.delta_left[:, 1:3], rtol=1e-11, atol=1e-10)
        np.testing.assert_allclose(upd.entropy_flux, base.entropy_flux, rtol=1e-11, atol=1e-10)
