"""Entropy-consistent 5-wave relaxation solver for interface Riemann problems.

The solver works in the local frame of a face (normal velocity ``u``,
tangential velocity ``v``). For each side ``o`` of the face the relaxation
parameters ``c_par_o >= c_perp_o > 0``, ``a_o^2`` and ``b_o`` are constant and
the fan has the structure

    q_l | xi_-2 | q_l* | xi_-1 | q_l# | xi_0 | q_r# | xi_+1 | q_r* | xi_+2 | q_r

All routines are vectorized: a :class:`LocalPair` may hold arrays of faces and
every output carries one entry per face (scalar inputs yield length-1 arrays).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapTooSmall, DegenerateParams
from .rheology import (
    ModelKind,
    dp_dh,
    pressures,
    state_from_invariants,
    strong_invariants,
    transverse_strain,
)
from .state import NQ, PhysParams, PrimitiveState, energy_split, primitive_to_conserved, conserved_to_primitive

MAX_R_ITER = 60
MAX_ESCALATIONS = 40
# smallest admissible ratio c_perp^2 / c_par^2 (only binds when G is ~0)
R_MIN = 1e-10
# closest approach of c_perp^2 / c_par^2 to 1; smaller gaps amplify round-off
R_GAP_MIN = 1e-6
# relative tolerance on the entropy condition margins
COND_TOL = 1e-12
# c_perp^2 is taken this factor above its lower bound so margins stay strictly positive
PERP_SAFETY = 1.0 + 1e-8


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------


def _normal(n):
    n = np.asarray(n, dtype=float)
    return n[..., 0], n[..., 1]


def rotate_primitive(p: PrimitiveState, n) -> PrimitiveState:
    """Express a primitive state in the basis ``(n, n_perp)``, ``n_perp = (-n_y, n_x)``."""
    nx, ny = _normal(n)
    u = p.u * nx + p.v * ny
    v = -p.u * ny + p.v * nx
    cxx = nx * nx * p.cxx + 2.0 * nx * ny * p.cxy + ny * ny * p.cyy
    cxy = -nx * ny * p.cxx + (nx * nx - ny * ny) * p.cxy + nx * ny * p.cyy
    cyy = ny * ny * p.cxx - 2.0 * nx * ny * p.cxy + nx * nx * p.cyy
    return PrimitiveState(p.h, u, v, cxx, cyy, cxy, p.czz)


def unrotate_primitive(p: PrimitiveState, n) -> PrimitiveState:
    """Inverse of :func:`rotate_primitive`."""
    nx, ny = _normal(n)
    u = p.u * nx - p.v * ny
    v = p.u * ny + p.v * nx
    cxx = nx * nx * p.cxx - 2.0 * nx * ny * p.cxy + ny * ny * p.cyy
    cxy = nx * ny * p.cxx + (nx * nx - ny * ny) * p.cxy - nx * ny * p.cyy
    cyy = ny * ny * p.cxx + 2.0 * nx * ny * p.cxy + nx * nx * p.cyy
    return PrimitiveState(p.h, u, v, cxx, cyy, cxy, p.czz)


def to_local_frame(q, n) -> PrimitiveState:
    """Primitive state of conserved ``q`` in the frame of unit normal ``n``."""
    return rotate_primitive(conserved_to_primitive(q), n)


def from_local_frame(p_local: PrimitiveState, n) -> np.ndarray:
    """Conserved vector in the global frame of a local-frame primitive state."""
    return primitive_to_conserved(unrotate_primitive(p_local, n))


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


def _faces(p: PrimitiveState) -> PrimitiveState:
    arrs = np.broadcast_arrays(*(np.atleast_1d(np.asarray(x, dtype=float)) for x in
                                 (p.h, p.u, p.v, p.cxx, p.cyy, p.cxy, p.czz)))
    return PrimitiveState(*(a.ravel() for a in arrs))


@dataclass
class LocalPair:
    """Left and right states of a face, both in the face frame.

    Attributes:
        left: State on the side the normal points away from.
        right: State on the side the normal points into.
        normal: Unit normal of the face in the global frame.
    """

    left: PrimitiveState
    right: PrimitiveState
    normal: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))

    @classmethod
    def from_conserved(cls, q_left, q_right, n=(1.0, 0.0)) -> "LocalPair":
        return cls(to_local_frame(q_left, n), to_local_frame(q_right, n), np.asarray(n, dtype=float))


@dataclass
class RelaxationParams:
    """Per-face, per-side relaxation parameters.

    Attributes:
        c_par_l, c_par_r: Lagrangian speeds of the outer (normal) waves.
        c_perp_l, c_perp_r: Lagrangian speeds of the shear waves.
        a_sq_l, a_sq_r: Squared coupling between ``v`` and ``psi``.
        b_l, b_r: Coupling between ``u`` and ``pi_perp``.
        entropy_ok: Whether all entropy conditions hold for the face.
        conditions: Per-condition booleans (``cond1_l`` ... ``cond3_r``,
            ``cond1bis_l``, ``cond1bis_r``, ``positive``).
        escalations: Number of ``c_par`` doublings used.
        r_iterations: Number of ``c_perp`` updates used.
        decoupled: Faces where the coupled search stalled and ``b = 0`` was used.
    """

    c_par_l: np.ndarray
    c_par_r: np.ndarray
    c_perp_l: np.ndarray
    c_perp_r: np.ndarray
    a_sq_l: np.ndarray
    a_sq_r: np.ndarray
    b_l: np.ndarray
    b_r: np.ndarray
    entropy_ok: np.ndarray | None = None
    conditions: dict = field(default_factory=dict)
    escalations: np.ndarray | None = None
    r_iterations: np.ndarray | None = None
    decoupled: np.ndarray | None = None

    @property
    def a_l(self):
        return np.sqrt(self.a_sq_l)

    @property
    def a_r(self):
        return np.sqrt(self.a_sq_r)


@dataclass
class FanState:
    """One constant state of the fan, extended with the relaxation variables."""

    h: np.ndarray
    u: np.ndarray
    v: np.ndarray
    cxx: np.ndarray
    cyy: np.ndarray
    cxy: np.ndarray
    czz: np.ndarray
    pi_par: np.ndarray
    pi_perp: np.ndarray
    psi: np.ndarray
    e_par: np.ndarray
    e_perp: np.ndarray

    def primitive(self) -> PrimitiveState:
        return PrimitiveState(self.h, self.u, self.v, self.cxx, self.cyy, self.cxy, self.czz)

    def flux(self):
        """Relaxed flux ``(mass, normal momentum, tangential momentum, entropy)``."""
        hu = self.h * self.u
        energy = 0.5 * (self.u**2 + self.v**2) + self.e_par + self.e_perp
        return (
            hu,
            hu * self.u + self.pi_par,
            hu * self.v + self.pi_perp,
            hu * energy + self.pi_par * self.u + self.pi_perp * self.v,
        )


@dataclass
class RiemannFan:
    """Six states and five ordered speeds of an interface solution."""

    states: list[FanState]
    speeds: np.ndarray
    params: RelaxationParams
    model: ModelKind
    core: dict = field(repr=False, default_factory=dict)


@dataclass
class ConditionReport:
    """Margins of the entropy conditions.

    Attributes:
        margins: Margin per condition name; non-negative means satisfied.
        scales: Magnitudes the margins are compared against.
        ok: Per-condition pass flags (margin >= -tol * scale).
        entropy_ok: Conjunction of all flags.
    """

    margins: dict
    scales: dict
    ok: dict
    entropy_ok: np.ndarray


@dataclass
class InterfaceUpdate:
    """Cell increments of one face.

    Attributes:
        delta_left: Rate increment of the left cell, global conserved frame.
        delta_right: Rate increment of the right cell.
        smax: Largest absolute wave speed.
        entropy_flux: Numerical entropy flux through the face.
        flux: Numerical mass and momentum flux (global frame), from left to right.
    """

    delta_left: np.ndarray
    delta_right: np.ndarray
    smax: np.ndarray
    entropy_flux: np.ndarray
    flux: np.ndarray


# ---------------------------------------------------------------------------
# Per-side quantities and the closed-form fan
# ---------------------------------------------------------------------------


class _Side:
    """Quantities of one side that stay frozen during the parameter search."""

    __slots__ = ("h", "u", "v", "cxx", "cyy", "cxy", "czz", "tau", "i1", "i2", "i3",
                 "psi", "p_par", "p_perp", "e_par", "e_perp", "dp")

    def __init__(self, **kw):
        for k, v in kw.items():
            setattr(self, k, v)

    @classmethod
    def build(cls, p: PrimitiveState, params: PhysParams, model: ModelKind) -> "_Side":
        i1, i2, i3 = strong_invariants(p, model)
        p_par, p_perp = pressures(p, params, model)
        e_par, e_perp = energy_split(p, params)
        return cls(h=p.h, u=p.u, v=p.v, cxx=p.cxx, cyy=p.cyy, cxy=p.cxy, czz=p.czz,
                   tau=1.0 / p.h, i1=i1, i2=i2, i3=i3, psi=transverse_strain(p, model),
                   p_par=p_par, p_perp=p_perp, e_par=e_par, e_perp=e_perp,
                   dp=dp_dh(p, params, model))

    def take(self, idx, keys=None) -> "_Side":
        return _Side(**{k: getattr(self, k)[idx] for k in (keys or self.__slots__)})


_PERP_KEYS = ("v", "p_perp", "psi", "i1")


def _initial_c_par(L: _Side, R: _Side):
    """Suliciu-type initialization guaranteeing positive intermediate depths."""
    sl = L.h * np.sqrt(L.dp)
    sr = R.h * np.sqrt(R.dp)
    du = np.maximum(L.u - R.u, 0.0)
    cl = L.h * (np.sqrt(L.dp) + 2.0 * (du + np.maximum(R.p_par - L.p_par, 0.0) / (sl + sr)))
    cr = R.h * (np.sqrt(R.dp) + 2.0 * (du + np.maximum(L.p_par - R.p_par, 0.0) / (sl + sr)))
    return cl, cr


def _parallel_star(L: _Side, R: _Side, cl, cr):
    """Normal velocity, normal pressure and specific volumes of the star states."""
    s = cl + cr
    # weighted means plus jump corrections: exact when the two sides agree
    us = (cl * L.u + cr * R.u) / s + (L.p_par - R.p_par) / s
    ps = (cr * L.p_par + cl * R.p_par) / s + cl * cr * (L.u - R.u) / s
    jump = cr * (R.u - L.u) + L.p_par - R.p_par
    tsl = L.tau + jump / (cl * s)
    tsr = R.tau + (cl * (R.u - L.u) + R.p_par - L.p_par) / (cr * s)
    # du_l = u* - u_l, du_r = u* - u_r without cancellation
    du_l = jump / s
    du_r = (cl * (L.u - R.u) + L.p_par - R.p_par) / s
    return us, ps, tsl, tsr, du_l, du_r


def _de_par(S: _Side, hs, ts, model: ModelKind, params: PhysParams):
    """``e_par`` at depth ``hs`` minus ``e_par`` of the side, with frozen invariants.

    Returns the difference and the sum of absolute values of its terms.
    """
    g, G = params.g, params.G
    dh = hs - S.h
    sq = dh * (hs + S.h)                      # hs^2 - h^2
    isq = (ts - S.tau) * (ts + S.tau)         # 1/hs^2 - 1/h^2
    if model is ModelKind.SVTM:
        dcxx, dczz = S.i1 * sq, S.i2 * isq
    else:
        dcxx, dczz = S.i1 * isq, S.i2 * sq
    # the log term vanishes: c_xx c_zz = I1 I2 on every state of a side
    terms = (0.5 * g * dh, 0.5 * G * dcxx, 0.5 * G * dczz)
    return sum(terms), sum(np.abs(t) for t in terms)


def _cond1bis_margin(S: _Side, cp, hs, model: ModelKind, params: PhysParams):
    """``c_par^2 - h^2 dP/dh`` at the larger of the two depths of a side."""
    g, G = params.g, params.G
    hm = np.maximum(S.h, hs)
    if model is ModelKind.SVTM:
        need = g * hm**3 + G * (3.0 * S.i1 * hm**4 + S.i2)
    else:
        need = g * hm**3 + G * (3.0 * S.i2 * hm**4 + S.i1)
    return cp * cp - need, cp * cp + need


def _perp_fan(L, R, du_l, du_r, cpl, cpr, cql, cqr, al2, ar2, bl, br, G) -> dict:
    """Transverse intermediate states, energy gains and the cond2/cond3 margins.

    Only ``v``, ``p_perp``, ``psi`` and ``i1`` of each side are read, so the
    parameter search can call this on reduced sides.
    """
    dl = cql * cql - cpl * cpl
    dr = cqr * cqr - cpr * cpr
    kl = np.where(bl == 0, 0.0, bl / np.where(dl == 0, -1.0, dl))
    kr = np.where(br == 0, 0.0, br / np.where(dr == 0, -1.0, dr))
    vsl = L.v - kl * du_l
    vsr = R.v - kr * du_r
    qsl = L.p_perp - cpl * (vsl - L.v)
    qsr = R.p_perp + cpr * (vsr - R.v)
    psisl = L.psi + al2 * (qsl - L.p_perp) / (cpl * cpl)
    psisr = R.psi + ar2 * (qsr - R.p_perp) / (cpr * cpr)

    sq = cql + cqr
    vsh = (cql * vsl + cqr * vsr) / sq + (qsl - qsr) / sq
    qsh = (cqr * qsl + cql * qsr) / sq + cql * cqr * (vsl - vsr) / sq
    # pi_sharp - pi_star per side without cancellation
    dqsh_l = (cql * (cqr * (vsl - vsr) + qsr - qsl)) / sq
    dqsh_r = (cqr * (cql * (vsl - vsr) + qsl - qsr)) / sq
    psishl = psisl + al2 * dqsh_l / (cql * cql)
    psishr = psisr + ar2 * dqsh_r / (cqr * cqr)

    out = dict(vsl=vsl, vsr=vsr, qsl=qsl, qsr=qsr, psisl=psisl, psisr=psisr,
               vsh=vsh, qsh=qsh, psishl=psishl, psishr=psishr)
    margins, scales = {}, {}
    for side, S, cp, cq, qs, dqsh, psis, psish in (
        ("l", L, cpl, cql, qsl, dqsh_l, psisl, psishl),
        ("r", R, cpr, cqr, qsr, dqsh_r, psisr, psishr),
    ):
        two_cp2, two_cq2 = 2.0 * cp * cp, 2.0 * cq * cq
        gps = (qs - S.p_perp) * (qs + S.p_perp) / two_cp2
        gsh = dqsh * (qsh + qs) / two_cq2
        de2 = G * (psis - S.psi) * (psis + S.psi) / (2.0 * S.i1)
        de3 = G * (psish - S.psi) * (psish + S.psi) / (2.0 * S.i1)
        # scales are the magnitudes of the energies compared, so the tolerance is round-off
        e_ps_mag = (qs**2 + S.p_perp**2) / two_cp2
        e_sh_mag = (qsh**2 + qs**2) / two_cq2
        out[f"gain_ps_{side}"] = gps
        out[f"gain_sh_{side}"] = gsh
        margins[f"cond2_{side}"] = gps - de2
        scales[f"cond2_{side}"] = e_ps_mag + G * (psis**2 + S.psi**2) / (2.0 * S.i1) + 1e-300
        margins[f"cond3_{side}"] = gps + gsh - de3
        scales[f"cond3_{side}"] = e_ps_mag + e_sh_mag + G * (psish**2 + S.psi**2) / (2.0 * S.i1) + 1e-300
    out["margins"] = margins
    out["scales"] = scales
    return out


def _fan_core(L: _Side, R: _Side, cpl, cpr, cql, cqr, al2, ar2, bl, br,
              model: ModelKind, params: PhysParams, check_degenerate=True) -> dict:
    """Closed-form intermediate states, speeds, relaxed energies and condition margins."""
    G = params.G
    us, ps, tsl, tsr, du_l, du_r = _parallel_star(L, R, cpl, cpr)
    with np.errstate(divide="ignore", invalid="ignore"):
        hsl = 1.0 / tsl
        hsr = 1.0 / tsr

    dl = cql * cql - cpl * cpl
    dr = cqr * cqr - cpr * cpr
    if check_degenerate and (np.any((bl != 0) & (dl == 0)) or np.any((br != 0) & (dr == 0))):
        raise DegenerateParams("c_perp^2 == c_par^2 with b != 0")
    pf = _perp_fan(L, R, du_l, du_r, cpl, cpr, cql, cqr, al2, ar2, bl, br, G)
    vsl, vsr, qsl, qsr = pf["vsl"], pf["vsr"], pf["qsl"], pf["qsr"]
    psisl, psisr, psishl, psishr = pf["psisl"], pf["psisr"], pf["psishl"], pf["psishr"]
    vsh, qsh = pf["vsh"], pf["qsh"]
    gain_ps_l, gain_ps_r, gain_sh_l, gain_sh_r = pf["gain_ps_l"], pf["gain_ps_r"], pf["gain_sh_l"], pf["gain_sh_r"]

    two_cpl2, two_cpr2 = 2.0 * cpl * cpl, 2.0 * cpr * cpr
    gain_par_l = (ps - L.p_par) * (ps + L.p_par) / two_cpl2
    gain_par_r = (ps - R.p_par) * (ps + R.p_par) / two_cpr2

    speeds = np.stack([
        L.u - cpl * L.tau,
        us - cql * tsl,
        us,
        us + cqr * tsr,
        R.u + cpr * R.tau,
    ], axis=-1)

    core = dict(us=us, ps=ps, tsl=tsl, tsr=tsr, hsl=hsl, hsr=hsr, du_l=du_l, du_r=du_r,
                vsl=vsl, vsr=vsr, qsl=qsl, qsr=qsr, psisl=psisl, psisr=psisr,
                vsh=vsh, qsh=qsh, psishl=psishl, psishr=psishr,
                ehl=L.e_par + gain_par_l, ehr=R.e_par + gain_par_r,
                ehpsl=L.e_perp + gain_ps_l, ehpsr=R.e_perp + gain_ps_r,
                ehpshl=L.e_perp + gain_ps_l + gain_sh_l, ehpshr=R.e_perp + gain_ps_r + gain_sh_r,
                speeds=speeds, cpl=cpl, cpr=cpr, cql=cql, cqr=cqr, al2=al2, ar2=ar2, bl=bl, br=br)

    margins, scales = dict(pf["margins"]), dict(pf["scales"])
    positive_l = tsl > 0
    positive_r = tsr > 0
    for side, S, hs, ts, cp, gpar, pos in (
        ("l", L, hsl, tsl, cpl, gain_par_l, positive_l),
        ("r", R, hsr, tsr, cpr, gain_par_r, positive_r),
    ):
        with np.errstate(divide="ignore", invalid="ignore"):
            hs_safe = np.where(pos, hs, S.h)
            ts_safe = np.where(pos, ts, S.tau)
            de1, s1 = _de_par(S, hs_safe, ts_safe, model, params)
        m1 = np.where(pos, gpar - de1, -np.inf)
        mb, sb = _cond1bis_margin(S, cp, hs_safe, model, params)
        e_par_mag = (ps * ps + S.p_par**2) / (2.0 * cp * cp)
        margins[f"cond1_{side}"] = m1
        scales[f"cond1_{side}"] = e_par_mag + s1 + np.abs(S.e_par)
        margins[f"cond1bis_{side}"] = np.where(pos, mb, -np.inf)
        scales[f"cond1bis_{side}"] = sb
    core["margins"] = margins
    core["scales"] = scales
    return core


def _condition_flags(core: dict) -> tuple[dict, np.ndarray]:
    ok = {}
    for name, m in core["margins"].items():
        ok[name] = m >= -COND_TOL * core["scales"][name]
    ok["positive"] = (core["tsl"] > 0) & (core["tsr"] > 0)
    all_ok = np.logical_and.reduce(list(ok.values()))
    return ok, all_ok


# ---------------------------------------------------------------------------
# Parameter selection
# ---------------------------------------------------------------------------


def _perp_svucm(L: _Side, R: _Side, cpl, cpr, params: PhysParams):
    G = params.G
    cql = np.sqrt(np.maximum(PERP_SAFETY * G * L.i1, R_MIN * cpl * cpl))
    cqr = np.sqrt(np.maximum(PERP_SAFETY * G * R.i1, R_MIN * cpr * cpr))
    zero = np.zeros_like(cpl)
    return cql, cqr, L.i1.copy(), R.i1.copy(), zero, zero.copy()


def _perp_decoupled(L: _Side, R: _Side, cpl, cpr, params: PhysParams):
    """SVTM parameters with ``b = 0`` and ``a^2 = c_xx``.

    With no coupling between ``u`` and ``pi_perp`` the star states keep the
    transverse variables of their side, and the sharp-state condition reduces to
    ``c_perp^2 >= G h^2 c_xx``; all entropy conditions hold by construction.
    """
    G = params.G
    cql = np.sqrt(np.maximum(PERP_SAFETY * G * L.h**2 * L.cxx, R_MIN * cpl * cpl))
    cqr = np.sqrt(np.maximum(PERP_SAFETY * G * R.h**2 * R.cxx, R_MIN * cpr * cpr))
    zero = np.zeros_like(cpl)
    return cql, cqr, L.cxx.copy(), R.cxx.copy(), zero, zero.copy()


def _search_perp_svtm(L: _Side, R: _Side, cpl, cpr, params: PhysParams, model: ModelKind):
    """Iterate ``r = c_perp^2 / c_par^2`` toward 1 until cond2 and cond3 hold.

    The gap ``1 - r`` is halved on failing sides but never below ``R_GAP_MIN``,
    which keeps the intermediate states well conditioned.

    Returns:
        ``(cql, cqr, al2, ar2, bl, br, success, iters)``.
    """
    G = params.G
    n = cpl.shape[0]
    us, ps, tsl, tsr, du_l, du_r = _parallel_star(L, R, cpl, cpr)
    bl = 2.0 * G * L.h**2 * L.cxy
    br = 2.0 * G * R.h**2 * R.cxy
    r_l = np.clip(G * L.h**2 * L.cxx / (cpl * cpl), R_MIN, 1.0 - R_GAP_MIN)
    r_r = np.clip(G * R.h**2 * R.cxx / (cpr * cpr), R_MIN, 1.0 - R_GAP_MIN)
    cxx_sl = L.i1 / (tsl * tsl)
    cxx_sr = R.i1 / (tsr * tsr)
    # a^2 = c_xx is entropy-safe on a side where b (u* - u) vanishes
    quiet_l = np.abs(bl * du_l) <= 1e-14 * np.abs(bl) * (np.abs(L.u) + cpl * L.tau)
    quiet_r = np.abs(br * du_r) <= 1e-14 * np.abs(br) * (np.abs(R.u) + cpr * R.tau)
    al2 = np.where(quiet_l, L.cxx, np.minimum(L.cxx, r_l * 2.0 * cxx_sl / (1.0 + r_l)))
    ar2 = np.where(quiet_r, R.cxx, np.minimum(R.cxx, r_r * 2.0 * cxx_sr / (1.0 + r_r)))

    cql = np.sqrt(r_l) * cpl
    cqr = np.sqrt(r_r) * cpr
    success = np.zeros(n, dtype=bool)
    iters = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    for _ in range(MAX_R_ITER):
        if active.size == 0:
            break
        La, Ra = L.take(active, _PERP_KEYS), R.take(active, _PERP_KEYS)
        pf = _perp_fan(La, Ra, du_l[active], du_r[active], cpl[active], cpr[active],
                       cql[active], cqr[active], al2[active], ar2[active], bl[active], br[active], G)
        m, sc = pf["margins"], pf["scales"]
        good_l = (m["cond2_l"] >= -COND_TOL * sc["cond2_l"]) & (m["cond3_l"] >= -COND_TOL * sc["cond3_l"])
        good_r = (m["cond2_r"] >= -COND_TOL * sc["cond2_r"]) & (m["cond3_r"] >= -COND_TOL * sc["cond3_r"])
        done = good_l & good_r
        success[active[done]] = True
        stuck = np.zeros(active.size, dtype=bool)
        for good, r, cq, cp in ((good_l, r_l, cql, cpl), (good_r, r_r, cqr, cpr)):
            idx = active[~good]
            gap = 0.5 * (1.0 - r[idx])
            can = gap >= R_GAP_MIN
            bump = idx[can]
            r[bump] = 1.0 - gap[can]
            cq[bump] = np.sqrt(r[bump]) * cp[bump]
            stuck[~good] |= ~can
        iters[active[~done]] += 1
        active = active[~done & ~stuck]
    return cql, cqr, al2, ar2, bl, br, success, iters


def _select(L: _Side, R: _Side, params: PhysParams, model: ModelKind):
    """Vectorized parameter search; returns params and the final fan core."""
    n = L.h.shape[0]
    cpl, cpr = _initial_c_par(L, R)
    cql = np.zeros(n); cqr = np.zeros(n)
    al2 = np.ones(n); ar2 = np.ones(n)
    bl = np.zeros(n); br = np.zeros(n)
    escal = np.zeros(n, dtype=np.int64)
    riter = np.zeros(n, dtype=np.int64)
    decoupled = np.zeros(n, dtype=bool)
    pending = np.arange(n)
    for attempt in range(MAX_ESCALATIONS + 1):
        if pending.size == 0:
            break
        Lp, Rp = L.take(pending), R.take(pending)
        cpl_p, cpr_p = cpl[pending], cpr[pending]
        us, ps, tsl, tsr, _, _ = _parallel_star(Lp, Rp, cpl_p, cpr_p)
        with np.errstate(divide="ignore", invalid="ignore"):
            pos_l, pos_r = tsl > 0, tsr > 0
            hsl = np.where(pos_l, 1.0 / tsl, Lp.h)
            hsr = np.where(pos_r, 1.0 / tsr, Rp.h)
            ml, sl = _cond1bis_margin(Lp, cpl_p, hsl, model, params)
            mr, sr = _cond1bis_margin(Rp, cpr_p, hsr, model, params)
        esc_l = ~pos_l | (ml < -COND_TOL * sl)
        esc_r = ~pos_r | (mr < -COND_TOL * sr)
        cand = ~(esc_l | esc_r)
        ci = np.nonzero(cand)[0]
        if ci.size:
            Lc, Rc = Lp.take(ci), Rp.take(ci)
            if model is ModelKind.SVUCM:
                res = _perp_svucm(Lc, Rc, cpl_p[ci], cpr_p[ci], params)
                it = np.zeros(ci.size, dtype=np.int64)
            else:
                *res, succ, it = _search_perp_svtm(Lc, Rc, cpl_p[ci], cpr_p[ci], params, model)
                res = list(res)
                if not np.all(succ):
                    fb = ~succ
                    alt = _perp_decoupled(Lc.take(fb), Rc.take(fb), cpl_p[ci][fb], cpr_p[ci][fb], params)
                    for arr, val in zip(res, alt):
                        arr[fb] = val
                    decoupled[pending[ci][fb]] = True
            g = pending[ci]
            cql[g], cqr[g], al2[g], ar2[g], bl[g], br[g] = res
            riter[g] += it
        need = esc_l | esc_r
        if attempt == MAX_ESCALATIONS:
            break
        cpl[pending[esc_l]] *= 2.0
        cpr[pending[esc_r]] *= 2.0
        escal[pending[need]] += 1
        pending = pending[need]

    # faces that never reached the perpendicular stage still need usable values
    unset = cql == 0
    if np.any(unset):
        if model is ModelKind.SVUCM:
            vals = _perp_svucm(L.take(unset), R.take(unset), cpl[unset], cpr[unset], params)
        else:
            vals = _perp_decoupled(L.take(unset), R.take(unset), cpl[unset], cpr[unset], params)
        for arr, val in zip((cql, cqr, al2, ar2, bl, br), vals):
            arr[unset] = val

    core = _fan_core(L, R, cpl, cpr, cql, cqr, al2, ar2, bl, br, model, params, check_degenerate=False)
    ok, all_ok = _condition_flags(core)
    rp = RelaxationParams(cpl, cpr, cql, cqr, al2, ar2, bl, br, entropy_ok=all_ok,
                          conditions=ok, escalations=escal, r_iterations=riter,
                          decoupled=decoupled)
    return rp, core


def select_params(pair: LocalPair, params: PhysParams, model: ModelKind) -> RelaxationParams:
    """Choose relaxation parameters that make the fan entropy-satisfying.

    Faces for which the iteration caps are reached keep their last parameters
    and are flagged with ``entropy_ok = False``.
    """
    model = ModelKind.parse(model)
    L = _Side.build(_faces(pair.left), params, model)
    R = _Side.build(_faces(pair.right), params, model)
    rp, _ = _select(L, R, params, model)
    return rp


# ---------------------------------------------------------------------------
# Fan assembly
# ---------------------------------------------------------------------------


def _build_fan(L: _Side, R: _Side, core: dict, rp: RelaxationParams, model: ModelKind) -> RiemannFan:
    us, ps = core["us"], core["ps"]

    def side_state(S, h, v, psi, pi_perp, e_par, e_perp):
        p = state_from_invariants(h, us, v, S.i1, S.i2, S.i3, psi, model)
        return FanState(p.h, p.u, p.v, p.cxx, p.cyy, p.cxy, p.czz, ps, pi_perp, psi, e_par, e_perp)

    def outer(S):
        return FanState(S.h, S.u, S.v, S.cxx, S.cyy, S.cxy, S.czz, S.p_par, S.p_perp, S.psi, S.e_par, S.e_perp)

    states = [
        outer(L),
        side_state(L, core["hsl"], core["vsl"], core["psisl"], core["qsl"], core["ehl"], core["ehpsl"]),
        side_state(L, core["hsl"], core["vsh"], core["psishl"], core["qsh"], core["ehl"], core["ehpshl"]),
        side_state(R, core["hsr"], core["vsh"], core["psishr"], core["qsh"], core["ehr"], core["ehpshr"]),
        side_state(R, core["hsr"], core["vsr"], core["psisr"], core["qsr"], core["ehr"], core["ehpsr"]),
        outer(R),
    ]
    return RiemannFan(states, core["speeds"], rp, model, core)


def solve_fan(pair: LocalPair, rp: RelaxationParams, params: PhysParams, model: ModelKind) -> RiemannFan:
    """Closed-form fan for given relaxation parameters.

    Raises:
        DegenerateParams: If ``c_perp == c_par`` on a side with ``b != 0``.
    """
    model = ModelKind.parse(model)
    L = _Side.build(_faces(pair.left), params, model)
    R = _Side.build(_faces(pair.right), params, model)
    core = _fan_core(L, R, *(np.atleast_1d(np.asarray(x, dtype=float)) for x in (
        rp.c_par_l, rp.c_par_r, rp.c_perp_l, rp.c_perp_r, rp.a_sq_l, rp.a_sq_r, rp.b_l, rp.b_r)),
        model, params)
    return _build_fan(L, R, core, rp, model)


def solve_pair(pair: LocalPair, params: PhysParams, model: ModelKind) -> RiemannFan:
    """Select parameters and build the fan in one pass."""
    model = ModelKind.parse(model)
    L = _Side.build(_faces(pair.left), params, model)
    R = _Side.build(_faces(pair.right), params, model)
    rp, core = _select(L, R, params, model)
    return _build_fan(L, R, core, rp, model)


def check_entropy_conditions(pair: LocalPair, rp: RelaxationParams, fan: RiemannFan | None,
                             model: ModelKind, params: PhysParams | None = None) -> ConditionReport:
    """Evaluate the six entropy conditions plus the ``cond1bis`` check.

    The inequalities are evaluated directly on relaxed versus true energies of
    the star and sharp states of each side.
    """
    if fan is not None and fan.core:
        core = fan.core
    else:
        if params is None:
            raise ValueError("params required when no fan is given")
        core = solve_fan(pair, rp, params, model).core
    ok, all_ok = _condition_flags(core)
    return ConditionReport(dict(core["margins"]), dict(core["scales"]), ok, all_ok)


# ---------------------------------------------------------------------------
# Update
# ---------------------------------------------------------------------------


def interface_update(fan: RiemannFan, cap=None, normal=(1.0, 0.0), q_left=None, q_right=None) -> InterfaceUpdate:
    """Cell increments obtained by averaging the fan over the two half cells.

    The left increment is ``sum_k (min(xi_k,0) - min(xi_{k-1},0)) (O S_k - q_l)``
    and the right one mirrors it with positive parts; the next cell value is
    ``q + tau * |face| / |cell| * delta``.

    Args:
        fan: Solved fan.
        cap: Available speed ``(sum |face|/|cell|)^{-1} / tau``; checked when given.
        normal: Face normal used to rotate states back to the global frame.
        q_left, q_right: Global conserved outer states (recomputed if omitted).

    Raises:
        CapTooSmall: If ``cap`` is below the largest wave speed.
    """
    xi = fan.speeds
    smax = np.maximum(np.abs(xi[:, 0]), np.abs(xi[:, 4]))
    if cap is not None and np.any(np.asarray(cap) < smax):
        raise CapTooSmall(f"cap {np.min(cap)} below max wave speed {np.max(smax)}")
    n = np.asarray(normal, dtype=float)
    nb = n if n.ndim == 1 else n
    qs = [None] * 6
    qs[0] = from_local_frame(fan.states[0].primitive(), nb) if q_left is None else np.asarray(q_left)
    qs[5] = from_local_frame(fan.states[5].primitive(), nb) if q_right is None else np.asarray(q_right)
    for k in range(1, 5):
        qs[k] = from_local_frame(fan.states[k].primitive(), nb)
    ql, qr = qs[0], qs[5]

    neg = np.minimum(xi, 0.0)
    posv = np.maximum(xi, 0.0)
    dl = np.zeros_like(ql)
    dr = np.zeros_like(qr)
    for k in range(1, 6):
        hi = neg[:, k] if k < 5 else 0.0
        dl += (hi - neg[:, k - 1])[:, None] * (qs[k] - ql)
    for k in range(0, 5):
        lo = posv[:, k - 1] if k > 0 else 0.0
        dr += (posv[:, k] - lo)[:, None] * (qs[k] - qr)

    fluxes = [s.flux() for s in fan.states]
    klo = np.sum(xi < 0, axis=1)
    khi = np.sum(xi <= 0, axis=1)
    gstack = np.stack([f[3] for f in fluxes], axis=0)
    cols = np.arange(xi.shape[0])
    g_tilde = 0.5 * (gstack[klo, cols] + gstack[khi, cols])

    # mass/momentum flux consistent with the applied left increment
    f0 = fluxes[0]
    nx, ny = (n[..., 0], n[..., 1])
    flux = np.stack([f0[0], f0[1] * nx - f0[2] * ny, f0[1] * ny + f0[2] * nx], axis=-1) - dl[:, :3]
    return InterfaceUpdate(dl, dr, smax, g_tilde, flux)


def exact_normal_flux(p: PrimitiveState, params: PhysParams, model: ModelKind):
    """Physical normal flux ``(mass, normal mom., tangential mom., entropy)`` in the local frame."""
    model = ModelKind.parse(model)
    p_par, p_perp = pressures(p, params, model)
    e_par, e_perp = energy_split(p, params)
    hu = p.h * p.u
    energy = 0.5 * (p.u**2 + p.v**2) + e_par + e_perp
    return hu, hu * p.u + p_par, hu * p.v + p_perp, hu * energy + p_par * p.u + p_perp * p.v
